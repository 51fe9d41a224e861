#include "cts/splits.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include <nlohmann/json.hpp>

#include "cts/error.hpp"
#include "cts/rng.hpp"

namespace cts {

using nlohmann::json;

std::string fold_plan_to_json(const FoldPlan& plan) {
  json j;
  j["k"] = plan.k;
  j["seed"] = plan.seed;
  auto& folds = j["folds"] = json::array();
  for (const auto& f : plan.folds) {
    folds.push_back({{"train_events", f.train_events}, {"test_events", f.test_events}});
  }
  return j.dump(2);
}

FoldPlan fold_plan_from_json(const std::string& text) {
  try {
    const json j = json::parse(text);
    FoldPlan plan;
    plan.k = j.at("k").get<std::size_t>();
    plan.seed = j.at("seed").get<std::uint64_t>();
    for (const auto& f : j.at("folds")) {
      plan.folds.push_back({f.at("train_events").get<std::vector<std::string>>(),
                            f.at("test_events").get<std::vector<std::string>>()});
    }
    if (plan.folds.size() != plan.k) throw SchemaError("fold plan: fold count != k");
    return plan;
  } catch (const json::parse_error& e) {
    throw ParseError(1, std::string("fold plan: ") + e.what());
  } catch (const json::exception& e) {
    throw SchemaError(std::string("fold plan: ") + e.what());
  }
}

FoldPlan kfold_disjoint_events(const Corpus& corpus, std::size_t k, std::uint64_t seed) {
  auto events = corpus.event_ids();
  if (k < 2) throw ArgumentError("kfold: k must be at least 2");
  if (k > events.size())
    throw ArgumentError("kfold: k=" + std::to_string(k) + " exceeds " +
                        std::to_string(events.size()) + " events");
  Rng rng(seed);
  rng.shuffle(events);

  std::vector<std::vector<std::string>> groups(k);
  for (std::size_t i = 0; i < events.size(); ++i) groups[i % k].push_back(events[i]);

  FoldPlan plan{k, seed, {}};
  for (std::size_t f = 0; f < k; ++f) {
    Fold fold;
    fold.test_events = groups[f];
    std::sort(fold.test_events.begin(), fold.test_events.end());
    for (std::size_t g = 0; g < k; ++g) {
      if (g != f) fold.train_events.insert(fold.train_events.end(), groups[g].begin(),
                                           groups[g].end());
    }
    std::sort(fold.train_events.begin(), fold.train_events.end());
    plan.folds.push_back(std::move(fold));
  }
  return plan;
}

const char* to_string(DataSetup setup) noexcept {
  return setup == DataSetup::low ? "Low" : "High";
}

DataSetup data_setup_from_string(const std::string& s) {
  if (s == "Low" || s == "low") return DataSetup::low;
  if (s == "High" || s == "high") return DataSetup::high;
  throw ArgumentError("unknown data setup '" + s + "' (expected Low or High)");
}

std::vector<std::size_t> sample_low_resource(const Corpus& corpus,
                                             std::span<const std::string> train_events,
                                             std::size_t quota, std::uint64_t seed) {
  if (quota < 1) throw ArgumentError("sample_low_resource: quota must be >= 1");
  std::vector<std::string> events(train_events.begin(), train_events.end());
  std::sort(events.begin(), events.end());
  events.erase(std::unique(events.begin(), events.end()), events.end());

  Rng rng(seed);
  std::vector<std::size_t> chosen;
  const auto label_count = corpus.ontology().size();
  for (const auto& e : events) {
    const auto it = corpus.events().find(e);
    if (it == corpus.events().end()) throw ArgumentError("unknown event '" + e + "'");
    std::vector<std::vector<std::size_t>> cells(label_count);
    for (const auto idx : it->second) {
      for (const auto l : corpus[idx].labels) cells[l].push_back(idx);
    }
    for (const auto& cell : cells) {
      const auto take = std::min(quota, cell.size());
      for (const auto pick : rng.sample_without_replacement(cell.size(), take))
        chosen.push_back(cell[pick]);
    }
  }
  std::sort(chosen.begin(), chosen.end());
  chosen.erase(std::unique(chosen.begin(), chosen.end()), chosen.end());
  return chosen;
}

ValidationSplit validation_split(std::span<const std::size_t> items,
                                 std::span<const std::uint64_t> strata, double ratio,
                                 std::uint64_t seed) {
  const std::size_t n = items.size();
  if (!(ratio > 0.0 && ratio < 1.0))
    throw ArgumentError("validation_split: ratio must be in (0, 1)");
  if (n < 2) throw ArgumentError("validation_split: need at least 2 items");
  if (strata.size() != n) throw ArgumentError("validation_split: strata misaligned");

  const auto n_val = std::clamp<std::size_t>(
      static_cast<std::size_t>(std::llround(ratio * static_cast<double>(n))), 1, n - 1);

  std::map<std::uint64_t, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < n; ++i) groups[strata[i]].push_back(i);
  const bool stratify = std::all_of(groups.begin(), groups.end(),
                                    [](const auto& g) { return g.second.size() >= 2; });

  Rng rng(seed);
  std::vector<bool> held(n, false);
  if (!stratify) {
    for (const auto pick : rng.sample_without_replacement(n, n_val)) held[pick] = true;
  } else {
    // Largest-remainder allocation of n_val across strata.
    struct Share {
      std::size_t quota;
      double remainder;
      std::size_t cap;
    };
    std::vector<Share> shares;
    std::size_t assigned = 0;
    for (const auto& [_, members] : groups) {
      const double exact = static_cast<double>(n_val) * static_cast<double>(members.size()) /
                           static_cast<double>(n);
      const auto cap = members.size() - 1;
      const auto q = std::min(static_cast<std::size_t>(std::floor(exact)), cap);
      shares.push_back({q, exact - std::floor(exact), cap});
      assigned += q;
    }
    std::vector<std::size_t> order(shares.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return shares[a].remainder > shares[b].remainder;
    });
    while (assigned < n_val) {
      bool progressed = false;
      for (const auto s : order) {
        if (assigned == n_val) break;
        if (shares[s].quota < shares[s].cap) {
          ++shares[s].quota;
          ++assigned;
          progressed = true;
        }
      }
      if (!progressed) break;
    }
    std::size_t s = 0;
    for (const auto& [_, members] : groups) {
      for (const auto pick : rng.sample_without_replacement(members.size(), shares[s].quota))
        held[members[pick]] = true;
      ++s;
    }
  }

  ValidationSplit out;
  for (std::size_t i = 0; i < n; ++i) (held[i] ? out.val : out.train).push_back(items[i]);
  std::sort(out.train.begin(), out.train.end());
  std::sort(out.val.begin(), out.val.end());
  return out;
}

ValidationSplit validation_split(const Corpus& corpus, std::span<const std::size_t> posts,
                                 double ratio, std::uint64_t seed) {
  std::vector<std::uint64_t> strata;
  strata.reserve(posts.size());
  for (const auto p : posts) {
    std::uint64_t key = 0xcbf29ce484222325ULL;
    for (const auto l : corpus[p].labels) key = splitmix64(key ^ l);
    strata.push_back(key);
  }
  return validation_split(posts, strata, ratio, seed);
}

}  // namespace cts
