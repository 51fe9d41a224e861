#include "cts/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <numeric>
#include <ostream>

#include <nlohmann/json.hpp>

#include "cts/error.hpp"
#include "cts/rng.hpp"

namespace cts {

namespace {

double f1_from(std::size_t tp, std::size_t fp, std::size_t fn) {
  const auto denom = 2 * tp + fp + fn;
  return denom == 0 ? 0.0 : 2.0 * static_cast<double>(tp) / static_cast<double>(denom);
}

void check_labels(const LabelSet& s, std::size_t label_count) {
  for (const auto l : s) {
    if (l >= label_count) throw ArgumentError("f1: label index out of range");
  }
}

}  // namespace

F1Scores f1_scores(std::span<const LabelSet> preds, std::span<const LabelSet> golds,
                   std::size_t label_count, TaskKind kind) {
  if (preds.size() != golds.size())
    throw ArgumentError("f1_scores: " + std::to_string(preds.size()) + " predictions vs " +
                        std::to_string(golds.size()) + " golds");
  if (label_count == 0) throw ArgumentError("f1_scores: label_count must be positive");
  std::vector<std::size_t> tp(label_count, 0), fp(label_count, 0), fn(label_count, 0);
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const auto& p = preds[i];
    const auto& g = golds[i];
    check_labels(p, label_count);
    check_labels(g, label_count);
    if (kind == TaskKind::multi_class && (g.size() != 1 || p.size() > 1))
      throw ArgumentError("f1_scores: multi-class items need one gold and at most one prediction");
    for (const auto l : p) {
      if (std::binary_search(g.begin(), g.end(), l)) ++tp[l]; else ++fp[l];
    }
    for (const auto l : g) {
      if (!std::binary_search(p.begin(), p.end(), l)) ++fn[l];
    }
  }
  F1Scores out;
  std::size_t TP = 0, FP = 0, FN = 0;
  double macro = 0.0;
  for (std::size_t l = 0; l < label_count; ++l) {
    TP += tp[l];
    FP += fp[l];
    FN += fn[l];
    macro += f1_from(tp[l], fp[l], fn[l]);
  }
  out.micro = f1_from(TP, FP, FN);
  out.macro = macro / static_cast<double>(label_count);
  return out;
}

std::vector<EventScore> event_scores(std::span<const LabelSet> preds,
                                     std::span<const LabelSet> golds,
                                     std::span<const std::string> event_ids,
                                     std::size_t label_count, TaskKind kind) {
  if (preds.size() != golds.size() || preds.size() != event_ids.size())
    throw ArgumentError("event_scores: misaligned inputs");
  std::map<std::string, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < event_ids.size(); ++i) groups[event_ids[i]].push_back(i);
  std::vector<EventScore> out;
  for (const auto& [event, idx] : groups) {
    std::vector<LabelSet> p, g;
    for (const auto i : idx) {
      p.push_back(preds[i]);
      g.push_back(golds[i]);
    }
    const auto s = f1_scores(p, g, label_count, kind);
    out.push_back({event, s.micro, s.macro, idx.size()});
  }
  return out;
}

double mean_of(std::span<const double> xs) {
  if (xs.empty()) return 0.0;
  return std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
}

double std_of(std::span<const double> xs, StdKind kind) {
  const auto n = xs.size();
  if (n == 0 || (kind == StdKind::sample && n < 2)) return 0.0;
  const double m = mean_of(xs);
  double ss = 0.0;
  for (const double x : xs) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(kind == StdKind::sample ? n - 1 : n));
}

RunRecord RunRecord::from_events(std::size_t fold, std::uint64_t seed,
                                 std::vector<EventScore> events, F1Scores pooled,
                                 StdKind std_kind) {
  RunRecord r;
  r.fold = fold;
  r.seed = seed;
  r.events = std::move(events);
  r.pooled = pooled;
  std::vector<double> micro, macro;
  for (const auto& e : r.events) {
    micro.push_back(e.micro_f1);
    macro.push_back(e.macro_f1);
  }
  r.micro_mean = mean_of(micro);
  r.micro_std = std_of(micro, std_kind);
  r.macro_mean = mean_of(macro);
  r.macro_std = std_of(macro, std_kind);
  return r;
}

Aggregate aggregate(std::span<const RunRecord> records, AggregateBy by, StdKind std_kind,
                    MacroMode macro_mode) {
  if (records.empty()) throw ArgumentError("aggregate: no run records");
  auto run_micro = [&](const RunRecord& r) {
    return macro_mode == MacroMode::per_event ? r.micro_mean : r.pooled.micro;
  };
  auto run_macro = [&](const RunRecord& r) {
    return macro_mode == MacroMode::per_event ? r.macro_mean : r.pooled.macro;
  };

  std::vector<double> micro, macro;
  if (by == AggregateBy::folds) {
    for (const auto& r : records) {
      micro.push_back(run_micro(r));
      macro.push_back(run_macro(r));
    }
  } else {
    std::map<std::size_t, std::pair<std::vector<double>, std::vector<double>>> per_fold;
    for (const auto& r : records) {
      per_fold[r.fold].first.push_back(run_micro(r));
      per_fold[r.fold].second.push_back(run_macro(r));
    }
    for (const auto& [_, v] : per_fold) {
      micro.push_back(mean_of(v.first));
      macro.push_back(mean_of(v.second));
    }
  }
  return {mean_of(micro), std_of(micro, std_kind), mean_of(macro), std_of(macro, std_kind),
          records.size()};
}

std::vector<EventScore> mean_event_scores(std::span<const RunRecord> records) {
  std::map<std::string, std::pair<EventScore, std::size_t>> acc;
  for (const auto& r : records) {
    for (const auto& e : r.events) {
      auto& [s, n] = acc[e.event_id];
      s.event_id = e.event_id;
      s.micro_f1 += e.micro_f1;
      s.macro_f1 += e.macro_f1;
      s.support += e.support;
      ++n;
    }
  }
  std::vector<EventScore> out;
  for (auto& [_, v] : acc) {
    auto& [s, n] = v;
    s.micro_f1 /= static_cast<double>(n);
    s.macro_f1 /= static_cast<double>(n);
    s.support /= n;
    out.push_back(s);
  }
  return out;
}

double paired_permutation_test(std::span<const double> a, std::span<const double> b,
                               std::size_t resamples, std::uint64_t seed) {
  if (a.size() != b.size())
    throw ArgumentError("permutation test: " + std::to_string(a.size()) + " vs " +
                        std::to_string(b.size()) + " scores");
  if (a.empty()) throw ArgumentError("permutation test: no paired scores");
  if (resamples < 1000) throw ArgumentError("permutation test: resamples must be >= 1000");

  const std::size_t n = a.size();
  std::vector<double> diff(n);
  for (std::size_t i = 0; i < n; ++i) diff[i] = a[i] - b[i];
  const double observed = std::abs(mean_of(diff));
  // Ties between mathematically equal statistics must not depend on
  // summation order.
  const double tol = 1e-12 * std::max(1.0, observed);

  constexpr std::size_t kShard = 1024;
  std::size_t extreme = 0;
  for (std::size_t shard = 0; shard * kShard < resamples; ++shard) {
    Rng rng(derive_seed(seed, {shard}));
    const auto end = std::min(resamples, (shard + 1) * kShard);
    for (std::size_t r = shard * kShard; r < end; ++r) {
      double sum = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        sum += (rng.next_u64() >> 63) != 0 ? diff[i] : -diff[i];
      }
      if (std::abs(sum / static_cast<double>(n)) >= observed - tol) ++extreme;
    }
  }
  return (1.0 + static_cast<double>(extreme)) / (static_cast<double>(resamples) + 1.0);
}

F1Scores random_baseline(std::span<const LabelSet> golds, std::size_t label_count,
                         std::uint64_t seed, TaskKind kind) {
  if (golds.empty()) throw ArgumentError("random_baseline: no gold labels");
  if (label_count == 0) throw ArgumentError("random_baseline: label_count must be positive");
  Rng rng(seed);
  std::vector<LabelSet> preds;
  preds.reserve(golds.size());
  for (std::size_t i = 0; i < golds.size(); ++i) {
    if (kind == TaskKind::multi_class) {
      preds.push_back({static_cast<LabelId>(rng.uniform_index(label_count))});
    } else {
      LabelSet s;
      for (LabelId l = 0; l < label_count; ++l) {
        if (rng.bernoulli(0.5)) s.push_back(l);
      }
      preds.push_back(std::move(s));
    }
  }
  return f1_scores(preds, golds, label_count, kind);
}

using nlohmann::json;

std::string run_record_to_json(const RunRecord& r) {
  json j;
  j["fold"] = r.fold;
  j["seed"] = r.seed;
  j["micro_mean"] = r.micro_mean;
  j["micro_std"] = r.micro_std;
  j["macro_mean"] = r.macro_mean;
  j["macro_std"] = r.macro_std;
  j["pooled"] = {{"micro", r.pooled.micro}, {"macro", r.pooled.macro}};
  auto& events = j["events"] = json::array();
  for (const auto& e : r.events) {
    events.push_back({{"event", e.event_id},
                      {"support", e.support},
                      {"micro_f1", e.micro_f1},
                      {"macro_f1", e.macro_f1}});
  }
  return j.dump(2);
}

RunRecord run_record_from_json(const std::string& text) {
  try {
    const auto j = json::parse(text);
    RunRecord r;
    r.fold = j.at("fold").get<std::size_t>();
    r.seed = j.at("seed").get<std::uint64_t>();
    r.micro_mean = j.at("micro_mean").get<double>();
    r.micro_std = j.at("micro_std").get<double>();
    r.macro_mean = j.at("macro_mean").get<double>();
    r.macro_std = j.at("macro_std").get<double>();
    r.pooled = {j.at("pooled").at("micro").get<double>(), j.at("pooled").at("macro").get<double>()};
    for (const auto& e : j.at("events")) {
      r.events.push_back({e.at("event").get<std::string>(), e.at("micro_f1").get<double>(),
                          e.at("macro_f1").get<double>(), e.at("support").get<std::size_t>()});
    }
    return r;
  } catch (const json::parse_error& e) {
    throw ParseError(1, std::string("run record: ") + e.what());
  } catch (const json::exception& e) {
    throw SchemaError(std::string("run record: ") + e.what());
  }
}

void write_run_records_csv(std::ostream& out, std::span<const RunRecord> records) {
  out << "fold,seed,event,support,micro_f1,macro_f1\n";
  char buf[64];
  for (const auto& r : records) {
    for (const auto& e : r.events) {
      out << r.fold << ',' << r.seed << ',' << e.event_id << ',' << e.support << ',';
      std::snprintf(buf, sizeof buf, "%.17g,%.17g\n", e.micro_f1, e.macro_f1);
      out << buf;
    }
  }
}

}  // namespace cts
