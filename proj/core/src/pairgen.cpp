#include "cts/pairgen.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "cts/error.hpp"
#include "cts/rng.hpp"
#include "log.hpp"

namespace cts {

std::vector<SentencePair> PairSet::all() const {
  std::vector<SentencePair> out = positives;
  out.insert(out.end(), negatives.begin(), negatives.end());
  return out;
}

namespace {

constexpr std::uint64_t kPositiveStream = 1;
constexpr std::uint64_t kNegativeStream = 2;

void dedup_pairs(std::vector<SentencePair>& pairs) {
  std::set<std::pair<std::uint32_t, std::uint32_t>> seen;
  std::erase_if(pairs, [&](const SentencePair& p) {
    return !seen.emplace(std::min(p.i, p.j), std::max(p.i, p.j)).second;
  });
}

// r-th (0-based) element of [0, n) that is not in `members`, where
// gaps[t] = members[t] - t for sorted members.
std::size_t nth_non_member(const std::vector<std::uint32_t>& gaps, std::size_t r) {
  const auto t = std::upper_bound(gaps.begin(), gaps.end(), static_cast<std::uint32_t>(r)) -
                 gaps.begin();
  return r + static_cast<std::size_t>(t);
}

bool disjoint(const LabelSet& a, const LabelSet& b) {
  auto i = a.begin();
  auto j = b.begin();
  while (i != a.end() && j != b.end()) {
    if (*i == *j) return false;
    if (*i < *j) ++i; else ++j;
  }
  return true;
}

}  // namespace

PairSet generate_pairs_multiclass(std::span<const LabelId> labels, const PairGenConfig& config) {
  if (config.n < 1) throw ArgumentError("pairgen: n must be >= 1");
  const std::size_t n = labels.size();
  std::map<LabelId, std::vector<std::uint32_t>> classes;
  std::vector<std::uint32_t> position(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto& members = classes[labels[i]];
    position[i] = static_cast<std::uint32_t>(members.size());
    members.push_back(static_cast<std::uint32_t>(i));
  }
  if (classes.size() < 2)
    throw DegenerateInputError("pairgen: need at least two classes to build negatives");

  std::map<LabelId, std::vector<std::uint32_t>> gaps;
  std::size_t singletons = 0;
  for (const auto& [label, members] : classes) {
    auto& g = gaps[label];
    for (std::size_t t = 0; t < members.size(); ++t)
      g.push_back(members[t] - static_cast<std::uint32_t>(t));
    if (members.size() == 1) ++singletons;
  }
  if (singletons > 0)
    detail::logger().warn("pairgen: {} singleton class(es) contribute no positive pairs",
                          singletons);

  PairSet out;
  out.positives.reserve(n * config.n);
  out.negatives.reserve(n * config.n);
  for (std::size_t it = 0; it < config.n; ++it) {
    for (std::size_t a = 0; a < n; ++a) {
      const auto& members = classes.at(labels[a]);
      Rng rng(derive_seed(config.seed, {it, a}));
      const auto anchor = static_cast<std::uint32_t>(a);
      if (members.size() >= 2) {
        auto r = static_cast<std::size_t>(rng.uniform_index(members.size() - 1));
        if (r >= position[a]) ++r;
        out.positives.push_back({anchor, members[r], Polarity::positive});
      }
      const auto r = static_cast<std::size_t>(rng.uniform_index(n - members.size()));
      const auto partner = nth_non_member(gaps.at(labels[a]), r);
      out.negatives.push_back({anchor, static_cast<std::uint32_t>(partner), Polarity::negative});
    }
  }
  if (config.dedup) {
    dedup_pairs(out.positives);
    dedup_pairs(out.negatives);
  }
  return out;
}

namespace {

// Draw one partner uniformly from {x in candidates(x) : admissible(x), x not
// in used}. Rejection sampling against `draw_any` first; exact enumeration
// once that stalls. Falls back to reuse when every admissible partner was
// used already. Returns -1 when nothing is admissible at all.
template <class DrawAny, class Admissible, class Enumerate>
long long draw_partner(Rng& rng, const std::vector<std::uint32_t>& used, DrawAny draw_any,
                       Admissible admissible, Enumerate enumerate) {
  constexpr int kRejectionTries = 32;
  auto unused = [&](std::uint32_t x) {
    return std::find(used.begin(), used.end(), x) == used.end();
  };
  for (int t = 0; t < kRejectionTries; ++t) {
    const auto x = draw_any(rng);
    if (admissible(x) && unused(x)) return x;
  }
  const std::vector<std::uint32_t> all = enumerate();
  if (all.empty()) return -1;
  std::vector<std::uint32_t> fresh;
  for (const auto x : all) {
    if (unused(x)) fresh.push_back(x);
  }
  const auto& pool = fresh.empty() ? all : fresh;
  return pool[static_cast<std::size_t>(rng.uniform_index(pool.size()))];
}

}  // namespace

PairSet generate_pairs_multilabel(std::span<const LabelSet> labelsets,
                                  const PairGenConfig& config) {
  if (config.n < 1) throw ArgumentError("pairgen: n must be >= 1");
  const std::size_t n = labelsets.size();
  if (n < 2) throw DegenerateInputError("pairgen: need at least two posts");

  std::map<LabelId, std::vector<std::uint32_t>> members;
  for (std::size_t i = 0; i < n; ++i) {
    if (labelsets[i].empty()) throw ArgumentError("pairgen: empty label set");
    for (const auto l : labelsets[i]) members[l].push_back(static_cast<std::uint32_t>(i));
  }

  // Disjoint-partner lists are only materialized per distinct label set,
  // and only when rejection sampling stalls.
  std::map<LabelSet, std::vector<std::uint32_t>> disjoint_cache;
  auto disjoint_partners = [&](const LabelSet& s) -> const std::vector<std::uint32_t>& {
    auto it = disjoint_cache.find(s);
    if (it == disjoint_cache.end()) {
      std::vector<std::uint32_t> out;
      for (std::size_t x = 0; x < n; ++x) {
        if (disjoint(s, labelsets[x])) out.push_back(static_cast<std::uint32_t>(x));
      }
      it = disjoint_cache.emplace(s, std::move(out)).first;
    }
    return it->second;
  };

  {
    const std::set<LabelSet> distinct(labelsets.begin(), labelsets.end());
    bool any = false;
    for (auto a = distinct.begin(); a != distinct.end() && !any; ++a) {
      for (auto b = std::next(a); b != distinct.end(); ++b) {
        if (disjoint(*a, *b)) {
          any = true;
          break;
        }
      }
    }
    if (!any)
      throw DegenerateInputError("pairgen: no two posts have disjoint label sets");
  }

  PairSet out;
  for (std::size_t it = 0; it < config.n; ++it) {
    for (std::size_t a = 0; a < n; ++a) {
      const auto anchor = static_cast<std::uint32_t>(a);
      const auto& labels = labelsets[a];
      Rng rng(derive_seed(config.seed, {it, a}));
      Rng pos_rng = rng.split(kPositiveStream);
      Rng neg_rng = rng.split(kNegativeStream);
      std::vector<std::uint32_t> used;

      for (const auto l : labels) {
        const auto& pool = members.at(l);
        if (pool.size() < 2) continue;
        const auto x = draw_partner(
            pos_rng, used,
            [&](Rng& r) { return pool[static_cast<std::size_t>(r.uniform_index(pool.size()))]; },
            [&](std::uint32_t x) { return x != anchor; },
            [&] {
              std::vector<std::uint32_t> c;
              for (const auto x : pool) {
                if (x != anchor) c.push_back(x);
              }
              return c;
            });
        used.push_back(static_cast<std::uint32_t>(x));
        out.positives.push_back({anchor, static_cast<std::uint32_t>(x), Polarity::positive});
      }

      used.clear();
      for (std::size_t k = 0; k < labels.size(); ++k) {
        const auto x = draw_partner(
            neg_rng, used,
            [&](Rng& r) { return static_cast<std::uint32_t>(r.uniform_index(n)); },
            [&](std::uint32_t x) { return disjoint(labels, labelsets[x]); },
            [&] { return disjoint_partners(labels); });
        if (x < 0) break;
        used.push_back(static_cast<std::uint32_t>(x));
        out.negatives.push_back({anchor, static_cast<std::uint32_t>(x), Polarity::negative});
      }
    }
  }
  if (config.dedup) {
    dedup_pairs(out.positives);
    dedup_pairs(out.negatives);
  }
  return out;
}

PairSet generate_pairs(const Corpus& corpus, std::span<const std::size_t> posts,
                       const PairGenConfig& config) {
  for (const auto p : posts) {
    if (p >= corpus.size()) throw ArgumentError("pairgen: post index out of range");
  }
  PairSet local;
  if (corpus.task_kind() == TaskKind::multi_class) {
    std::vector<LabelId> labels;
    labels.reserve(posts.size());
    for (const auto p : posts) labels.push_back(corpus[p].labels.front());
    local = generate_pairs_multiclass(labels, config);
  } else {
    std::vector<LabelSet> sets;
    sets.reserve(posts.size());
    for (const auto p : posts) sets.push_back(corpus[p].labels);
    local = generate_pairs_multilabel(sets, config);
  }
  auto remap = [&](std::vector<SentencePair>& pairs) {
    for (auto& pr : pairs) {
      pr.i = static_cast<std::uint32_t>(posts[pr.i]);
      pr.j = static_cast<std::uint32_t>(posts[pr.j]);
    }
  };
  remap(local.positives);
  remap(local.negatives);
  return local;
}

void write_pairs_csv(std::ostream& out, const PairSet& pairs) {
  out << "i,j,polarity\n";
  for (const auto& p : pairs.positives) out << p.i << ',' << p.j << ",positive\n";
  for (const auto& p : pairs.negatives) out << p.i << ',' << p.j << ",negative\n";
}

PairSet read_pairs_csv(std::istream& in) {
  PairSet pairs;
  std::string line;
  std::size_t lineno = 0;
  if (!std::getline(in, line) || line != "i,j,polarity")
    throw ParseError(1, "pair listing: expected header 'i,j,polarity'");
  ++lineno;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string i, j, pol;
    if (!std::getline(ss, i, ',') || !std::getline(ss, j, ',') || !std::getline(ss, pol))
      throw ParseError(lineno, "pair listing: expected 3 fields");
    SentencePair p;
    try {
      p.i = static_cast<std::uint32_t>(std::stoul(i));
      p.j = static_cast<std::uint32_t>(std::stoul(j));
    } catch (const std::exception&) {
      throw ParseError(lineno, "pair listing: bad index");
    }
    if (pol == "positive") {
      p.polarity = Polarity::positive;
      pairs.positives.push_back(p);
    } else if (pol == "negative") {
      p.polarity = Polarity::negative;
      pairs.negatives.push_back(p);
    } else {
      throw ParseError(lineno, "pair listing: bad polarity '" + pol + "'");
    }
  }
  return pairs;
}

void save_pairs_csv(const std::filesystem::path& path, const PairSet& pairs) {
  std::ofstream out(path);
  if (!out) throw ArgumentError("cannot write " + path.string());
  write_pairs_csv(out, pairs);
}

PairSet load_pairs_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ArgumentError("cannot open " + path.string());
  return read_pairs_csv(in);
}

}  // namespace cts
