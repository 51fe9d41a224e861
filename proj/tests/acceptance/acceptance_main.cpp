// One PASS/FAIL line per acceptance criterion. Exit status is non-zero when
// any criterion fails.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <string>

#include "cts/classify.hpp"
#include "cts/experiments.hpp"
#include "cts/logging.hpp"
#include "cts/metrics.hpp"
#include "cts/optim.hpp"
#include "cts/pairgen.hpp"
#include "cts/report.hpp"
#include "cts/rng.hpp"
#include "cts/specialize.hpp"
#include "cts/splits.hpp"
#include "oracles.hpp"
#include "synthetic.hpp"

using namespace cts;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

// Tolerances and budgets.
constexpr double kGradRelTol = 1e-4;
constexpr std::size_t kGradProbes = 64;
constexpr double kGradStep = 1e-6;
constexpr double kGradBudgetSeconds = 10.0;
constexpr std::size_t kHardMiningBatches = 1000;
constexpr double kLossExample = 0.0925;
constexpr double kLossTol = 1e-7;
constexpr double kF1Tol = 1e-12;
constexpr double kMinMacroGainPoints = 2.0;
constexpr double kSyntheticBudgetSeconds = 60.0;
constexpr std::size_t kThresholdVectors = 10000;

struct Outcome {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& why) {
    if (!ok && pass) {
      pass = false;
      detail = why;
    }
  }
};

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

RowMatrixD gaussian(std::size_t rows, std::size_t cols, std::uint64_t seed, double scale = 1.0) {
  Rng rng(seed);
  RowMatrixD m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = scale * rng.normal();
  return m;
}

template <class... M>
std::vector<double> flat(const M&... ms) {
  std::vector<double> out;
  (out.insert(out.end(), ms.data(), ms.data() + ms.size()), ...);
  return out;
}

template <class... M>
void unflat(std::span<const double> p, M&... ms) {
  std::size_t at = 0;
  auto take = [&](auto& m) {
    std::copy(p.begin() + static_cast<std::ptrdiff_t>(at),
              p.begin() + static_cast<std::ptrdiff_t>(at + static_cast<std::size_t>(m.size())), m.data());
    at += static_cast<std::size_t>(m.size());
  };
  (take(ms), ...);
}

// ---------------------------------------------------------------- AC1
Outcome gradients() {
  Outcome o;
  const auto t0 = Clock::now();
  double worst = 0.0;
  std::size_t probes = 0;

  for (const bool residual : {true, false}) {
    const std::size_t dim = 8;
    const auto x = gaussian(10, dim, 31);
    HeadD head(dim, residual);
    head.weight() = gaussian(dim, dim, 32, 0.3);
    head.bias() = gaussian(1, dim, 33, 0.3);
    std::vector<SentencePair> pairs;
    for (std::uint32_t i = 0; i < 5; ++i) {
      pairs.push_back({2 * i, 2 * i + 1, Polarity::positive});
      pairs.push_back({i, 9 - i, Polarity::negative});
    }
    const double margin = 1.5;
    HeadGradient<double> g;
    ocl_objective(head, x, std::span<const SentencePair>(pairs), margin, &g);
    const auto analytic = flat(g.weight, g.bias);
    auto loss = [&](std::span<const double> p) {
      HeadD h(dim, residual);
      unflat(p, h.weight(), h.bias());
      return ocl_objective(h, x, std::span<const SentencePair>(pairs), margin,
                           static_cast<HeadGradient<double>*>(nullptr));
    };
    const auto r = grad_check(loss, flat(head.weight(), head.bias()), analytic, kGradProbes, kGradStep, 41);
    worst = std::max(worst, r.max_relative_error);
    probes += r.probed.size();
  }

  for (const auto kind : {TaskKind::multi_class, TaskKind::multi_label}) {
    MlpD clf = MlpF(6, 10, 4, kind, 7).cast<double>();
    clf.b1 = gaussian(1, 10, 8, 0.1);
    clf.b2 = gaussian(1, 4, 9, 0.1);
    const auto x = gaussian(8, 6, 10);
    std::vector<LabelSet> y;
    Rng rng(11);
    for (int i = 0; i < 8; ++i) {
      if (kind == TaskKind::multi_class) {
        y.push_back({static_cast<LabelId>(rng.uniform_index(4))});
      } else {
        LabelSet s;
        for (LabelId l = 0; l < 4; ++l)
          if (rng.bernoulli(0.4)) s.push_back(l);
        y.push_back(s);
      }
    }
    RowMatrixD mask(8, 10);
    for (Eigen::Index i = 0; i < mask.size(); ++i) mask.data()[i] = rng.bernoulli(0.4) ? 0.0 : 1.0 / 0.6;
    MlpGradient<double> g;
    mlp_objective(clf, x, std::span<const LabelSet>(y), &mask, &g);
    auto loss = [&](std::span<const double> p) {
      MlpD c = clf;
      unflat(p, c.w1, c.b1, c.w2, c.b2);
      return mlp_objective(c, x, std::span<const LabelSet>(y), &mask,
                           static_cast<MlpGradient<double>*>(nullptr));
    };
    const auto r = grad_check(loss, flat(clf.w1, clf.b1, clf.w2, clf.b2), flat(g.w1, g.b1, g.w2, g.b2),
                              kGradProbes, kGradStep, 42);
    worst = std::max(worst, r.max_relative_error);
    probes += r.probed.size();
  }

  const double secs = seconds_since(t0);
  o.detail = std::to_string(probes) + " probes, max rel err " + fmt("%.2e", worst) + ", " + fmt("%.2f", secs) + "s";
  o.require(worst < kGradRelTol, o.detail);
  o.require(secs < kGradBudgetSeconds, o.detail);
  return o;
}

// ---------------------------------------------------------------- AC2
void for_each_labeling(std::size_t posts, const std::vector<LabelSet>& options,
                       const std::function<void(const std::vector<LabelSet>&)>& fn) {
  std::vector<std::size_t> digits(posts, 0);
  for (;;) {
    std::vector<LabelSet> sets;
    for (const auto d : digits) sets.push_back(options[d]);
    fn(sets);
    std::size_t k = 0;
    while (k < posts && ++digits[k] == options.size()) digits[k++] = 0;
    if (k == posts) return;
  }
}

// Empty string when the generator agrees with the oracle.
std::string check_pairs(const std::vector<LabelSet>& sets, TaskKind kind, std::size_t n, std::uint64_t seed) {
  const auto expected = test::oracle::pair_counts(sets, kind);
  const PairGenConfig cfg{n, seed, false};
  auto generate = [&] {
    if (kind == TaskKind::multi_label) return generate_pairs_multilabel(sets, cfg);
    std::vector<LabelId> labels;
    for (const auto& s : sets) labels.push_back(s.front());
    return generate_pairs_multiclass(labels, cfg);
  };
  if (!expected) {
    try {
      generate();
    } catch (const DegenerateInputError&) {
      return {};
    }
    return "degenerate input accepted";
  }
  const auto pairs = generate();
  std::vector<std::size_t> pos(sets.size(), 0), neg(sets.size(), 0);
  for (const auto& p : pairs.positives) {
    if (p.polarity != Polarity::positive || !test::oracle::admissible(p, sets)) return "bad positive pair";
    ++pos[p.i];
  }
  for (const auto& p : pairs.negatives) {
    if (p.polarity != Polarity::negative || !test::oracle::admissible(p, sets)) return "bad negative pair";
    ++neg[p.i];
  }
  for (std::size_t a = 0; a < sets.size(); ++a) {
    if (pos[a] != n * expected->positives[a] || neg[a] != n * expected->negatives[a])
      return "count mismatch at anchor " + std::to_string(a);
  }
  return {};
}

Outcome pair_generation() {
  Outcome o;
  std::size_t corpora = 0;
  const std::vector<LabelSet> mc{{0}, {1}, {2}};
  const std::vector<LabelSet> ml{{0}, {1}, {2}, {0, 1}, {0, 2}, {1, 2}, {0, 1, 2}};
  for (const std::size_t n : {kHighSetupIterations, kLowSetupIterations}) {
    for (std::size_t posts = 1; posts <= 8; ++posts) {
      for_each_labeling(posts, mc, [&](const auto& sets) {
        ++corpora;
        const auto e = check_pairs(sets, TaskKind::multi_class, n, corpora);
        o.require(e.empty(), "multi-class: " + e);
      });
    }
    // every multi-label corpus up to 5 posts, then a seeded sample of 6-8
    for (std::size_t posts = 1; posts <= 5; ++posts) {
      for_each_labeling(posts, ml, [&](const auto& sets) {
        ++corpora;
        const auto e = check_pairs(sets, TaskKind::multi_label, n, corpora);
        o.require(e.empty(), "multi-label: " + e);
      });
    }
    Rng rng(n);
    for (int t = 0; t < 20000; ++t) {
      const std::size_t posts = 6 + rng.uniform_index(3);
      std::vector<LabelSet> sets;
      for (std::size_t i = 0; i < posts; ++i) sets.push_back(ml[rng.uniform_index(ml.size())]);
      ++corpora;
      const auto e = check_pairs(sets, TaskKind::multi_label, n, corpora);
      o.require(e.empty(), "multi-label: " + e);
    }
  }
  if (o.pass) o.detail = std::to_string(corpora) + " corpora checked for n in {1, 5}";
  return o;
}

// ---------------------------------------------------------------- AC3
Outcome hard_mining() {
  Outcome o;
  Rng rng(3);
  std::size_t fallbacks = 0;
  for (std::size_t b = 0; b < kHardMiningBatches; ++b) {
    std::vector<double> pos(1 + rng.uniform_index(12)), neg(1 + rng.uniform_index(12));
    // half the batches on a coarse grid so ties occur
    const bool grid = b % 2 == 0;
    for (auto& d : pos) d = grid ? static_cast<double>(rng.uniform_index(9)) / 4.0 : 2.0 * rng.uniform01();
    for (auto& d : neg) d = grid ? static_cast<double>(rng.uniform_index(9)) / 4.0 : 2.0 * rng.uniform01();
    const auto got = ocl_select_hard(pos, neg);
    const auto want = test::oracle::select_hard(pos, neg);
    o.require(got.positive == want.positive && got.negative == want.negative,
              "selection differs in batch " + std::to_string(b));
    o.require(got.positive_fallback == want.positive_fallback && got.negative_fallback == want.negative_fallback,
              "fallback flag differs in batch " + std::to_string(b));
    fallbacks += got.positive_fallback + got.negative_fallback;
  }
  if (o.pass)
    o.detail = std::to_string(kHardMiningBatches) + " batches, " + std::to_string(fallbacks) + " fallbacks";
  return o;
}

// ---------------------------------------------------------------- AC4
Outcome loss_value() {
  Outcome o;
  const std::vector<double> pos{0.2, 0.6}, neg{0.4, 0.9};
  const auto sel = ocl_select_hard(pos, neg);
  o.require(sel.positive == std::vector<std::size_t>{1} && sel.negative == std::vector<std::size_t>{0},
            "unexpected selection");
  std::vector<double> sp, sn;
  for (const auto i : sel.positive) sp.push_back(pos[i]);
  for (const auto j : sel.negative) sn.push_back(neg[j]);
  const double loss = contrastive_loss(sp, sn, 0.5);
  o.detail = "loss " + fmt("%.10f", loss);
  o.require(std::abs(loss - kLossExample) <= kLossTol, o.detail);
  return o;
}

// ---------------------------------------------------------------- AC5
Outcome split_integrity() {
  Outcome o;
  Rng rng(5);
  std::size_t corpora = 0;
  for (std::size_t events = 5; events <= 40; ++events) {
    for (int rep = 0; rep < 3; ++rep) {
      std::vector<LabelSet> labels;
      const std::size_t posts = events * (1 + rng.uniform_index(30));
      for (std::size_t i = 0; i < posts; ++i) labels.push_back({static_cast<LabelId>(rng.uniform_index(4))});
      // uneven events: post i goes to a random event, with every event non-empty
      std::vector<Post> ps;
      for (std::size_t i = 0; i < posts; ++i) {
        const auto e = i < events ? i : rng.uniform_index(events);
        ps.push_back({"p" + std::to_string(i), "ev" + std::to_string(e), "t", labels[i]});
      }
      const Corpus corpus("c", test::numbered_ontology(4, TaskKind::multi_class), ps);
      ++corpora;
      const auto plan = kfold_disjoint_events(corpus, 5, rng.next_u64());
      std::map<std::string, int> tested;
      for (const auto& f : plan.folds) {
        std::set<std::string> train(f.train_events.begin(), f.train_events.end());
        o.require(train.size() == f.train_events.size(), "duplicate train event");
        for (const auto& e : f.test_events) {
          o.require(!train.contains(e), "event in train and test");
          ++tested[e];
        }
        o.require(train.size() + f.test_events.size() == events, "fold does not cover all events");

        const auto picked = sample_low_resource(corpus, f.train_events, 10, rng.next_u64());
        std::map<std::pair<std::string, LabelId>, std::size_t> cell, got;
        for (const auto& e : f.train_events)
          for (const auto i : corpus.events().at(e)) ++cell[{e, corpus[i].labels.front()}];
        for (const auto i : picked) ++got[{corpus[i].event_id, corpus[i].labels.front()}];
        for (const auto& [k, size] : cell)
          o.require(got[k] == std::min<std::size_t>(10, size), "Low quota not met for a cell");
        o.require(got.size() == cell.size(), "Low sample outside train events");
      }
      o.require(tested.size() == events, "an event is never tested");
      for (const auto& [e, c] : tested) o.require(c == 1, "event tested twice: " + e);
    }
  }
  if (o.pass) o.detail = std::to_string(corpora) + " corpora with 5-40 events";
  return o;
}

// ---------------------------------------------------------------- AC6
Outcome metric_oracle() {
  Outcome o;
  std::size_t cases = 0;
  auto compare = [&](const std::vector<LabelSet>& p, const std::vector<LabelSet>& g, std::size_t labels,
                     TaskKind kind) {
    ++cases;
    const auto got = f1_scores(p, g, labels, kind);
    const auto want = test::oracle::f1(p, g, labels);
    o.require(std::abs(got.micro - want.micro) <= kF1Tol && std::abs(got.macro - want.macro) <= kF1Tol,
              "f1 differs from enumeration");
    if (kind == TaskKind::multi_class) {
      std::size_t hits = 0;
      for (std::size_t i = 0; i < p.size(); ++i) hits += p[i] == g[i];
      o.require(std::abs(got.micro - static_cast<double>(hits) / static_cast<double>(p.size())) <= kF1Tol,
                "micro F1 != accuracy");
    }
  };
  // Odometer over per-item joint (pred, gold) states.
  auto enumerate = [&](std::size_t items, std::size_t states, const auto& decode, std::size_t labels,
                       TaskKind kind) {
    std::vector<std::size_t> digit(items, 0);
    std::vector<LabelSet> p(items), g(items);
    for (;;) {
      for (std::size_t i = 0; i < items; ++i) decode(digit[i], p[i], g[i]);
      compare(p, g, labels, kind);
      if (!o.pass) return;
      std::size_t k = 0;
      while (k < items && ++digit[k] == states) digit[k++] = 0;
      if (k == items) return;
    }
  };

  for (std::size_t labels = 1; labels <= 4; ++labels) {
    for (std::size_t items = 1; items <= 6; ++items) {
      enumerate(items, labels * labels,
                [&](std::size_t s, LabelSet& p, LabelSet& g) {
                  p = {static_cast<LabelId>(s % labels)};
                  g = {static_cast<LabelId>(s / labels)};
                },
                labels, TaskKind::multi_class);
    }
  }
  // Multi-label: a full sweep while the joint space stays at or below 4^12
  // assignments, a seeded sample of the larger shapes.
  std::size_t sampled = 0;
  Rng rng(6);
  for (std::size_t labels = 1; labels <= 4; ++labels) {
    const std::size_t subsets = std::size_t{1} << labels;
    auto decode = [&](std::size_t s, LabelSet& p, LabelSet& g) {
      p.clear();
      g.clear();
      for (std::size_t l = 0; l < labels; ++l) {
        if ((s % subsets) >> l & 1) p.push_back(static_cast<LabelId>(l));
        if ((s / subsets) >> l & 1) g.push_back(static_cast<LabelId>(l));
      }
    };
    for (std::size_t items = 1; items <= 6; ++items) {
      if (labels * items <= 12) {
        enumerate(items, subsets * subsets, decode, labels, TaskKind::multi_label);
      } else {
        std::vector<LabelSet> p(items), g(items);
        for (int t = 0; t < 200000; ++t) {
          for (std::size_t i = 0; i < items; ++i) decode(rng.uniform_index(subsets * subsets), p[i], g[i]);
          compare(p, g, labels, TaskKind::multi_label);
          ++sampled;
        }
      }
    }
  }
  if (o.pass)
    o.detail = std::to_string(cases) + " labelings (" + std::to_string(sampled) + " sampled multi-label)";
  return o;
}

// ---------------------------------------------------------------- AC7
struct SyntheticRun {
  double se_macro = 0;
  double cts_macro = 0;
  double cos_before = 0;
  double cos_after = 0;
};

double mean_intra_class_cosine(const RowMatrixF& z, const std::vector<LabelId>& labels) {
  double sum = 0;
  std::size_t n = 0;
  for (Eigen::Index i = 0; i < z.rows(); ++i)
    for (Eigen::Index j = i + 1; j < z.rows(); ++j)
      if (labels[static_cast<std::size_t>(i)] == labels[static_cast<std::size_t>(j)]) {
        sum += z.row(i).cast<double>().dot(z.row(j).cast<double>());
        ++n;
      }
  return sum / static_cast<double>(n);
}

// 6 Gaussian classes in 32 dimensions; 8 shared high-variance axes carry no
// class signal. 60 training posts (10 per class) in one event, 600 test
// posts in five others. Specialization uses the Low pair budget (n = 5).
SyntheticRun synthetic_seed(std::uint64_t s) {
  constexpr std::size_t kClasses = 6, kDim = 32, kTrain = 60, kTest = 600;
  std::vector<LabelId> labels;
  std::vector<Post> posts;
  for (std::size_t i = 0; i < kTrain + kTest; ++i) {
    labels.push_back(static_cast<LabelId>(i % kClasses));
    posts.push_back({"p" + std::to_string(i), i < kTrain ? "train" : "test" + std::to_string(i % 5), "t",
                     {labels.back()}});
  }
  const test::ClusterSpec spec{kDim, 0.15, 8, 1.0};
  const auto centres = test::class_centres(kClasses, kDim, derive_seed(s, {1}));
  const RowMatrixF x = test::cluster_points(centres, labels, spec, derive_seed(s, {2}));
  const Corpus corpus("synthetic", test::numbered_ontology(kClasses, TaskKind::multi_class), posts);

  ExperimentConfig cfg;
  cfg.setup = DataSetup::low;
  cfg.cts.lr = 1e-3;
  cfg.cts.epochs = 10;
  std::vector<std::size_t> pool(kTrain);
  std::iota(pool.begin(), pool.end(), std::size_t{0});
  const auto seed = derive_seed(100 + s, {0});
  const auto pairs = job_pairs(corpus, pool, cfg, seed);
  const HeadF specialized = specialize_pairs(x, pairs, cfg, seed).head;
  const HeadF identity(kDim);

  const RowMatrixF xt = x.bottomRows(kTest);
  const std::vector<LabelId> yt(labels.begin() + kTrain, labels.end());
  std::vector<LabelSet> gold;
  for (const auto l : yt) gold.push_back({l});
  SyntheticRun r;
  for (const HeadF* h : {&identity, &specialized}) {
    const auto trained = train_job_classifier(corpus, x, *h, pool, cfg, seed);
    const auto z = h->encode(xt);
    const double macro = f1_scores(predict(trained.classifier, z, cfg.classifier.threshold), gold, kClasses,
                                   TaskKind::multi_class)
                             .macro;
    const double cos = mean_intra_class_cosine(z, yt);
    (h == &identity ? r.se_macro : r.cts_macro) = macro;
    (h == &identity ? r.cos_before : r.cos_after) = cos;
  }
  return r;
}

Outcome synthetic_direction() {
  Outcome o;
  const auto t0 = Clock::now();
  SyntheticRun mean;
  bool cos_up = true;
  constexpr int kSeeds = 5;
  for (int s = 0; s < kSeeds; ++s) {
    const auto r = synthetic_seed(static_cast<std::uint64_t>(s));
    mean.se_macro += r.se_macro / kSeeds;
    mean.cts_macro += r.cts_macro / kSeeds;
    mean.cos_before += r.cos_before / kSeeds;
    mean.cos_after += r.cos_after / kSeeds;
    cos_up = cos_up && r.cos_after > r.cos_before;
  }
  const double secs = seconds_since(t0);
  const double gain = 100.0 * (mean.cts_macro - mean.se_macro);
  o.detail = "macro F1 SE " + fmt("%.1f", 100 * mean.se_macro) + " -> SE+CTS " + fmt("%.1f", 100 * mean.cts_macro) +
             " (" + fmt("%+.1f", gain) + " pts), intra-class cos " + fmt("%.3f", mean.cos_before) + " -> " +
             fmt("%.3f", mean.cos_after) + ", " + fmt("%.1f", secs) + "s";
  o.require(gain >= kMinMacroGainPoints, o.detail);
  o.require(mean.cos_after > mean.cos_before && cos_up, o.detail);
  o.require(secs < kSyntheticBudgetSeconds, o.detail);
  return o;
}

// ---------------------------------------------------------------- AC8
Outcome threshold_behaviour() {
  Outcome o;
  const std::vector<double> example{0.5, 0.2, 0.35};
  o.require(threshold_labels(example, 0.3) == LabelSet{0, 2}, "worked example");
  Rng rng(8);
  const std::vector<double> thetas{0.05, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 0.95};
  for (std::size_t v = 0; v < kThresholdVectors; ++v) {
    std::vector<double> p(1 + rng.uniform_index(12));
    for (auto& x : p) x = rng.uniform01();
    LabelSet prev = threshold_labels(p, 0.0);
    for (const double t : thetas) {
      const auto cur = threshold_labels(p, t);
      o.require(std::includes(prev.begin(), prev.end(), cur.begin(), cur.end()), "set grew with theta");
      prev = cur;
    }
  }
  // same rule through the classifier decode path
  MlpF clf(2, 3, 3, TaskKind::multi_label, 1);
  clf.w2.setZero();
  clf.b2 << static_cast<float>(std::log(0.5 / 0.5)), static_cast<float>(std::log(0.2 / 0.8)),
      static_cast<float>(std::log(0.35 / 0.65));
  RowMatrixF x(1, 2);
  x << 0.1f, 0.2f;
  o.require(predict(clf, x, 0.3).front() == LabelSet{0, 2}, "classifier decode of the worked example");
  if (o.pass) o.detail = std::to_string(kThresholdVectors) + " vectors x " + std::to_string(thetas.size()) + " thresholds";
  return o;
}

// ---------------------------------------------------------------- AC9
Outcome report_fixtures() {
  Outcome o;
  Report within;
  within.rows = {{"SE+CTS", "", "CrisisLex", "Low", 0.566, 0.049, 0.5, 0.05, {}, {}, {}, false, ""}};
  Report cross;
  cross.kind = ReportKind::cross_corpus;
  cross.rows = {{"SE+CTS", "CrisisLex", "TREC-IS", "High", {}, {}, 0.3, 0.02, {}, {}, 0.036, false, ""}};
  Report lingual;
  lingual.kind = ReportKind::cross_lingual;
  lingual.rows = {{"Random", "", "target", "de", {}, {}, 0.422, {}, {}, {}, {}, false, ""}};
  const std::vector<std::pair<std::string, std::string>> checks{
      {render_report(within, ReportFormat::markdown), "56.6 (4.9)"},
      {render_report(within, ReportFormat::text), "56.6 (4.9)"},
      {render_report(cross, ReportFormat::markdown), "(3.6↑)"},
      {render_report(lingual, ReportFormat::markdown), "| 42.2"},
  };
  for (const auto& [text, needle] : checks) o.require(text.find(needle) != std::string::npos, "missing " + needle);
  o.require(format_score(0.566, 0.049) == "56.6 (4.9)", "score cell");
  o.require(format_delta(0.036) == "(3.6↑)", "delta cell");
  o.require(format_score(0.422) == "42.2", "random cell");
  if (o.pass) o.detail = "\"56.6 (4.9)\", \"(3.6↑)\", \"42.2\"";
  return o;
}

// ---------------------------------------------------------------- AC10
std::map<std::string, std::string> snapshot(const fs::path& dir) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    std::ifstream in(e.path(), std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    files[fs::relative(e.path(), dir).string()] = ss.str();
  }
  return files;
}

ExperimentConfig pipeline_config(DataSetup setup) {
  ExperimentConfig cfg;
  cfg.setup = setup;
  cfg.folds = 3;
  cfg.low_seeds = 2;
  cfg.cts.epochs = 2;
  cfg.cts.lr = 1e-3;
  cfg.classifier.epochs = 5;
  cfg.classifier.hidden = 32;
  cfg.permutation_resamples = 1000;
  cfg.seed = 2024;
  return cfg;
}

Outcome determinism() {
  Outcome o;
  const auto data = test::cluster_dataset(4, 6, 20, {.dim = 16}, 10);
  std::size_t files = 0;
  for (const auto setup : {DataSetup::high, DataSetup::low}) {
    std::map<std::string, std::string> first;
    for (int run = 0; run < 2; ++run) {
      test::TempDir dir;
      auto cfg = pipeline_config(setup);
      cfg.output_dir = dir.path();
      cfg.jobs = run == 0 ? 1 : 2;  // scheduling must not matter either
      const auto result = run_within_corpus(data, cfg);
      write_report_files(result.report, dir.path());
      auto snap = snapshot(dir.path());
      if (run == 0) {
        first = std::move(snap);
      } else {
        o.require(snap.size() == first.size(), "different file sets");
        for (const auto& [name, bytes] : first) {
          const auto it = snap.find(name);
          o.require(it != snap.end() && it->second == bytes, "differs: " + name);
        }
        files += first.size();
      }
    }
  }
  if (o.pass) o.detail = std::to_string(files) + " report and parameter files byte-identical";
  return o;
}

// ---------------------------------------------------------------- AC11
Outcome leakage() {
  Outcome o;
  std::size_t records = 0, ids = 0;
  const std::vector<Dataset> datasets{test::cluster_dataset(4, 6, 20, {.dim = 16}, 11),
                                      test::multilabel_cluster_dataset(4, 6, 20, {.dim = 16}, 12)};
  for (const auto& data : datasets) {
    std::map<std::string, std::string> event_of;
    for (const auto& p : data.corpus.posts()) event_of[p.id] = p.event_id;
    for (const auto setup : {DataSetup::high, DataSetup::low}) {
      auto cfg = pipeline_config(setup);
      std::vector<AccessRecord> seen;
      cfg.observer = [&](const AccessRecord& r) { seen.push_back(r); };
      const auto result = run_within_corpus(data, cfg);
      o.require(result.failures.empty(), "a job failed");
      const auto plan = experiment_folds(data.corpus, cfg);
      std::set<std::string> stages;
      for (const auto& r : seen) {
        ++records;
        stages.insert(r.stage);
        const auto& test_events = plan.folds.at(r.fold).test_events;
        const std::set<std::string> held(test_events.begin(), test_events.end());
        for (const auto& id : r.post_ids) {
          ++ids;
          o.require(!held.contains(event_of.at(id)), r.stage + " touched test post " + id);
        }
      }
      o.require(stages == std::set<std::string>{"pairgen", "specialize", "train"}, "a stage was not instrumented");
    }
  }
  // negative control: the guard does fire on a held-out post
  const auto& c = datasets.front().corpus;
  const std::vector<std::string> held{c[0].event_id};
  const std::vector<std::size_t> bad{0};
  bool fired = false;
  try {
    LeakageGuard(c, held).check("train", bad);
  } catch (const IntegrityError&) {
    fired = true;
  }
  o.require(fired, "guard did not fire on a held-out post");
  if (o.pass) o.detail = std::to_string(records) + " stage accesses, " + std::to_string(ids) + " post ids, none held out";
  return o;
}

}  // namespace

int main() {
  set_log_level(LogLevel::error);
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"gradient correctness", gradients},
      {"pair-generation counts and polarity", pair_generation},
      {"hard-mining correctness", hard_mining},
      {"loss value check", loss_value},
      {"split integrity", split_integrity},
      {"metric oracle", metric_oracle},
      {"synthetic specialization direction", synthetic_direction},
      {"multi-label threshold behaviour", threshold_behaviour},
      {"report formatting fixtures", report_fixtures},
      {"determinism", determinism},
      {"leakage guard", leakage},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    std::printf("AC%zu %s %s: %s\n", i + 1, o.pass ? "PASS" : "FAIL", criteria[i].first.c_str(), o.detail.c_str());
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
