#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "cts/corpus.hpp"
#include "cts/metrics.hpp"
#include "cts/pairgen.hpp"
#include "cts/specialize.hpp"

// Deliberately naive reference implementations; nothing here calls the code
// it checks.
namespace cts::test::oracle {

/// F1 straight from the per-label confusion counts of every item.
F1Scores f1(std::span<const LabelSet> preds, std::span<const LabelSet> golds, std::size_t labels);

/// Pairwise comparison of every negative with every positive.
HardSelection select_hard(std::span<const double> pos_d, std::span<const double> neg_d);

/// Expected pair counts per anchor (indexed by anchor) for one iteration,
/// or nullopt when generation must refuse the input.
struct AnchorCounts {
  std::vector<std::size_t> positives;
  std::vector<std::size_t> negatives;
};
std::optional<AnchorCounts> pair_counts(std::span<const LabelSet> labels, TaskKind kind);

/// True when the pair respects its polarity: positives share a label and
/// join two different posts, negatives share none.
bool admissible(const SentencePair& p, std::span<const LabelSet> labels);

/// Central differences of `f` at `x` along coordinate `k`.
double central_difference(const std::function<double(std::span<const double>)>& f,
                          std::vector<double> x, std::size_t k, double h);

}  // namespace cts::test::oracle
