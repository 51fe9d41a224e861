#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <vector>

#include "cts/corpus.hpp"

namespace cts {

enum class Polarity : std::uint8_t { negative = 0, positive = 1 };

struct SentencePair {
  std::uint32_t i = 0;
  std::uint32_t j = 0;
  Polarity polarity = Polarity::positive;

  friend bool operator==(const SentencePair&, const SentencePair&) = default;
};

/// Pos and Neg. Indices refer to whatever sequence the pairs were generated
/// from (input positions for the label-list overloads, corpus post indices
/// for the Corpus overload).
struct PairSet {
  std::vector<SentencePair> positives;
  std::vector<SentencePair> negatives;

  std::size_t size() const noexcept { return positives.size() + negatives.size(); }
  /// Positives followed by negatives.
  std::vector<SentencePair> all() const;

  friend bool operator==(const PairSet&, const PairSet&) = default;
};

/// Iteration counts for the two data setups.
inline constexpr std::size_t kHighSetupIterations = 1;
inline constexpr std::size_t kLowSetupIterations = 5;

struct PairGenConfig {
  std::size_t n = kHighSetupIterations;
  std::uint64_t seed = 0;
  /// Drop repeated unordered pairs within each polarity.
  bool dedup = false;
};

/// For each of n iterations and each anchor: one positive partner drawn
/// uniformly from the anchor's class (skipped for singleton classes) and one
/// negative partner drawn uniformly from all other classes.
/// Throws DegenerateInputError when fewer than two classes are present.
PairSet generate_pairs_multiclass(std::span<const LabelId> labels, const PairGenConfig& config);

/// For each of n iterations and each anchor s: for every label l of s, one
/// positive partner that also carries l (when any exists), plus |labels(s)|
/// negative partners whose label sets are disjoint from labels(s). Partners
/// are distinct within one anchor-iteration while candidates remain.
/// Throws DegenerateInputError when no two posts have disjoint label sets.
PairSet generate_pairs_multilabel(std::span<const LabelSet> labelsets,
                                  const PairGenConfig& config);

/// Dispatches on the corpus task kind over `posts`; emitted indices are
/// corpus post indices.
PairSet generate_pairs(const Corpus& corpus, std::span<const std::size_t> posts,
                       const PairGenConfig& config);

/// Audit listing: header "i,j,polarity", one row per pair.
void write_pairs_csv(std::ostream& out, const PairSet& pairs);
PairSet read_pairs_csv(std::istream& in);
void save_pairs_csv(const std::filesystem::path& path, const PairSet& pairs);
PairSet load_pairs_csv(const std::filesystem::path& path);

}  // namespace cts
