#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "cts/corpus.hpp"

namespace cts {

struct Fold {
  std::vector<std::string> train_events;
  std::vector<std::string> test_events;

  friend bool operator==(const Fold&, const Fold&) = default;
};

/// Disjoint-event cross-validation plan. Each event is in exactly one test
/// set; train and test never share an event.
struct FoldPlan {
  std::size_t k = 0;
  std::uint64_t seed = 0;
  std::vector<Fold> folds;

  friend bool operator==(const FoldPlan&, const FoldPlan&) = default;
};

std::string fold_plan_to_json(const FoldPlan& plan);
FoldPlan fold_plan_from_json(const std::string& text);

/// Shuffle event ids with the seeded generator, then deal them round-robin
/// into k test groups. Requires 2 <= k <= event count.
FoldPlan kfold_disjoint_events(const Corpus& corpus, std::size_t k, std::uint64_t seed);

enum class DataSetup { low, high };

const char* to_string(DataSetup setup) noexcept;
DataSetup data_setup_from_string(const std::string& s);

struct DataConfig {
  DataSetup setup = DataSetup::high;
  std::size_t per_label_quota = 10;
  std::uint64_t seed = 0;
};

/// For every (event, label) cell among `train_events`, draw
/// min(quota, cell size) posts without replacement and return the union of
/// the draws as ascending post indices.
std::vector<std::size_t> sample_low_resource(const Corpus& corpus,
                                             std::span<const std::string> train_events,
                                             std::size_t quota, std::uint64_t seed);

struct ValidationSplit {
  std::vector<std::size_t> train;
  std::vector<std::size_t> val;
};

/// Hold out max(1, round(ratio * N)) items. When every stratum has at least
/// two members the hold-out is stratified (largest-remainder allocation,
/// each stratum keeps at least one training item); otherwise it is a plain
/// random draw. Both outputs are returned in ascending order.
ValidationSplit validation_split(std::span<const std::size_t> items,
                                 std::span<const std::uint64_t> strata, double ratio,
                                 std::uint64_t seed);

/// Stratifies on each post's full label set.
ValidationSplit validation_split(const Corpus& corpus, std::span<const std::size_t> posts,
                                 double ratio, std::uint64_t seed);

}  // namespace cts
