#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cts/classify.hpp"
#include "cts/corpus.hpp"
#include "cts/embedding.hpp"
#include "cts/error.hpp"
#include "cts/metrics.hpp"
#include "cts/report.hpp"
#include "cts/specialize.hpp"
#include "cts/splits.hpp"

namespace cts {

/// SE: frozen base embeddings (identity head). SE+CTS: contrastively
/// specialized head.
enum class Variant { se, se_cts };

const char* to_string(Variant v) noexcept;
Variant variant_from_string(const std::string& s);

/// A corpus with its base embeddings (one row per post id).
struct Dataset {
  Corpus corpus;
  EmbeddingMatrix embeddings;
  std::string backend;
};

/// Rows of `embeddings` in corpus post order; IntegrityError when a post
/// has no vector.
RowMatrixF aligned_rows(const Corpus& corpus, const EmbeddingMatrix& embeddings);

std::string corpus_fingerprint(const Corpus& corpus);
std::string embeddings_fingerprint(const EmbeddingMatrix& embeddings);

/// Post ids handed to a training stage of one job.
struct AccessRecord {
  std::size_t fold = 0;
  std::size_t seed_index = 0;
  std::string stage;  // "pairgen", "specialize" or "train"
  std::vector<std::string> post_ids;
};
using AccessObserver = std::function<void(const AccessRecord&)>;

/// Rejects any training-stage access to posts of held-out events.
class LeakageGuard {
 public:
  LeakageGuard(const Corpus& corpus, std::span<const std::string> test_events);
  /// Throws IntegrityError naming the first offending post.
  void check(const std::string& stage, std::span<const std::size_t> posts) const;

 private:
  const Corpus* corpus_;
  std::vector<bool> forbidden_;
};

enum class RelevancyMode {
  /// Train on the source's own labels, map predictions to relevancy.
  map_predictions,
  /// Train a binary classifier on the relevancy-mapped source.
  binary_classifier,
};

const char* to_string(RelevancyMode m) noexcept;
RelevancyMode relevancy_mode_from_string(const std::string& s);

struct ExperimentConfig {
  DataSetup setup = DataSetup::high;
  std::vector<Variant> variants{Variant::se, Variant::se_cts};
  /// Variant the others are significance-tested against.
  Variant reference = Variant::se;
  std::size_t folds = 5;
  /// Runs per fold in the Low setup; High always uses one.
  std::size_t low_seeds = 3;
  std::size_t low_quota = 10;
  /// Pair-generation iterations; defaults to 5 (Low) or 1 (High).
  std::optional<std::size_t> pair_iterations;
  bool dedup_pairs = false;
  double val_ratio = 0.1;
  /// The seed fields of `cts` and `classifier` are replaced by per-job
  /// derived seeds.
  CtsConfig cts;
  ClassifierConfig classifier;
  std::size_t permutation_resamples = kDefaultPermutationResamples;
  AggregateBy aggregate_by = AggregateBy::folds;
  StdKind std_kind = StdKind::population;
  MacroMode macro_mode = MacroMode::per_event;
  RelevancyMode relevancy_mode = RelevancyMode::map_predictions;
  std::uint64_t seed = 0;
  std::size_t jobs = 1;
  /// Where runs/ is written; empty writes nothing.
  std::filesystem::path output_dir;
  AccessObserver observer;

  std::size_t iterations() const;
  std::size_t seeds_per_fold() const;
  /// ArgumentError on inconsistent settings.
  void validate() const;
};

/// Canonical JSON of everything that affects results (not jobs, output
/// directory or observer).
std::string experiment_config_json(const ExperimentConfig& config);

/// Seed of the (fold, seed index) job; all of its randomness derives from it.
std::uint64_t job_seed(const ExperimentConfig& config, std::size_t fold, std::size_t seed_index);

/// The fold plan every experiment over `corpus` uses.
FoldPlan experiment_folds(const Corpus& corpus, const ExperimentConfig& config);

/// Training posts of one job: Low sampling or the full fold training split.
std::vector<std::size_t> training_pool(const Corpus& corpus, const Fold& fold,
                                       const ExperimentConfig& config, std::uint64_t job_seed);

/// Sentence pairs a job specializes on (corpus post indices).
PairSet job_pairs(const Corpus& corpus, std::span<const std::size_t> pool,
                  const ExperimentConfig& config, std::uint64_t job_seed);

/// Specialize a fresh head on `pairs` (corpus post indices into the rows of
/// `x`), seeing only the rows those pairs reference.
SpecializeResult specialize_pairs(const RowMatrixF& x, const PairSet& pairs,
                                  const ExperimentConfig& config, std::uint64_t job_seed);

/// Validation split of `pool` and classifier training on head-encoded rows.
TrainResult train_job_classifier(const Corpus& corpus, const RowMatrixF& x, const HeadF& head,
                                 std::span<const std::size_t> pool, const ExperimentConfig& config,
                                 std::uint64_t job_seed);

struct JobFailure {
  std::string variant;
  std::size_t fold = 0;
  std::size_t seed_index = 0;
  ErrorKind kind = ErrorKind::numeric;
  std::string message;
};

struct ExperimentResult {
  Report report;
  /// Completed runs per variant name, ordered by (fold, seed index).
  std::map<std::string, std::vector<RunRecord>> runs;
  std::vector<JobFailure> failures;
};

/// Disjoint-event k-fold evaluation of every configured variant. Within one
/// (fold, seed) job all variants share the training sample, validation split
/// and classifier seed, so they differ only in the encoder head.
ExperimentResult run_within_corpus(const Dataset& data, const ExperimentConfig& config);

/// Specialize on the full source corpus, freeze, then evaluate on the
/// target folds against the target's SE baseline. When source and target
/// are the same dataset the head is specialized per fold instead, which
/// reproduces the within-corpus SE+CTS run.
ExperimentResult run_cross_corpus(const Dataset& source, const Dataset& target,
                                  const ExperimentConfig& config);

/// One evaluation condition: the source as embedded for this condition and
/// the target to score (all of it).
struct CrossLingualCondition {
  std::string name;
  Dataset source;
  Dataset target;
};

/// Train on the source (info types or relevancy, per relevancy_mode) and
/// score relevancy on each condition's target. The Random row is added for
/// the first condition.
ExperimentResult run_cross_lingual(std::span<const CrossLingualCondition> conditions,
                                   const ExperimentConfig& config, bool include_random = true);

}  // namespace cts
