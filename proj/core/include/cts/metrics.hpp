#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "cts/corpus.hpp"

namespace cts {

struct F1Scores {
  double micro = 0.0;
  double macro = 0.0;

  friend bool operator==(const F1Scores&, const F1Scores&) = default;
};

/// Micro F1 from TP/FP/FN pooled over all labels; macro F1 as the
/// unweighted mean over all `label_count` labels, where a label with a zero
/// denominator (never predicted, never gold) scores 0. Multi-class inputs
/// are singleton sets; an empty prediction counts as a miss.
F1Scores f1_scores(std::span<const LabelSet> preds, std::span<const LabelSet> golds,
                   std::size_t label_count, TaskKind kind);

struct EventScore {
  std::string event_id;
  double micro_f1 = 0.0;
  double macro_f1 = 0.0;
  std::size_t support = 0;

  friend bool operator==(const EventScore&, const EventScore&) = default;
};

/// Per-event F1 over items grouped by `event_ids` (aligned with preds),
/// ordered by event id.
std::vector<EventScore> event_scores(std::span<const LabelSet> preds,
                                     std::span<const LabelSet> golds,
                                     std::span<const std::string> event_ids,
                                     std::size_t label_count, TaskKind kind);

enum class StdKind { population, sample };
enum class AggregateBy { folds, seeds };
/// How the headline macro figure is formed: macro within each event then
/// averaged over events (default), or one macro over all pooled items.
enum class MacroMode { per_event, global };

double mean_of(std::span<const double> xs);
double std_of(std::span<const double> xs, StdKind kind);

/// One (fold, seed) run. Means and stds are over its events; `pooled` is
/// computed over all of the run's test items at once.
struct RunRecord {
  std::size_t fold = 0;
  std::uint64_t seed = 0;
  std::vector<EventScore> events;
  double micro_mean = 0.0;
  double micro_std = 0.0;
  double macro_mean = 0.0;
  double macro_std = 0.0;
  F1Scores pooled;

  static RunRecord from_events(std::size_t fold, std::uint64_t seed,
                               std::vector<EventScore> events, F1Scores pooled = {},
                               StdKind std_kind = StdKind::population);

  friend bool operator==(const RunRecord&, const RunRecord&) = default;
};

struct Aggregate {
  double micro_mean = 0.0;
  double micro_std = 0.0;
  double macro_mean = 0.0;
  double macro_std = 0.0;
  std::size_t runs = 0;
};

/// Event scores are first averaged per run. AggregateBy::folds treats every
/// run as one sample; AggregateBy::seeds first averages the seeds of each
/// fold and then takes mean/std across folds.
Aggregate aggregate(std::span<const RunRecord> records, AggregateBy by,
                    StdKind std_kind = StdKind::population,
                    MacroMode macro_mode = MacroMode::per_event);

/// Mean score per event across runs, ordered by event id.
std::vector<EventScore> mean_event_scores(std::span<const RunRecord> records);

/// Two-sided paired sign-flip permutation test on per-event differences
/// a - b with statistic mean(a - b):
///   p = (1 + #{ |stat*| >= |stat| }) / (resamples + 1).
/// Requires resamples >= 1000 and aligned, non-empty inputs.
double paired_permutation_test(std::span<const double> a, std::span<const double> b,
                               std::size_t resamples, std::uint64_t seed);

inline constexpr std::size_t kDefaultPermutationResamples = 10000;
inline constexpr double kSignificanceLevel = 0.05;

/// Scores of a classifier that predicts a uniform random label per item
/// (multi-label: each label independently with probability 1/2).
F1Scores random_baseline(std::span<const LabelSet> golds, std::size_t label_count,
                         std::uint64_t seed, TaskKind kind);

std::string run_record_to_json(const RunRecord& record);
RunRecord run_record_from_json(const std::string& text);
/// Header "fold,seed,event,support,micro_f1,macro_f1", one row per event.
void write_run_records_csv(std::ostream& out, std::span<const RunRecord> records);

}  // namespace cts
