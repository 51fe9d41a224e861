#include "cts/experiments.hpp"

#include <algorithm>
#include <future>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "cts/hash.hpp"
#include "cts/pairgen.hpp"
#include "cts/rng.hpp"
#include "log.hpp"

namespace cts {

using nlohmann::json;

const char* to_string(Variant v) noexcept { return v == Variant::se ? "SE" : "SE+CTS"; }

Variant variant_from_string(const std::string& s) {
  if (s == "SE" || s == "se") return Variant::se;
  if (s == "SE+CTS" || s == "se+cts" || s == "se_cts") return Variant::se_cts;
  throw ArgumentError("unknown variant '" + s + "' (expected SE or SE+CTS)");
}

const char* to_string(RelevancyMode m) noexcept {
  return m == RelevancyMode::map_predictions ? "map_predictions" : "binary_classifier";
}

RelevancyMode relevancy_mode_from_string(const std::string& s) {
  if (s == "map_predictions") return RelevancyMode::map_predictions;
  if (s == "binary_classifier") return RelevancyMode::binary_classifier;
  throw ArgumentError("unknown relevancy mode '" + s + "'");
}

RowMatrixF aligned_rows(const Corpus& corpus, const EmbeddingMatrix& embeddings) {
  std::vector<std::string> ids;
  ids.reserve(corpus.size());
  for (const auto& p : corpus.posts()) ids.push_back(p.id);
  return embeddings.gather(ids);
}

std::string corpus_fingerprint(const Corpus& corpus) {
  std::ostringstream out;
  out << ontology_to_json(corpus.ontology()) << '\x1f';
  write_corpus(out, corpus);
  return sha256_hex(out.str());
}

std::string embeddings_fingerprint(const EmbeddingMatrix& embeddings) {
  Sha256 h;
  const auto dim = static_cast<std::uint64_t>(embeddings.dim());
  h.update(std::string_view(reinterpret_cast<const char*>(&dim), sizeof dim));
  for (const auto& id : embeddings.ids()) {
    h.update(id);
    h.update(std::string_view("\0", 1));
  }
  const auto& rows = embeddings.rows();
  h.update(std::string_view(reinterpret_cast<const char*>(rows.data()),
                            static_cast<std::size_t>(rows.size()) * sizeof(float)));
  return h.hex_digest();
}

LeakageGuard::LeakageGuard(const Corpus& corpus, std::span<const std::string> test_events)
    : corpus_(&corpus), forbidden_(corpus.size(), false) {
  for (const auto i : corpus.posts_in_events(test_events)) forbidden_[i] = true;
}

void LeakageGuard::check(const std::string& stage, std::span<const std::size_t> posts) const {
  for (const auto i : posts) {
    if (i >= forbidden_.size() || forbidden_[i]) {
      const std::string id = i < corpus_->size() ? (*corpus_)[i].id : std::to_string(i);
      throw IntegrityError("leakage: " + stage + " touched test-event post '" + id + "'");
    }
  }
}

std::size_t ExperimentConfig::iterations() const {
  if (pair_iterations) return *pair_iterations;
  return setup == DataSetup::low ? kLowSetupIterations : kHighSetupIterations;
}

std::size_t ExperimentConfig::seeds_per_fold() const {
  return setup == DataSetup::low ? low_seeds : 1;
}

void ExperimentConfig::validate() const {
  if (variants.empty()) throw ArgumentError("experiment: no variants");
  for (std::size_t i = 0; i < variants.size(); ++i)
    for (std::size_t j = i + 1; j < variants.size(); ++j)
      if (variants[i] == variants[j]) throw ArgumentError("experiment: duplicate variant");
  if (folds < 2) throw ArgumentError("experiment: folds must be at least 2");
  if (setup == DataSetup::low && low_seeds < 1) throw ArgumentError("experiment: low_seeds must be >= 1");
  if (low_quota < 1) throw ArgumentError("experiment: low_quota must be >= 1");
  if (iterations() < 1) throw ArgumentError("experiment: pair iterations must be >= 1");
  if (!(val_ratio > 0.0 && val_ratio < 1.0)) throw ArgumentError("experiment: val_ratio must be in (0, 1)");
  if (permutation_resamples != 0 && permutation_resamples < 1000)
    throw ArgumentError("experiment: permutation_resamples must be 0 or >= 1000");
  if (jobs < 1) throw ArgumentError("experiment: jobs must be >= 1");
  if (cts.epochs < 1 || cts.batch_pairs < 2) throw ArgumentError("experiment: bad cts config");
  if (classifier.epochs < 1 || classifier.batch < 1 || classifier.hidden < 1)
    throw ArgumentError("experiment: bad classifier config");
}

std::string experiment_config_json(const ExperimentConfig& c) {
  json j;
  j["setup"] = to_string(c.setup);
  auto& vs = j["variants"] = json::array();
  for (const auto v : c.variants) vs.push_back(to_string(v));
  j["reference"] = to_string(c.reference);
  j["folds"] = c.folds;
  j["seeds_per_fold"] = c.seeds_per_fold();
  j["low_quota"] = c.low_quota;
  j["pair_iterations"] = c.iterations();
  j["dedup_pairs"] = c.dedup_pairs;
  j["val_ratio"] = c.val_ratio;
  j["cts"] = {{"margin", c.cts.margin},       {"epochs", c.cts.epochs},
              {"batch_pairs", c.cts.batch_pairs}, {"lr", c.cts.lr},
              {"weight_decay", c.cts.weight_decay}, {"warmup_ratio", c.cts.warmup_ratio}};
  j["classifier"] = {{"epochs", c.classifier.epochs},
                     {"lr", c.classifier.lr},
                     {"weight_decay", c.classifier.weight_decay},
                     {"batch", c.classifier.batch},
                     {"dropout", c.classifier.dropout},
                     {"hidden", c.classifier.hidden},
                     {"threshold", c.classifier.threshold},
                     {"argmax_fallback", c.classifier.argmax_fallback}};
  j["permutation_resamples"] = c.permutation_resamples;
  j["aggregate_by"] = c.aggregate_by == AggregateBy::folds ? "folds" : "seeds";
  j["std"] = c.std_kind == StdKind::population ? "population" : "sample";
  j["macro"] = c.macro_mode == MacroMode::per_event ? "per_event" : "global";
  j["relevancy_mode"] = to_string(c.relevancy_mode);
  j["seed"] = c.seed;
  return j.dump();
}

std::uint64_t job_seed(const ExperimentConfig& config, std::size_t fold, std::size_t seed_index) {
  return derive_seed(config.seed, {fold, seed_index});
}

FoldPlan experiment_folds(const Corpus& corpus, const ExperimentConfig& config) {
  return kfold_disjoint_events(corpus, config.folds, derive_seed(config.seed, {0x666f6c64}));
}

std::vector<std::size_t> training_pool(const Corpus& corpus, const Fold& fold,
                                       const ExperimentConfig& config, std::uint64_t seed) {
  if (config.setup == DataSetup::low)
    return sample_low_resource(corpus, fold.train_events, config.low_quota, derive_seed(seed, {1}));
  return corpus.posts_in_events(fold.train_events);
}

PairSet job_pairs(const Corpus& corpus, std::span<const std::size_t> pool,
                  const ExperimentConfig& config, std::uint64_t seed) {
  return generate_pairs(corpus, pool, {config.iterations(), derive_seed(seed, {3}), config.dedup_pairs});
}

SpecializeResult specialize_pairs(const RowMatrixF& x, const PairSet& pairs,
                                  const ExperimentConfig& config, std::uint64_t seed) {
  std::vector<std::size_t> touched;
  for (const auto& p : pairs.all()) {
    touched.push_back(p.i);
    touched.push_back(p.j);
  }
  std::sort(touched.begin(), touched.end());
  touched.erase(std::unique(touched.begin(), touched.end()), touched.end());
  if (!touched.empty() && touched.back() >= static_cast<std::size_t>(x.rows()))
    throw ArgumentError("specialize: pair index out of range");

  auto local = [&](std::size_t i) {
    return static_cast<std::uint32_t>(std::lower_bound(touched.begin(), touched.end(), i) - touched.begin());
  };
  PairSet remapped;
  for (const auto& p : pairs.positives) remapped.positives.push_back({local(p.i), local(p.j), p.polarity});
  for (const auto& p : pairs.negatives) remapped.negatives.push_back({local(p.i), local(p.j), p.polarity});

  RowMatrixF rows(static_cast<Eigen::Index>(touched.size()), x.cols());
  for (std::size_t r = 0; r < touched.size(); ++r)
    rows.row(static_cast<Eigen::Index>(r)) = x.row(static_cast<Eigen::Index>(touched[r]));

  CtsConfig cts = config.cts;
  cts.seed = derive_seed(seed, {4});
  auto result = specialize(HeadF(static_cast<std::size_t>(x.cols())), rows, remapped, cts);
  if (result.skipped_batches > 0)
    detail::logger().debug("specialize: {} batches skipped for missing polarity", result.skipped_batches);
  return result;
}

TrainResult train_job_classifier(const Corpus& corpus, const RowMatrixF& x, const HeadF& head,
                                 std::span<const std::size_t> pool, const ExperimentConfig& config,
                                 std::uint64_t seed) {
  const auto split = validation_split(corpus, pool, config.val_ratio, derive_seed(seed, {2}));
  std::vector<LabelSet> y_train, y_val;
  RowMatrixF x_train(static_cast<Eigen::Index>(split.train.size()), x.cols());
  RowMatrixF x_val(static_cast<Eigen::Index>(split.val.size()), x.cols());
  for (std::size_t r = 0; r < split.train.size(); ++r) {
    x_train.row(static_cast<Eigen::Index>(r)) = x.row(static_cast<Eigen::Index>(split.train[r]));
    y_train.push_back(corpus[split.train[r]].labels);
  }
  for (std::size_t r = 0; r < split.val.size(); ++r) {
    x_val.row(static_cast<Eigen::Index>(r)) = x.row(static_cast<Eigen::Index>(split.val[r]));
    y_val.push_back(corpus[split.val[r]].labels);
  }
  ClassifierConfig ccfg = config.classifier;
  ccfg.seed = derive_seed(seed, {5});
  return train_classifier(head.encode(x_train), y_train, head.encode(x_val), y_val,
                          corpus.ontology().size(), corpus.task_kind(), ccfg);
}

namespace {

spdlog::logger& log() { return detail::logger(); }

std::string short_hash(const std::string& s) { return sha256_hex(s).substr(0, 16); }

std::string dataset_key(const Dataset& d) {
  return corpus_fingerprint(d.corpus) + ":" + embeddings_fingerprint(d.embeddings);
}

RowMatrixF rows_of(const RowMatrixF& x, std::span<const std::size_t> idx) {
  RowMatrixF out(static_cast<Eigen::Index>(idx.size()), x.cols());
  for (std::size_t r = 0; r < idx.size(); ++r)
    out.row(static_cast<Eigen::Index>(r)) = x.row(static_cast<Eigen::Index>(idx[r]));
  return out;
}

std::vector<LabelSet> labels_of(const Corpus& corpus, std::span<const std::size_t> idx) {
  std::vector<LabelSet> out;
  out.reserve(idx.size());
  for (const auto i : idx) out.push_back(corpus[i].labels);
  return out;
}

std::vector<std::string> events_of(const Corpus& corpus, std::span<const std::size_t> idx) {
  std::vector<std::string> out;
  out.reserve(idx.size());
  for (const auto i : idx) out.push_back(corpus[i].event_id);
  return out;
}

std::vector<std::string> ids_of(const Corpus& corpus, std::span<const std::size_t> idx) {
  std::vector<std::string> out;
  out.reserve(idx.size());
  for (const auto i : idx) out.push_back(corpus[i].id);
  return out;
}

// Shared state of one (fold, seed) job.
struct JobInputs {
  std::size_t fold = 0;
  std::size_t seed_index = 0;
  std::uint64_t job_seed = 0;
  std::vector<std::size_t> train_pool;
  const LeakageGuard* guard = nullptr;
  std::vector<AccessRecord>* access = nullptr;

  void touch(const std::string& stage, std::span<const std::size_t> posts, const Corpus& corpus) const {
    if (guard) guard->check(stage, posts);
    if (access) access->push_back({fold, seed_index, stage, ids_of(corpus, posts)});
  }
};

using HeadProvider = std::function<HeadF(const JobInputs&)>;

struct VariantPlan {
  std::string name;
  std::string dir_hash;
  HeadProvider head;
};

// Pairs over `posts`, then specialization on just the rows those pairs touch.
HeadF specialize_on(const Corpus& corpus, const RowMatrixF& x, std::span<const std::size_t> posts,
                    const ExperimentConfig& cfg, std::size_t iterations, std::uint64_t seed,
                    const JobInputs* job) {
  if (job) job->touch("pairgen", posts, corpus);
  ExperimentConfig pcfg = cfg;
  pcfg.pair_iterations = iterations;
  const PairSet pairs = job_pairs(corpus, posts, pcfg, seed);
  if (job) {
    std::vector<std::size_t> touched;
    for (const auto& p : pairs.all()) {
      touched.push_back(p.i);
      touched.push_back(p.j);
    }
    std::sort(touched.begin(), touched.end());
    touched.erase(std::unique(touched.begin(), touched.end()), touched.end());
    job->touch("specialize", touched, corpus);
  }
  return specialize_pairs(x, pairs, cfg, seed).head;
}

struct JobOutput {
  std::size_t fold = 0;
  std::size_t seed_index = 0;
  std::uint64_t job_seed = 0;
  std::vector<RunRecord> records;  // one per variant plan
  std::optional<JobFailure> failure;
  std::vector<AccessRecord> access;
};

void write_artifacts(const std::filesystem::path& dir, const HeadF& head, const MlpF& clf,
                     const RunRecord& record) {
  std::filesystem::create_directories(dir);
  save_head(head, dir / "head.ctsh");
  save_classifier(clf, dir / "clf.ctsc");
  std::ofstream out(dir / "scores.json", std::ios::binary | std::ios::trunc);
  if (!out) throw ArgumentError("cannot write " + (dir / "scores.json").string());
  out << run_record_to_json(record) << '\n';
}

std::filesystem::path run_dir(const ExperimentConfig& cfg, const std::string& hash, std::size_t fold,
                              std::size_t seed_index) {
  return cfg.output_dir / "runs" / hash / ("fold-" + std::to_string(fold)) /
         ("seed-" + std::to_string(seed_index));
}

JobOutput run_job(const Corpus& corpus, const RowMatrixF& x, const Fold& fold_def,
                  std::size_t fold, std::size_t seed_index, const ExperimentConfig& cfg,
                  const std::vector<VariantPlan>& plans) {
  JobOutput out;
  out.fold = fold;
  out.seed_index = seed_index;
  out.job_seed = job_seed(cfg, fold, seed_index);
  std::string current = plans.empty() ? "" : plans.front().name;
  try {
    const LeakageGuard guard(corpus, fold_def.test_events);
    JobInputs job{fold, seed_index, out.job_seed, {}, &guard, &out.access};
    job.train_pool = training_pool(corpus, fold_def, cfg, out.job_seed);
    const auto split = validation_split(corpus, job.train_pool, cfg.val_ratio, derive_seed(out.job_seed, {2}));
    std::vector<std::size_t> seen = split.train;
    seen.insert(seen.end(), split.val.begin(), split.val.end());
    std::sort(seen.begin(), seen.end());
    job.touch("train", seen, corpus);

    const auto test = corpus.posts_in_events(fold_def.test_events);
    const auto y_test = labels_of(corpus, test);
    const auto test_events = events_of(corpus, test);
    const auto x_test = rows_of(x, test);
    const auto label_count = corpus.ontology().size();

    for (const auto& plan : plans) {
      current = plan.name;
      const HeadF head = plan.head(job);
      const auto trained = train_job_classifier(corpus, x, head, job.train_pool, cfg, out.job_seed);
      const auto preds = predict(trained.classifier, head.encode(x_test), cfg.classifier.threshold,
                                 cfg.classifier.argmax_fallback);
      auto scores = event_scores(preds, y_test, test_events, label_count, corpus.task_kind());
      const auto pooled = f1_scores(preds, y_test, label_count, corpus.task_kind());
      auto record = RunRecord::from_events(fold, out.job_seed, std::move(scores), pooled, cfg.std_kind);
      if (!cfg.output_dir.empty())
        write_artifacts(run_dir(cfg, plan.dir_hash, fold, seed_index), head, trained.classifier, record);
      log().info("fold {} seed {} {}: micro {:.4f} macro {:.4f}", fold, seed_index, plan.name,
                 record.micro_mean, record.macro_mean);
      out.records.push_back(std::move(record));
    }
  } catch (const Error& e) {
    out.records.clear();
    out.failure = JobFailure{current, fold, seed_index, e.kind(), e.what()};
    log().error("fold {} seed {} failed: {}", fold, seed_index, e.what());
  }
  return out;
}

struct RunSet {
  std::map<std::string, std::vector<RunRecord>> runs;
  std::vector<JobFailure> failures;
  std::vector<std::uint64_t> run_seeds;
};

RunSet run_folds(const Dataset& data, const ExperimentConfig& cfg, const std::vector<VariantPlan>& plans) {
  const RowMatrixF x = aligned_rows(data.corpus, data.embeddings);
  const FoldPlan folds = experiment_folds(data.corpus, cfg);

  std::vector<std::pair<std::size_t, std::size_t>> jobs;
  for (std::size_t f = 0; f < folds.folds.size(); ++f)
    for (std::size_t s = 0; s < cfg.seeds_per_fold(); ++s) jobs.emplace_back(f, s);

  std::vector<JobOutput> outputs(jobs.size());
  for (std::size_t start = 0; start < jobs.size(); start += cfg.jobs) {
    const auto end = std::min(jobs.size(), start + cfg.jobs);
    if (cfg.jobs == 1) {
      const auto [f, s] = jobs[start];
      outputs[start] = run_job(data.corpus, x, folds.folds[f], f, s, cfg, plans);
      continue;
    }
    std::vector<std::future<JobOutput>> wave;
    for (std::size_t k = start; k < end; ++k) {
      const auto [f, s] = jobs[k];
      wave.push_back(std::async(std::launch::async, [&, f = f, s = s] {
        return run_job(data.corpus, x, folds.folds[f], f, s, cfg, plans);
      }));
    }
    for (std::size_t k = start; k < end; ++k) outputs[k] = wave[k - start].get();
  }

  RunSet set;
  for (const auto& plan : plans) set.runs[plan.name];
  for (auto& o : outputs) {
    set.run_seeds.push_back(o.job_seed);
    if (cfg.observer)
      for (const auto& a : o.access) cfg.observer(a);
    if (o.failure) {
      set.failures.push_back(*o.failure);
      continue;
    }
    for (std::size_t v = 0; v < plans.size(); ++v) set.runs[plans[v].name].push_back(std::move(o.records[v]));
  }
  return set;
}

void fill_scores(ReportRow& row, std::span<const RunRecord> records, const ExperimentConfig& cfg) {
  if (records.empty()) return;
  const auto agg = aggregate(records, cfg.aggregate_by, cfg.std_kind, cfg.macro_mode);
  row.micro_mean = agg.micro_mean;
  row.micro_std = agg.micro_std;
  row.macro_mean = agg.macro_mean;
  row.macro_std = agg.macro_std;
}

// Sign-flip test on per-event means shared by both run sets.
std::pair<std::optional<double>, std::optional<double>> compare(std::span<const RunRecord> a,
                                                                std::span<const RunRecord> b,
                                                                const ExperimentConfig& cfg,
                                                                std::uint64_t key) {
  if (cfg.permutation_resamples == 0 || a.empty() || b.empty()) return {};
  const auto ea = mean_event_scores(a);
  const auto eb = mean_event_scores(b);
  std::vector<double> ma, mb, xa, xb;
  std::size_t j = 0;
  for (const auto& e : ea) {
    while (j < eb.size() && eb[j].event_id < e.event_id) ++j;
    if (j < eb.size() && eb[j].event_id == e.event_id) {
      ma.push_back(e.micro_f1);
      mb.push_back(eb[j].micro_f1);
      xa.push_back(e.macro_f1);
      xb.push_back(eb[j].macro_f1);
    }
  }
  if (ma.empty()) return {};
  const auto seed = derive_seed(cfg.seed, {0x7065726d, key});
  return {paired_permutation_test(ma, mb, cfg.permutation_resamples, seed),
          paired_permutation_test(xa, xb, cfg.permutation_resamples, derive_seed(seed, {1}))};
}

void mark_failures(ReportRow& row, const std::vector<JobFailure>& failures) {
  std::vector<std::size_t> folds;
  for (const auto& f : failures) folds.push_back(f.fold);
  if (folds.empty()) return;
  std::sort(folds.begin(), folds.end());
  folds.erase(std::unique(folds.begin(), folds.end()), folds.end());
  row.incomplete = true;
  std::string note = "failed folds:";
  for (const auto f : folds) note += " " + std::to_string(f);
  note += " (" + failures.front().message + ")";
  row.note = note;
}

std::vector<VariantPlan> within_plans(const Dataset& data, const RowMatrixF* x, const ExperimentConfig& cfg,
                                      const std::string& base_hash) {
  std::vector<VariantPlan> plans;
  for (const auto v : cfg.variants) {
    VariantPlan plan;
    plan.name = to_string(v);
    plan.dir_hash = short_hash(base_hash + '\x1f' + plan.name);
    if (v == Variant::se) {
      plan.head = [dim = data.embeddings.dim()](const JobInputs&) { return HeadF(dim); };
    } else {
      plan.head = [&data, x, &cfg](const JobInputs& job) {
        return specialize_on(data.corpus, *x, job.train_pool, cfg, cfg.iterations(), job.job_seed, &job);
      };
    }
    plans.push_back(std::move(plan));
  }
  return plans;
}

std::string backend_of(const Dataset& d) { return d.backend.empty() ? "unknown" : d.backend; }

}  // namespace

ExperimentResult run_within_corpus(const Dataset& data, const ExperimentConfig& cfg) {
  cfg.validate();
  const std::string base_hash =
      sha256_hex(std::string("within_corpus\x1f") + experiment_config_json(cfg) + '\x1f' + dataset_key(data));
  const RowMatrixF x = aligned_rows(data.corpus, data.embeddings);
  const auto plans = within_plans(data, &x, cfg, base_hash);
  log().info("within-corpus {} ({}), {} folds x {} seeds", data.corpus.name(), to_string(cfg.setup),
             cfg.folds, cfg.seeds_per_fold());
  auto set = run_folds(data, cfg, plans);

  ExperimentResult result;
  result.report.kind = ReportKind::within_corpus;
  result.report.provenance = {base_hash, cfg.seed, set.run_seeds, backend_of(data)};
  const bool has_reference =
      std::find(cfg.variants.begin(), cfg.variants.end(), cfg.reference) != cfg.variants.end();
  const auto& reference = set.runs[to_string(cfg.reference)];
  for (std::size_t v = 0; v < cfg.variants.size(); ++v) {
    ReportRow row;
    row.variant = to_string(cfg.variants[v]);
    row.corpus = data.corpus.name();
    row.setup = to_string(cfg.setup);
    const auto& runs = set.runs[row.variant];
    fill_scores(row, runs, cfg);
    if (has_reference && cfg.variants[v] != cfg.reference) {
      const auto [pm, pM] = compare(runs, reference, cfg, v);
      row.micro_p = pm;
      row.macro_p = pM;
    }
    mark_failures(row, set.failures);
    result.report.rows.push_back(std::move(row));
  }
  result.runs = std::move(set.runs);
  result.failures = std::move(set.failures);
  return result;
}

ExperimentResult run_cross_corpus(const Dataset& source, const Dataset& target, const ExperimentConfig& config) {
  config.validate();
  if (source.embeddings.dim() != target.embeddings.dim())
    throw IntegrityError("cross-corpus: source embeddings have dim " + std::to_string(source.embeddings.dim()) +
                         " but target has " + std::to_string(target.embeddings.dim()));
  ExperimentConfig cfg = config;
  cfg.variants = {Variant::se, Variant::se_cts};
  cfg.reference = Variant::se;
  const auto source_key = dataset_key(source);
  const auto target_key = dataset_key(target);
  const std::string base_hash = sha256_hex(std::string("cross_corpus\x1f") + experiment_config_json(cfg) +
                                           '\x1f' + source_key + '\x1f' + target_key);
  const std::string transfer = std::string(to_string(Variant::se_cts));
  const std::string baseline = std::string(to_string(Variant::se));

  RunSet set;
  std::optional<JobFailure> source_failure;
  if (source_key == target_key) {
    log().info("cross-corpus: source equals target, specializing per fold");
    auto within = run_within_corpus(target, cfg);
    set.runs = std::move(within.runs);
    set.failures = std::move(within.failures);
    set.run_seeds = within.report.provenance.run_seeds;
  } else {
    std::optional<HeadF> head;
    try {
      const RowMatrixF xs = aligned_rows(source.corpus, source.embeddings);
      std::vector<std::size_t> all(source.corpus.size());
      for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
      const auto iterations = config.pair_iterations.value_or(kHighSetupIterations);
      head = specialize_on(source.corpus, xs, all, cfg, iterations, derive_seed(cfg.seed, {0x73726365}), nullptr);
      if (!cfg.output_dir.empty()) {
        const auto dir = cfg.output_dir / "runs" / short_hash(base_hash + "\x1fsource");
        std::filesystem::create_directories(dir);
        save_head(*head, dir / "head.ctsh");
      }
    } catch (const Error& e) {
      source_failure = JobFailure{transfer, 0, 0, e.kind(), std::string("source specialization: ") + e.what()};
      log().error("cross-corpus: {}", source_failure->message);
    }
    std::vector<VariantPlan> plans;
    plans.push_back({baseline, short_hash(base_hash + '\x1f' + baseline),
                     [dim = target.embeddings.dim()](const JobInputs&) { return HeadF(dim); }});
    if (head) {
      plans.push_back({transfer, short_hash(base_hash + '\x1f' + transfer),
                       [h = *head](const JobInputs&) { return h; }});
    }
    set = run_folds(target, cfg, plans);
    set.runs[transfer];
  }

  ExperimentResult result;
  result.report.kind = ReportKind::cross_corpus;
  result.report.provenance = {base_hash, cfg.seed, set.run_seeds, backend_of(target)};
  ReportRow row;
  row.variant = transfer;
  row.source = source.corpus.name();
  row.corpus = target.corpus.name();
  row.setup = to_string(cfg.setup);
  const auto& runs = set.runs[transfer];
  const auto& base = set.runs[baseline];
  fill_scores(row, runs, cfg);
  if (!runs.empty() && !base.empty()) {
    const auto b = aggregate(base, cfg.aggregate_by, cfg.std_kind, cfg.macro_mode);
    row.delta = *row.macro_mean - b.macro_mean;
    const auto [pm, pM] = compare(runs, base, cfg, 1);
    row.micro_p = pm;
    row.macro_p = pM;
  }
  if (source_failure) {
    set.failures.insert(set.failures.begin(), *source_failure);
    row.incomplete = true;
    row.note = source_failure->message;
  } else {
    mark_failures(row, set.failures);
  }
  result.report.rows.push_back(std::move(row));
  result.runs = std::move(set.runs);
  result.failures = std::move(set.failures);
  return result;
}

ExperimentResult run_cross_lingual(std::span<const CrossLingualCondition> conditions,
                                   const ExperimentConfig& cfg, bool include_random) {
  cfg.validate();
  if (conditions.empty()) throw ArgumentError("cross-lingual: no conditions");
  std::string keys;
  for (const auto& c : conditions) keys += '\x1f' + c.name + ':' + dataset_key(c.source) + ':' + dataset_key(c.target);
  const std::string base_hash =
      sha256_hex(std::string("cross_lingual\x1f") + experiment_config_json(cfg) + keys);
  const auto seed0 = job_seed(cfg, 0, 0);

  ExperimentResult result;
  result.report.kind = ReportKind::cross_lingual;
  result.report.provenance = {base_hash, cfg.seed, {seed0}, backend_of(conditions.front().source)};

  for (const auto& cond : conditions) {
    const Corpus train_corpus = cfg.relevancy_mode == RelevancyMode::binary_classifier
                                    ? map_to_relevancy(cond.source.corpus)
                                    : cond.source.corpus;
    for (const auto v : cfg.variants) {
      const std::string name = to_string(v);
      ReportRow row;
      row.variant = name;
      row.corpus = cond.target.corpus.name();
      row.setup = cond.name;
      try {
        if (cond.source.embeddings.dim() != cond.target.embeddings.dim())
          throw IntegrityError("cross-lingual: source and target embedding dims differ in condition '" +
                               cond.name + "'");
        const RowMatrixF xs = aligned_rows(train_corpus, cond.source.embeddings);
        const RowMatrixF xt = aligned_rows(cond.target.corpus, cond.target.embeddings);
        std::vector<std::size_t> all(train_corpus.size());
        for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
        const HeadF head = v == Variant::se ? HeadF(static_cast<std::size_t>(xs.cols()))
                                            : specialize_on(train_corpus, xs, all, cfg, cfg.iterations(), seed0, nullptr);
        const auto trained = train_job_classifier(train_corpus, xs, head, all, cfg, seed0);
        const auto raw = predict(trained.classifier, head.encode(xt), cfg.classifier.threshold,
                                 cfg.classifier.argmax_fallback);

        std::vector<LabelSet> preds, golds;
        std::vector<std::string> events;
        for (std::size_t i = 0; i < cond.target.corpus.size(); ++i) {
          const auto& post = cond.target.corpus[i];
          preds.push_back({cfg.relevancy_mode == RelevancyMode::binary_classifier
                               ? (raw[i].empty() ? kIrrelevant : raw[i].front())
                               : relevancy_of(train_corpus.ontology(), raw[i])});
          golds.push_back({relevancy_of(cond.target.corpus.ontology(), post.labels)});
          events.push_back(post.event_id);
        }
        auto scores = event_scores(preds, golds, events, 2, TaskKind::multi_class);
        const auto pooled = f1_scores(preds, golds, 2, TaskKind::multi_class);
        auto record = RunRecord::from_events(0, seed0, std::move(scores), pooled, cfg.std_kind);
        if (!cfg.output_dir.empty())
          write_artifacts(run_dir(cfg, short_hash(base_hash + '\x1f' + cond.name + '\x1f' + name), 0, 0), head,
                          trained.classifier, record);
        row.micro_mean = cfg.macro_mode == MacroMode::global ? record.pooled.micro : record.micro_mean;
        row.macro_mean = cfg.macro_mode == MacroMode::global ? record.pooled.macro : record.macro_mean;
        row.micro_std = record.micro_std;
        row.macro_std = record.macro_std;
        log().info("cross-lingual {} {}: macro {:.4f}", cond.name, name, *row.macro_mean);
        result.runs[cond.name + "/" + name].push_back(std::move(record));
      } catch (const Error& e) {
        row.incomplete = true;
        row.note = e.what();
        result.failures.push_back({name, 0, 0, e.kind(), e.what()});
        log().error("cross-lingual {} {} failed: {}", cond.name, name, e.what());
      }
      result.report.rows.push_back(std::move(row));
    }
  }

  if (include_random) {
    const auto& cond = conditions.front();
    std::vector<EventScore> scores;
    std::uint64_t e = 0;
    for (const auto& [event, idx] : cond.target.corpus.events()) {
      std::vector<LabelSet> golds;
      for (const auto i : idx) golds.push_back({relevancy_of(cond.target.corpus.ontology(), cond.target.corpus[i].labels)});
      const auto f1 = random_baseline(golds, 2, derive_seed(cfg.seed, {0x726e64, e++}), TaskKind::multi_class);
      scores.push_back({event, f1.micro, f1.macro, idx.size()});
    }
    auto record = RunRecord::from_events(0, cfg.seed, std::move(scores), {}, cfg.std_kind);
    ReportRow row;
    row.variant = "Random";
    row.corpus = cond.target.corpus.name();
    row.setup = cond.name;
    row.micro_mean = record.micro_mean;
    row.macro_mean = record.macro_mean;
    row.micro_std = record.micro_std;
    row.macro_std = record.macro_std;
    result.runs[cond.name + "/Random"].push_back(std::move(record));
    result.report.rows.push_back(std::move(row));
  }
  return result;
}

}  // namespace cts
