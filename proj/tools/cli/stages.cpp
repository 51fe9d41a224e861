#include "stages.hpp"

#include <fstream>
#include <sstream>

#include <spdlog/spdlog.h>

#include "cts/classify.hpp"
#include "cts/encoder.hpp"
#include "cts/error.hpp"
#include "cts/hash.hpp"
#include "cts/pairgen.hpp"
#include "cts/specialize.hpp"
#include "cts/splits.hpp"

namespace cts::cli {

namespace fs = std::filesystem;

StageCache::StageCache(fs::path root, bool force) : root_(std::move(root)), force_(force) {}

bool StageCache::fresh(const std::string& stage, const std::string& key,
                       const std::vector<fs::path>& outputs) const {
  if (force_) return false;
  for (const auto& p : outputs)
    if (!fs::exists(p)) return false;
  std::ifstream in(root_ / ".stamps" / stage);
  std::string stamp;
  return in && std::getline(in, stamp) && stamp == key;
}

void StageCache::commit(const std::string& stage, const std::string& key) const {
  fs::create_directories(root_ / ".stamps");
  std::ofstream out(root_ / ".stamps" / stage, std::ios::trunc);
  out << key << '\n';
}

int exit_code_for(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::argument: return 1;
    case ErrorKind::numeric: return 3;
    default: return 2;
  }
}

namespace {

std::string key_of(std::initializer_list<std::string> parts) {
  std::string joined;
  for (const auto& p : parts) {
    joined += p;
    joined += '\x1f';
  }
  return sha256_hex(joined);
}

void require_file(const fs::path& p, const std::string& what) {
  if (p.empty()) throw ArgumentError(what + " is not set");
  if (!fs::exists(p)) throw ArgumentError(what + " not found: " + p.string());
}

void write_text(const fs::path& p, const std::string& text) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw ArgumentError("cannot write " + p.string());
  out << text;
}

std::string read_text(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw ArgumentError("cannot read " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string name_of(const CorpusSpec& spec) {
  return spec.name.empty() ? spec.corpus.stem().string() : spec.name;
}

Corpus renamed(const Corpus& c, const std::string& name) { return Corpus(name, c.ontology(), c.posts()); }

fs::path root(const Context& ctx) { return ctx.settings.output_dir; }
StageCache cache(const Context& ctx) { return StageCache(root(ctx), ctx.force); }

fs::path backend_sidecar(const fs::path& store) { return fs::path(store.string() + ".backend"); }

std::string backend_of(const fs::path& store) {
  const auto side = backend_sidecar(store);
  if (fs::exists(side)) {
    auto text = read_text(side);
    while (!text.empty() && (text.back() == '\n' || text.back() == '\r')) text.pop_back();
    return text;
  }
  return "store:" + store.filename().string();
}

std::string embed_section_key(const Context& ctx) {
  const auto& e = ctx.settings.embed;
  return e.model + "|" + std::to_string(e.dim);
}

// Embeds `corpus` into `store` through the HTTP backend, reusing the
// on-disk text cache.
void embed_into(const Context& ctx, const Corpus& corpus, const fs::path& store) {
  const auto& e = ctx.settings.embed;
  std::optional<std::string> flag = ctx.embed_url;
  if (!flag && !e.url.empty()) flag = e.url;
  HttpEncoderBackend backend(resolve_embed_url(flag), std::chrono::seconds(e.timeout_s), e.model);
  EmbedOptions options;
  options.batch_size = e.batch_size;
  options.expected_dim = e.dim;
  options.max_in_flight = e.max_in_flight;
  options.retry.attempts = e.retries;

  EmbeddingCache text_cache;
  const auto cache_path = root(ctx) / "embed-cache.ctse";
  if (fs::exists(cache_path)) text_cache.load(cache_path);
  EmbedStats stats;
  const auto matrix = embed_corpus(backend, corpus, options, text_cache, &stats);
  spdlog::info("embedded {} posts of {} ({} backend calls, {} cache hits)", corpus.size(), corpus.name(),
               stats.backend_calls, stats.cache_hits);
  fs::create_directories(root(ctx));
  text_cache.save(cache_path);
  if (store.has_parent_path()) fs::create_directories(store.parent_path());
  save_embeddings(matrix, store);
  write_text(backend_sidecar(store), backend.descriptor() + "\n");
}

struct Loaded {
  Dataset data;
  std::string key;
};

// A corpus and its embeddings, embedding through the backend when no store
// is configured.
Loaded load_dataset(const Context& ctx, const CorpusSpec& spec, const std::string& role) {
  require_file(spec.ontology, role + " ontology");
  require_file(spec.corpus, role + " corpus");
  const auto ontology = load_ontology(spec.ontology);
  Corpus corpus = renamed(load_corpus(spec.corpus, ontology), name_of(spec));
  const auto corpus_key = key_of({sha256_file_hex(spec.ontology), sha256_file_hex(spec.corpus)});

  fs::path store = spec.embeddings;
  if (store.empty()) {
    store = root(ctx) / "embeddings" / (role + ".ctse");
    const auto key = key_of({"embed", corpus_key, embed_section_key(ctx)});
    const auto stage = "embed-" + role;
    if (!cache(ctx).fresh(stage, key, {store})) {
      embed_into(ctx, corpus, store);
      cache(ctx).commit(stage, key);
    } else {
      spdlog::info("embeddings for {} are up to date", role);
    }
  } else {
    require_file(store, role + " embeddings");
  }
  auto embeddings = load_embeddings(store);
  const auto backend = backend_of(store);
  return {Dataset{std::move(corpus), std::move(embeddings), backend},
          key_of({corpus_key, sha256_file_hex(store)})};
}

fs::path ingested_corpus(const Context& ctx) { return root(ctx) / "data" / "corpus.jsonl"; }
fs::path ingested_ontology(const Context& ctx) { return root(ctx) / "data" / "ontology.json"; }

Corpus load_ingested(const Context& ctx) {
  stage_ingest(ctx);
  const auto ontology = load_ontology(ingested_ontology(ctx));
  return renamed(load_corpus(ingested_corpus(ctx), ontology), name_of(ctx.settings.data));
}

fs::path embeddings_path(const Context& ctx) {
  return ctx.settings.data.embeddings.empty() ? root(ctx) / "embeddings.ctse" : ctx.settings.data.embeddings;
}

FoldPlan load_folds(const Context& ctx) {
  const auto split = stage_split(ctx);
  return fold_plan_from_json(read_text(split.outputs.front()));
}

std::string fold_file(std::size_t f, const std::string& ext) { return "fold-" + std::to_string(f) + ext; }

std::string slug(Variant v) { return v == Variant::se ? "se" : "se-cts"; }

}  // namespace

StageResult stage_ingest(const Context& ctx) {
  const auto& d = ctx.settings.data;
  require_file(d.ontology, "data.ontology");
  require_file(d.corpus, "data.corpus");
  StageResult r;
  r.key = key_of({"ingest", ctx.settings.section_json("data"), sha256_file_hex(d.ontology),
                  sha256_file_hex(d.corpus)});
  r.outputs = {ingested_corpus(ctx), ingested_ontology(ctx)};
  if (cache(ctx).fresh("ingest", r.key, r.outputs)) {
    spdlog::debug("ingest is up to date");
    return r;
  }
  const auto ontology = load_ontology(d.ontology);
  Corpus corpus = load_corpus(d.corpus, ontology);
  if (!ctx.settings.drop_labels.empty()) corpus = filter_labels(corpus, ctx.settings.drop_labels);
  if (ctx.settings.top_events > 0) corpus = select_top_events(corpus, ctx.settings.top_events);
  fs::create_directories(ingested_corpus(ctx).parent_path());
  save_corpus(ingested_corpus(ctx), corpus);
  write_text(ingested_ontology(ctx), ontology_to_json(corpus.ontology()) + "\n");
  spdlog::info("ingested {} posts in {} events", corpus.size(), corpus.events().size());
  cache(ctx).commit("ingest", r.key);
  return r;
}

StageResult stage_split(const Context& ctx) {
  const auto ingest = stage_ingest(ctx);
  StageResult r;
  r.key = key_of({"split", ingest.key, ctx.settings.section_json("split"), std::to_string(ctx.settings.seed)});
  r.outputs = {root(ctx) / "folds.json"};
  if (cache(ctx).fresh("split", r.key, r.outputs)) return r;
  const auto corpus = load_ingested(ctx);
  const auto plan = experiment_folds(corpus, ctx.settings.experiment);
  write_text(r.outputs.front(), fold_plan_to_json(plan) + "\n");
  spdlog::info("wrote {} disjoint-event folds", plan.folds.size());
  cache(ctx).commit("split", r.key);
  return r;
}

StageResult stage_embed(const Context& ctx) {
  const auto ingest = stage_ingest(ctx);
  StageResult r;
  const auto store = embeddings_path(ctx);
  r.outputs = {store};
  if (!ctx.settings.data.embeddings.empty()) {
    require_file(store, "data.embeddings");
    r.key = sha256_file_hex(store);
    return r;
  }
  r.key = key_of({"embed", ingest.key, embed_section_key(ctx)});
  if (cache(ctx).fresh("embed", r.key, r.outputs)) {
    spdlog::info("embeddings are up to date");
  } else {
    embed_into(ctx, load_ingested(ctx), store);
    cache(ctx).commit("embed", r.key);
  }
  r.key = key_of({r.key, sha256_file_hex(store)});
  return r;
}

StageResult stage_pairs(const Context& ctx) {
  const auto split = stage_split(ctx);
  const auto& cfg = ctx.settings.experiment;
  StageResult r;
  r.key = key_of({"pairs", split.key, ctx.settings.section_json("data"), ctx.settings.section_json("pairgen"),
                  std::to_string(ctx.settings.seed)});
  for (std::size_t f = 0; f < cfg.folds; ++f) r.outputs.push_back(root(ctx) / "pairs" / fold_file(f, ".csv"));
  if (cache(ctx).fresh("pairs", r.key, r.outputs)) return r;
  const auto corpus = load_ingested(ctx);
  const auto plan = load_folds(ctx);
  fs::create_directories(root(ctx) / "pairs");
  for (std::size_t f = 0; f < plan.folds.size(); ++f) {
    const auto seed = job_seed(cfg, f, 0);
    const auto pool = training_pool(corpus, plan.folds[f], cfg, seed);
    const auto pairs = job_pairs(corpus, pool, cfg, seed);
    save_pairs_csv(r.outputs[f], pairs);
    spdlog::info("fold {}: {} positive / {} negative pairs (n={})", f, pairs.positives.size(),
                 pairs.negatives.size(), cfg.iterations());
  }
  cache(ctx).commit("pairs", r.key);
  return r;
}

StageResult stage_specialize(const Context& ctx) {
  const auto pairs = stage_pairs(ctx);
  const auto embed = stage_embed(ctx);
  const auto& cfg = ctx.settings.experiment;
  StageResult r;
  r.key = key_of({"specialize", pairs.key, embed.key, ctx.settings.section_json("cts")});
  for (std::size_t f = 0; f < cfg.folds; ++f) {
    r.outputs.push_back(root(ctx) / "heads" / fold_file(f, ".ctsh"));
    r.outputs.push_back(root(ctx) / "heads" / fold_file(f, ".loss.csv"));
  }
  if (cache(ctx).fresh("specialize", r.key, r.outputs)) return r;
  const auto corpus = load_ingested(ctx);
  const auto x = aligned_rows(corpus, load_embeddings(embeddings_path(ctx)));
  fs::create_directories(root(ctx) / "heads");
  for (std::size_t f = 0; f < cfg.folds; ++f) {
    const auto set = load_pairs_csv(pairs.outputs[f]);
    const auto result = specialize_pairs(x, set, cfg, job_seed(cfg, f, 0));
    save_head(result.head, r.outputs[2 * f]);
    std::ofstream loss(r.outputs[2 * f + 1], std::ios::trunc);
    write_loss_curve_csv(loss, result.losses);
    spdlog::info("fold {}: specialized over {} steps", f, result.losses.size());
  }
  cache(ctx).commit("specialize", r.key);
  return r;
}

StageResult stage_train(const Context& ctx) {
  const auto& cfg = ctx.settings.experiment;
  const bool needs_heads =
      std::find(cfg.variants.begin(), cfg.variants.end(), Variant::se_cts) != cfg.variants.end();
  const auto embed = stage_embed(ctx);
  const auto upstream = needs_heads ? stage_specialize(ctx).key : stage_split(ctx).key;
  StageResult r;
  r.key = key_of({"train", upstream, embed.key, ctx.settings.section_json("classifier"),
                  experiment_config_json(cfg)});
  for (std::size_t f = 0; f < cfg.folds; ++f)
    for (const auto v : cfg.variants)
      r.outputs.push_back(root(ctx) / "classifiers" / fold_file(f, "-" + slug(v) + ".ctsc"));
  if (cache(ctx).fresh("train", r.key, r.outputs)) return r;
  const auto corpus = load_ingested(ctx);
  const auto plan = load_folds(ctx);
  const auto x = aligned_rows(corpus, load_embeddings(embeddings_path(ctx)));
  fs::create_directories(root(ctx) / "classifiers");
  std::size_t k = 0;
  for (std::size_t f = 0; f < plan.folds.size(); ++f) {
    const auto seed = job_seed(cfg, f, 0);
    const auto pool = training_pool(corpus, plan.folds[f], cfg, seed);
    for (const auto v : cfg.variants) {
      const HeadF head = v == Variant::se ? HeadF(static_cast<std::size_t>(x.cols()))
                                          : load_head(root(ctx) / "heads" / fold_file(f, ".ctsh"));
      const auto trained = train_job_classifier(corpus, x, head, pool, cfg, seed);
      save_classifier(trained.classifier, r.outputs[k++]);
      spdlog::info("fold {} {}: best epoch {} (val macro F1 {:.4f})", f, to_string(v), trained.best_epoch,
                   trained.best_val_macro_f1);
    }
  }
  cache(ctx).commit("train", r.key);
  return r;
}

namespace {

int finish(const Context& ctx, const std::string& stage, const std::string& key, const fs::path& dir,
           const ExperimentResult& result) {
  write_report_files(result.report, dir);
  if (ctx.out) *ctx.out << render_report(result.report, ReportFormat::text);
  if (!result.failures.empty()) {
    spdlog::warn("{} job(s) failed; the report is marked incomplete", result.failures.size());
    return exit_code_for(result.failures.front().kind);
  }
  cache(ctx).commit(stage, key);
  return 0;
}

bool replay(const Context& ctx, const std::string& stage, const std::string& key, const fs::path& dir) {
  const std::vector<fs::path> outputs{dir / "report.md", dir / "report.csv", dir / "report.txt"};
  if (!cache(ctx).fresh(stage, key, outputs)) return false;
  spdlog::info("{} is up to date; showing the saved report", stage);
  if (ctx.out) *ctx.out << read_text(dir / "report.txt");
  return true;
}

}  // namespace

int stage_evaluate(const Context& ctx) {
  const auto ingest = stage_ingest(ctx);
  const auto embed = stage_embed(ctx);
  const auto key = key_of({"evaluate", ingest.key, embed.key, experiment_config_json(ctx.settings.experiment)});
  if (replay(ctx, "evaluate", key, root(ctx))) return 0;
  Dataset data{load_ingested(ctx), load_embeddings(embeddings_path(ctx)), backend_of(embeddings_path(ctx))};
  const auto result = run_within_corpus(data, ctx.settings.experiment);
  return finish(ctx, "evaluate", key, root(ctx), result);
}

int stage_cross_corpus(const Context& ctx) {
  const auto ingest = stage_ingest(ctx);
  const auto embed = stage_embed(ctx);
  const auto source = load_dataset(ctx, ctx.settings.cross_source, "cross-source");
  const auto dir = root(ctx) / "cross-corpus";
  const auto key = key_of({"cross-corpus", ingest.key, embed.key, source.key,
                           experiment_config_json(ctx.settings.experiment)});
  if (replay(ctx, "cross-corpus", key, dir)) return 0;
  Dataset target{load_ingested(ctx), load_embeddings(embeddings_path(ctx)), backend_of(embeddings_path(ctx))};
  ExperimentConfig cfg = ctx.settings.experiment;
  cfg.output_dir = dir;
  const auto result = run_cross_corpus(source.data, target, cfg);
  return finish(ctx, "cross-corpus", key, dir, result);
}

int stage_cross_lingual(const Context& ctx) {
  const auto& s = ctx.settings;
  if (s.lingual_conditions.empty()) throw ArgumentError("cross_lingual.conditions is empty");
  std::vector<CrossLingualCondition> conditions;
  std::string keys;
  for (const auto& cond : s.lingual_conditions) {
    if (cond == "native") {
      auto src = load_dataset(ctx, s.lingual_source, "lingual-source");
      auto tgt = load_dataset(ctx, s.lingual_target, "lingual-target");
      keys += src.key + tgt.key;
      conditions.push_back({s.native_name, std::move(src.data), std::move(tgt.data)});
    } else {
      if (s.lingual_translated.corpus.empty() || !fs::exists(s.lingual_translated.corpus))
        throw ArgumentError("the translated condition needs cross_lingual.translated_corpus" +
                            (s.lingual_translated.corpus.empty()
                                 ? std::string(" to be set")
                                 : std::string(": file not found: ") + s.lingual_translated.corpus.string()));
      CorpusSpec src_spec = s.lingual_source;
      src_spec.embeddings = s.lingual_source_translated_embeddings;
      auto src = load_dataset(ctx, src_spec, "lingual-source-translated");
      auto tgt = load_dataset(ctx, s.lingual_translated, "lingual-translated");
      keys += src.key + tgt.key;
      conditions.push_back({s.translated_name, std::move(src.data), std::move(tgt.data)});
    }
  }
  const auto dir = root(ctx) / "cross-lingual";
  const auto key = key_of({"cross-lingual", keys, s.section_json("cross_lingual"), experiment_config_json(s.experiment)});
  if (replay(ctx, "cross-lingual", key, dir)) return 0;
  ExperimentConfig cfg = s.experiment;
  cfg.output_dir = dir;
  const auto result = run_cross_lingual(conditions, cfg, s.include_random);
  return finish(ctx, "cross-lingual", key, dir, result);
}

void render_saved_report(const fs::path& input, ReportFormat format, std::ostream& out) {
  const auto path = fs::is_directory(input) ? input / "report.csv" : input;
  require_file(path, "report");
  out << render_report(parse_report_csv(read_text(path)), format);
}

}  // namespace cts::cli
