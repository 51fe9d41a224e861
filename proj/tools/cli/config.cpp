#include "config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#define TOML_EXCEPTIONS 1
#include <toml.hpp>

#include "cts/error.hpp"

namespace cts::cli {

const char* const kDefaultConfig = R"toml(
seed = 0
output_dir = "cts-out"
jobs = 1

[data]
corpus = ""
ontology = ""
name = ""
embeddings = ""
drop_labels = []
top_events = 0
setup = "High"
low_quota = 10
val_ratio = 0.1

[embed]
url = ""
model = ""
batch_size = 32
dim = 768
max_in_flight = 1
retries = 3
timeout_s = 60

[split]
folds = 5

[pairgen]
n = 0
dedup = false

[cts]
margin = 0.5
epochs = 3
batch_pairs = 64
lr = 2e-5
weight_decay = 0.01
warmup_ratio = 0.05

[classifier]
epochs = 30
lr = 1e-3
weight_decay = 0.01
batch = 32
dropout = 0.4
hidden = 512
threshold = 0.3
argmax_fallback = false

[experiment]
variants = ["SE", "SE+CTS"]
reference = "SE"
low_seeds = 3
permutation_resamples = 10000
aggregate_by = "folds"
std = "population"
macro = "per_event"

[cross_corpus]
source_corpus = ""
source_ontology = ""
source_name = ""
source_embeddings = ""

[cross_lingual]
source_corpus = ""
source_ontology = ""
source_name = ""
source_embeddings = ""
target_corpus = ""
target_ontology = ""
target_name = ""
target_embeddings = ""
translated_corpus = ""
translated_embeddings = ""
source_translated_embeddings = ""
conditions = ["native", "translated"]
native_name = "de"
translated_name = "de->en"
relevancy_mode = "map_predictions"
include_random = true
)toml";

namespace {

const std::set<std::string> kPathKeys = {
    "output_dir",
    "data.corpus",
    "data.ontology",
    "data.embeddings",
    "cross_corpus.source_corpus",
    "cross_corpus.source_ontology",
    "cross_corpus.source_embeddings",
    "cross_lingual.source_corpus",
    "cross_lingual.source_ontology",
    "cross_lingual.source_embeddings",
    "cross_lingual.target_corpus",
    "cross_lingual.target_ontology",
    "cross_lingual.target_embeddings",
    "cross_lingual.translated_corpus",
    "cross_lingual.translated_embeddings",
    "cross_lingual.source_translated_embeddings",
};

std::string type_name(const toml::node& n) {
  std::ostringstream out;
  out << n.type();
  return out.str();
}

// Copies `value` over `target` after checking it against the default's type.
void assign(toml::table& parent, const std::string& key, const toml::node& value,
            const std::string& dotted, const std::filesystem::path& base) {
  toml::node* current = parent.get(key);
  if (!current) throw ArgumentError("unknown config key '" + dotted + "'");
  if (current->is_table()) {
    if (!value.is_table()) throw ArgumentError("config key '" + dotted + "' must be a table");
    for (const auto& [k, v] : *value.as_table()) {
      const std::string sub(k.str());
      assign(*current->as_table(), sub, v, dotted + "." + sub, base);
    }
    return;
  }
  if (current->is_floating_point() && value.is_integer()) {
    parent.insert_or_assign(key, static_cast<double>(value.as_integer()->get()));
    return;
  }
  if (current->type() != value.type())
    throw ArgumentError("config key '" + dotted + "' expects " + type_name(*current) + ", got " +
                        type_name(value));
  if (const auto* arr = value.as_array()) {
    for (const auto& item : *arr)
      if (!item.is_string()) throw ArgumentError("config key '" + dotted + "' expects strings");
  }
  if (value.is_string() && kPathKeys.contains(dotted)) {
    std::filesystem::path p(value.as_string()->get());
    if (!p.empty() && p.is_relative() && !base.empty()) p = base / p;
    parent.insert_or_assign(key, p.lexically_normal().string());
    return;
  }
  parent.insert_or_assign(key, value);
}

void apply_override(toml::table& root, const std::string& text) {
  const auto eq = text.find('=');
  if (eq == std::string::npos || eq == 0)
    throw ArgumentError("override '" + text + "' is not of the form key=value");
  const std::string dotted = text.substr(0, eq);
  const std::string raw = text.substr(eq + 1);

  toml::table* parent = &root;
  std::string key = dotted;
  for (auto dot = key.find('.'); dot != std::string::npos; dot = key.find('.')) {
    const std::string head = key.substr(0, dot);
    auto* next = parent->get(head);
    if (!next || !next->is_table()) throw ArgumentError("unknown config key '" + dotted + "'");
    parent = next->as_table();
    key = key.substr(dot + 1);
  }
  const toml::node* current = parent->get(key);
  if (!current || current->is_table()) throw ArgumentError("unknown config key '" + dotted + "'");

  toml::table parsed;
  try {
    parsed = toml::parse("v = " + raw);
  } catch (const toml::parse_error&) {
    if (!current->is_string()) throw ArgumentError("cannot parse value of override '" + text + "'");
    parsed.insert_or_assign("v", raw);
  }
  const toml::node* value = parsed.get("v");
  // Bare words for string keys: `--set data.setup=Low`.
  if (current->is_string() && !value->is_string()) {
    parsed.insert_or_assign("v", raw);
    value = parsed.get("v");
  }
  assign(*parent, key, *value, dotted, {});
}

nlohmann::json to_json(const toml::node& n) {
  if (const auto* t = n.as_table()) {
    nlohmann::json j = nlohmann::json::object();
    for (const auto& [k, v] : *t) j[std::string(k.str())] = to_json(v);
    return j;
  }
  if (const auto* a = n.as_array()) {
    nlohmann::json j = nlohmann::json::array();
    for (const auto& v : *a) j.push_back(to_json(v));
    return j;
  }
  if (const auto* s = n.as_string()) return s->get();
  if (const auto* i = n.as_integer()) return i->get();
  if (const auto* f = n.as_floating_point()) return f->get();
  if (const auto* b = n.as_boolean()) return b->get();
  throw ArgumentError("unsupported config value type");
}

std::size_t as_size(const nlohmann::json& j, const std::string& key) {
  const auto v = j.get<std::int64_t>();
  if (v < 0) throw ArgumentError("config key '" + key + "' must be non-negative");
  return static_cast<std::size_t>(v);
}

std::vector<std::string> strings(const nlohmann::json& j) { return j.get<std::vector<std::string>>(); }

CorpusSpec spec(const nlohmann::json& t, const std::string& prefix) {
  CorpusSpec s;
  s.corpus = t.at(prefix + "corpus").get<std::string>();
  s.ontology = t.at(prefix + "ontology").get<std::string>();
  s.name = t.at(prefix + "name").get<std::string>();
  s.embeddings = t.at(prefix + "embeddings").get<std::string>();
  return s;
}

}  // namespace

std::string Settings::section_json(const std::string& table) const {
  if (table.empty()) return merged.dump();
  return merged.at(table).dump();
}

Settings load_settings(const std::optional<std::filesystem::path>& path,
                       const std::vector<std::string>& overrides) {
  toml::table root = toml::parse(kDefaultConfig);
  if (path) {
    if (!std::filesystem::exists(*path))
      throw ArgumentError("config file not found: " + path->string());
    toml::table file;
    try {
      file = toml::parse_file(path->string());
    } catch (const toml::parse_error& e) {
      std::ostringstream msg;
      msg << path->string() << ":" << e.source().begin.line << ": " << e.description();
      throw ArgumentError(msg.str());
    }
    const auto base = path->parent_path();
    for (const auto& [k, v] : file) {
      const std::string key(k.str());
      assign(root, key, v, key, base);
    }
  }
  for (const auto& o : overrides) apply_override(root, o);

  Settings s;
  s.merged = to_json(root);
  const auto& j = s.merged;
  try {
    s.seed = static_cast<std::uint64_t>(j.at("seed").get<std::int64_t>());
    s.output_dir = j.at("output_dir").get<std::string>();
    s.jobs = as_size(j.at("jobs"), "jobs");

    const auto& d = j.at("data");
    s.data = spec(d, "");
    s.drop_labels = strings(d.at("drop_labels"));
    s.top_events = as_size(d.at("top_events"), "data.top_events");

    const auto& e = j.at("embed");
    s.embed.url = e.at("url").get<std::string>();
    s.embed.model = e.at("model").get<std::string>();
    s.embed.batch_size = as_size(e.at("batch_size"), "embed.batch_size");
    s.embed.dim = as_size(e.at("dim"), "embed.dim");
    s.embed.max_in_flight = as_size(e.at("max_in_flight"), "embed.max_in_flight");
    s.embed.retries = static_cast<int>(e.at("retries").get<std::int64_t>());
    s.embed.timeout_s = static_cast<int>(e.at("timeout_s").get<std::int64_t>());

    auto& x = s.experiment;
    x.setup = data_setup_from_string(d.at("setup").get<std::string>());
    x.low_quota = as_size(d.at("low_quota"), "data.low_quota");
    x.val_ratio = d.at("val_ratio").get<double>();
    x.folds = as_size(j.at("split").at("folds"), "split.folds");
    const auto n = as_size(j.at("pairgen").at("n"), "pairgen.n");
    if (n > 0) x.pair_iterations = n;
    x.dedup_pairs = j.at("pairgen").at("dedup").get<bool>();

    const auto& c = j.at("cts");
    x.cts.margin = c.at("margin").get<double>();
    x.cts.epochs = as_size(c.at("epochs"), "cts.epochs");
    x.cts.batch_pairs = as_size(c.at("batch_pairs"), "cts.batch_pairs");
    x.cts.lr = c.at("lr").get<double>();
    x.cts.weight_decay = c.at("weight_decay").get<double>();
    x.cts.warmup_ratio = c.at("warmup_ratio").get<double>();

    const auto& k = j.at("classifier");
    x.classifier.epochs = as_size(k.at("epochs"), "classifier.epochs");
    x.classifier.lr = k.at("lr").get<double>();
    x.classifier.weight_decay = k.at("weight_decay").get<double>();
    x.classifier.batch = as_size(k.at("batch"), "classifier.batch");
    x.classifier.dropout = k.at("dropout").get<double>();
    x.classifier.hidden = as_size(k.at("hidden"), "classifier.hidden");
    x.classifier.threshold = k.at("threshold").get<double>();
    x.classifier.argmax_fallback = k.at("argmax_fallback").get<bool>();

    const auto& ex = j.at("experiment");
    x.variants.clear();
    for (const auto& v : strings(ex.at("variants"))) x.variants.push_back(variant_from_string(v));
    x.reference = variant_from_string(ex.at("reference").get<std::string>());
    x.low_seeds = as_size(ex.at("low_seeds"), "experiment.low_seeds");
    x.permutation_resamples = as_size(ex.at("permutation_resamples"), "experiment.permutation_resamples");
    const auto agg = ex.at("aggregate_by").get<std::string>();
    if (agg != "folds" && agg != "seeds") throw ArgumentError("experiment.aggregate_by must be folds or seeds");
    x.aggregate_by = agg == "folds" ? AggregateBy::folds : AggregateBy::seeds;
    const auto sd = ex.at("std").get<std::string>();
    if (sd != "population" && sd != "sample") throw ArgumentError("experiment.std must be population or sample");
    x.std_kind = sd == "population" ? StdKind::population : StdKind::sample;
    const auto macro = ex.at("macro").get<std::string>();
    if (macro != "per_event" && macro != "global") throw ArgumentError("experiment.macro must be per_event or global");
    x.macro_mode = macro == "per_event" ? MacroMode::per_event : MacroMode::global;

    const auto& cc = j.at("cross_corpus");
    s.cross_source = spec(cc, "source_");

    const auto& cl = j.at("cross_lingual");
    s.lingual_source = spec(cl, "source_");
    s.lingual_target = spec(cl, "target_");
    s.lingual_translated.corpus = cl.at("translated_corpus").get<std::string>();
    s.lingual_translated.ontology = s.lingual_target.ontology;
    s.lingual_translated.name = s.lingual_target.name;
    s.lingual_translated.embeddings = cl.at("translated_embeddings").get<std::string>();
    s.lingual_source_translated_embeddings = cl.at("source_translated_embeddings").get<std::string>();
    s.lingual_conditions = strings(cl.at("conditions"));
    for (const auto& cond : s.lingual_conditions)
      if (cond != "native" && cond != "translated")
        throw ArgumentError("cross_lingual.conditions entries must be native or translated");
    s.native_name = cl.at("native_name").get<std::string>();
    s.translated_name = cl.at("translated_name").get<std::string>();
    x.relevancy_mode = relevancy_mode_from_string(cl.at("relevancy_mode").get<std::string>());
    s.include_random = cl.at("include_random").get<bool>();
  } catch (const nlohmann::json::exception& e) {
    throw ArgumentError(std::string("config: ") + e.what());
  }

  s.experiment.seed = s.seed;
  s.experiment.jobs = s.jobs;
  s.experiment.output_dir = s.output_dir;
  s.experiment.validate();
  return s;
}

}  // namespace cts::cli
