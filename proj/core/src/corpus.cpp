#include "cts/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "cts/error.hpp"

namespace cts {

using nlohmann::json;

const char* to_string(TaskKind kind) noexcept {
  return kind == TaskKind::multi_class ? "multi_class" : "multi_label";
}

TaskKind task_kind_from_string(const std::string& s) {
  if (s == "multi_class") return TaskKind::multi_class;
  if (s == "multi_label") return TaskKind::multi_label;
  throw SchemaError("unknown task_kind '" + s + "'");
}

Ontology::Ontology(TaskKind kind, std::vector<std::string> labels,
                   std::vector<std::string> irrelevant_labels)
    : kind_(kind), labels_(std::move(labels)), irrelevant_(std::move(irrelevant_labels)) {
  std::set<std::string> seen;
  for (const auto& l : labels_) {
    if (!seen.insert(l).second) throw SchemaError("duplicate label name '" + l + "'");
  }
  for (const auto& l : irrelevant_) {
    if (!seen.contains(l))
      throw SchemaError("irrelevant label '" + l + "' is not an ontology label");
  }
}

std::optional<LabelId> Ontology::find(const std::string& name) const {
  const auto it = std::find(labels_.begin(), labels_.end(), name);
  if (it == labels_.end()) return std::nullopt;
  return static_cast<LabelId>(it - labels_.begin());
}

LabelId Ontology::index_of(const std::string& name) const {
  if (auto id = find(name)) return *id;
  throw SchemaError("unknown label '" + name + "'");
}

bool Ontology::is_irrelevant(LabelId id) const {
  return std::find(irrelevant_.begin(), irrelevant_.end(), labels_.at(id)) !=
         irrelevant_.end();
}

Ontology parse_ontology(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ParseError(1, std::string("ontology: ") + e.what());
  }
  try {
    return Ontology(task_kind_from_string(j.at("task_kind").get<std::string>()),
                    j.at("labels").get<std::vector<std::string>>(),
                    j.value("irrelevant_labels", std::vector<std::string>{}));
  } catch (const json::exception& e) {
    throw SchemaError(std::string("ontology: ") + e.what());
  }
}

Ontology load_ontology(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ArgumentError("cannot open ontology file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_ontology(ss.str());
}

std::string ontology_to_json(const Ontology& ontology) {
  json j;
  j["task_kind"] = to_string(ontology.task_kind());
  j["labels"] = ontology.labels();
  j["irrelevant_labels"] = ontology.irrelevant_labels();
  return j.dump(2);
}

namespace {

bool blank(const std::string& s) {
  return std::all_of(s.begin(), s.end(),
                     [](unsigned char c) { return std::isspace(c) != 0; });
}

void validate_post(const Post& p, const Ontology& ontology) {
  if (p.labels.empty()) throw SchemaError("post '" + p.id + "' has no labels");
  if (!std::is_sorted(p.labels.begin(), p.labels.end()) ||
      std::adjacent_find(p.labels.begin(), p.labels.end()) != p.labels.end())
    throw SchemaError("post '" + p.id + "' label set is not sorted/unique");
  if (p.labels.back() >= ontology.size())
    throw SchemaError("post '" + p.id + "' label index out of range");
  if (ontology.task_kind() == TaskKind::multi_class && p.labels.size() != 1)
    throw SchemaError("post '" + p.id + "' must have exactly one label in a multi-class corpus");
  if (blank(p.text)) throw SchemaError("post '" + p.id + "' has empty text");
}

}  // namespace

Corpus::Corpus(std::string name, Ontology ontology, std::vector<Post> posts)
    : name_(std::move(name)), ontology_(std::move(ontology)), posts_(std::move(posts)) {
  std::unordered_set<std::string> ids;
  ids.reserve(posts_.size());
  for (std::size_t i = 0; i < posts_.size(); ++i) {
    const auto& p = posts_[i];
    validate_post(p, ontology_);
    if (!ids.insert(p.id).second) throw SchemaError("duplicate post id '" + p.id + "'");
    events_[p.event_id].push_back(i);
  }
}

std::vector<std::string> Corpus::event_ids() const {
  std::vector<std::string> out;
  out.reserve(events_.size());
  for (const auto& [id, _] : events_) out.push_back(id);
  return out;
}

std::vector<std::size_t> Corpus::posts_in_events(
    std::span<const std::string> event_ids) const {
  std::vector<std::size_t> out;
  for (const auto& e : event_ids) {
    const auto it = events_.find(e);
    if (it == events_.end()) throw ArgumentError("unknown event '" + e + "'");
    out.insert(out.end(), it->second.begin(), it->second.end());
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

Corpus read_corpus(std::istream& in, const Ontology& ontology, std::string name) {
  std::vector<Post> posts;
  std::unordered_set<std::string> ids;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (blank(line)) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ParseError(lineno, e.what());
    }
    Post p;
    try {
      p.id = j.at("id").get<std::string>();
      p.event_id = j.at("event").get<std::string>();
      p.text = j.at("text").get<std::string>();
      std::set<LabelId> labels;
      for (const auto& name : j.at("labels").get<std::vector<std::string>>()) {
        const auto id = ontology.find(name);
        if (!id)
          throw SchemaError("line " + std::to_string(lineno) + ": unknown label '" +
                            name + "'");
        labels.insert(*id);
      }
      p.labels.assign(labels.begin(), labels.end());
    } catch (const json::exception& e) {
      throw ParseError(lineno, e.what());
    }
    if (!ids.insert(p.id).second)
      throw SchemaError("line " + std::to_string(lineno) + ": duplicate id '" + p.id + "'");
    try {
      validate_post(p, ontology);
    } catch (const SchemaError& e) {
      throw SchemaError("line " + std::to_string(lineno) + ": " + e.what());
    }
    posts.push_back(std::move(p));
  }
  return Corpus(std::move(name), ontology, std::move(posts));
}

Corpus load_corpus(const std::filesystem::path& path, const Ontology& ontology) {
  std::ifstream in(path);
  if (!in) throw ArgumentError("cannot open corpus file " + path.string());
  return read_corpus(in, ontology, path.stem().string());
}

void write_corpus(std::ostream& out, const Corpus& corpus) {
  const auto& names = corpus.ontology().labels();
  for (const auto& p : corpus.posts()) {
    json j;
    j["id"] = p.id;
    j["event"] = p.event_id;
    j["text"] = p.text;
    auto& labels = j["labels"] = json::array();
    for (const auto l : p.labels) labels.push_back(names[l]);
    out << j.dump() << '\n';
  }
}

void save_corpus(const std::filesystem::path& path, const Corpus& corpus) {
  std::ofstream out(path);
  if (!out) throw ArgumentError("cannot write " + path.string());
  write_corpus(out, corpus);
}

Corpus filter_labels(const Corpus& corpus, std::span<const std::string> drop) {
  const auto& ont = corpus.ontology();
  std::vector<bool> dropped(ont.size(), false);
  for (const auto& name : drop) dropped[ont.index_of(name)] = true;

  std::vector<std::string> kept_labels;
  std::vector<LabelId> remap(ont.size(), 0);
  for (LabelId i = 0; i < ont.size(); ++i) {
    if (dropped[i]) continue;
    remap[i] = static_cast<LabelId>(kept_labels.size());
    kept_labels.push_back(ont.labels()[i]);
  }
  std::vector<std::string> kept_irrelevant;
  for (const auto& name : ont.irrelevant_labels()) {
    if (!dropped[ont.index_of(name)]) kept_irrelevant.push_back(name);
  }

  std::vector<Post> posts;
  for (const auto& p : corpus.posts()) {
    LabelSet labels;
    for (const auto l : p.labels) {
      if (!dropped[l]) labels.push_back(remap[l]);
    }
    // Multi-class posts carry one label, so both task kinds reduce to this.
    if (labels.empty()) continue;
    Post q = p;
    q.labels = std::move(labels);
    posts.push_back(std::move(q));
  }
  return Corpus(corpus.name(),
                Ontology(ont.task_kind(), std::move(kept_labels), std::move(kept_irrelevant)),
                std::move(posts));
}

Corpus select_top_events(const Corpus& corpus, std::size_t k) {
  if (k == 0) throw ArgumentError("select_top_events: k must be positive");
  const auto& events = corpus.events();
  if (k > events.size())
    throw ArgumentError("select_top_events: k=" + std::to_string(k) + " exceeds " +
                        std::to_string(events.size()) + " events");
  std::vector<std::pair<std::string, std::size_t>> sizes;
  for (const auto& [id, idx] : events) sizes.emplace_back(id, idx.size());
  std::stable_sort(sizes.begin(), sizes.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  std::set<std::string> keep;
  for (std::size_t i = 0; i < k; ++i) keep.insert(sizes[i].first);

  std::vector<Post> posts;
  for (const auto& p : corpus.posts()) {
    if (keep.contains(p.event_id)) posts.push_back(p);
  }
  return Corpus(corpus.name(), corpus.ontology(), std::move(posts));
}

LabelId relevancy_of(const Ontology& ontology, const LabelSet& labels) {
  for (const auto l : labels) {
    if (!ontology.is_irrelevant(l)) return kRelevant;
  }
  return kIrrelevant;
}

Corpus map_to_relevancy(const Corpus& corpus) {
  const auto& ont = corpus.ontology();
  if (ont.irrelevant_labels().empty())
    throw ArgumentError("map_to_relevancy: ontology has no irrelevant labels");
  std::vector<Post> posts;
  posts.reserve(corpus.size());
  for (const auto& p : corpus.posts()) {
    Post q = p;
    q.labels = {relevancy_of(ont, p.labels)};
    posts.push_back(std::move(q));
  }
  return Corpus(corpus.name(),
                Ontology(TaskKind::multi_class, {"irrelevant", "relevant"}, {"irrelevant"}),
                std::move(posts));
}

}  // namespace cts
