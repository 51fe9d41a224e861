#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace cts {

using LabelId = std::uint32_t;
/// Sorted, duplicate-free set of ontology label indices.
using LabelSet = std::vector<LabelId>;

enum class TaskKind { multi_class, multi_label };

const char* to_string(TaskKind kind) noexcept;
TaskKind task_kind_from_string(const std::string& s);

/// Label inventory of a corpus. `irrelevant_labels` name the classes that
/// collapse to "irrelevant" under relevancy mapping (e.g. "Not Related").
class Ontology {
 public:
  Ontology() = default;
  Ontology(TaskKind kind, std::vector<std::string> labels,
           std::vector<std::string> irrelevant_labels = {});

  TaskKind task_kind() const noexcept { return kind_; }
  const std::vector<std::string>& labels() const noexcept { return labels_; }
  const std::vector<std::string>& irrelevant_labels() const noexcept {
    return irrelevant_;
  }
  std::size_t size() const noexcept { return labels_.size(); }

  std::optional<LabelId> find(const std::string& name) const;
  /// Throws SchemaError for unknown names.
  LabelId index_of(const std::string& name) const;
  bool is_irrelevant(LabelId id) const;

  friend bool operator==(const Ontology&, const Ontology&) = default;

 private:
  TaskKind kind_ = TaskKind::multi_class;
  std::vector<std::string> labels_;
  std::vector<std::string> irrelevant_;
};

Ontology load_ontology(const std::filesystem::path& path);
Ontology parse_ontology(const std::string& json_text);
std::string ontology_to_json(const Ontology& ontology);

struct Post {
  std::string id;
  std::string event_id;
  std::string text;
  LabelSet labels;

  friend bool operator==(const Post&, const Post&) = default;
};

/// Immutable collection of posts grouped by event. Safe to share read-only.
class Corpus {
 public:
  /// Validates every Post invariant against `ontology`; throws SchemaError.
  Corpus(std::string name, Ontology ontology, std::vector<Post> posts);

  const std::string& name() const noexcept { return name_; }
  const Ontology& ontology() const noexcept { return ontology_; }
  TaskKind task_kind() const noexcept { return ontology_.task_kind(); }
  const std::vector<Post>& posts() const noexcept { return posts_; }
  std::size_t size() const noexcept { return posts_.size(); }
  const Post& operator[](std::size_t i) const { return posts_[i]; }

  /// event id -> post indices (ascending), ordered by event id.
  const std::map<std::string, std::vector<std::size_t>>& events() const noexcept {
    return events_;
  }
  std::vector<std::string> event_ids() const;

  /// Indices of all posts belonging to any of `event_ids` (ascending).
  std::vector<std::size_t> posts_in_events(std::span<const std::string> event_ids) const;

 private:
  std::string name_;
  Ontology ontology_;
  std::vector<Post> posts_;
  std::map<std::string, std::vector<std::size_t>> events_;
};

/// JSONL: one object per line with keys id, event, text, labels (names).
/// Blank lines are skipped; errors carry the 1-based line number.
Corpus load_corpus(const std::filesystem::path& path, const Ontology& ontology);
Corpus read_corpus(std::istream& in, const Ontology& ontology, std::string name);
void write_corpus(std::ostream& out, const Corpus& corpus);
void save_corpus(const std::filesystem::path& path, const Corpus& corpus);

/// Multi-class: drop posts whose label is in `drop`. Multi-label: remove the
/// dropped labels from each set and drop posts left empty. The returned
/// ontology no longer contains the dropped labels.
Corpus filter_labels(const Corpus& corpus, std::span<const std::string> drop);

/// Keep the k events with the most posts; ties go to the smaller event id.
Corpus select_top_events(const Corpus& corpus, std::size_t k);

/// Collapse to the binary ontology {irrelevant, relevant}. A post is
/// irrelevant iff all of its labels are irrelevant labels.
Corpus map_to_relevancy(const Corpus& corpus);

/// Relevancy of a single label set under `ontology` (0 irrelevant, 1 relevant).
LabelId relevancy_of(const Ontology& ontology, const LabelSet& labels);

inline constexpr LabelId kIrrelevant = 0;
inline constexpr LabelId kRelevant = 1;

}  // namespace cts
