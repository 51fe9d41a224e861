#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cts/experiments.hpp"

namespace cts::cli {

/// Built-in defaults; also the schema every config file and override is
/// checked against.
extern const char* const kDefaultConfig;

struct CorpusSpec {
  std::filesystem::path corpus;
  std::filesystem::path ontology;
  std::string name;
  /// Existing embedding store; empty means embed through the backend.
  std::filesystem::path embeddings;
};

struct EmbedSettings {
  std::string url;
  std::string model;
  std::size_t batch_size = 32;
  std::size_t dim = 768;
  std::size_t max_in_flight = 1;
  int retries = 3;
  int timeout_s = 60;
};

struct Settings {
  std::uint64_t seed = 0;
  std::filesystem::path output_dir;
  std::size_t jobs = 1;

  CorpusSpec data;
  std::vector<std::string> drop_labels;
  std::size_t top_events = 0;

  EmbedSettings embed;
  ExperimentConfig experiment;

  CorpusSpec cross_source;

  CorpusSpec lingual_source;
  CorpusSpec lingual_target;
  CorpusSpec lingual_translated;
  /// Source embeddings paired with the translated target (monolingual backend).
  std::filesystem::path lingual_source_translated_embeddings;
  std::vector<std::string> lingual_conditions;
  std::string native_name;
  std::string translated_name;
  bool include_random = true;

  /// Canonical JSON of one top-level table of the merged configuration
  /// ("" for the whole document).
  std::string section_json(const std::string& table) const;

  nlohmann::json merged;
};

/// Defaults, then `path` (when given), then `overrides` ("a.b=value").
/// Unknown keys and type mismatches raise ArgumentError; a missing file
/// raises ArgumentError naming it. Relative paths in the file resolve
/// against the file's directory.
Settings load_settings(const std::optional<std::filesystem::path>& path,
                       const std::vector<std::string>& overrides);

}  // namespace cts::cli
