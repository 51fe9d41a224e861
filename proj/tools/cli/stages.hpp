#pragma once

#include <filesystem>
#include <initializer_list>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "config.hpp"
#include "cts/corpus.hpp"
#include "cts/experiments.hpp"
#include "cts/report.hpp"

namespace cts::cli {

/// Skips a stage when its outputs exist and its stamp matches the hash of
/// its inputs. Stamps live in <root>/.stamps/<stage>.
class StageCache {
 public:
  StageCache(std::filesystem::path root, bool force);

  bool fresh(const std::string& stage, const std::string& key,
             const std::vector<std::filesystem::path>& outputs) const;
  void commit(const std::string& stage, const std::string& key) const;

 private:
  std::filesystem::path root_;
  bool force_;
};

struct Context {
  Settings settings;
  std::optional<std::string> embed_url;
  bool force = false;
  std::ostream* out = nullptr;
};

struct StageResult {
  std::string key;
  std::vector<std::filesystem::path> outputs;
};

StageResult stage_ingest(const Context& ctx);
StageResult stage_split(const Context& ctx);
StageResult stage_embed(const Context& ctx);
StageResult stage_pairs(const Context& ctx);
StageResult stage_specialize(const Context& ctx);
StageResult stage_train(const Context& ctx);

/// These return the process exit code (non-zero when a fold failed).
int stage_evaluate(const Context& ctx);
int stage_cross_corpus(const Context& ctx);
int stage_cross_lingual(const Context& ctx);

/// Re-render a saved report.csv (or a directory holding one).
void render_saved_report(const std::filesystem::path& input, ReportFormat format, std::ostream& out);

/// Exit code for an error kind: 1 usage, 2 data/format, 3 numeric.
int exit_code_for(ErrorKind kind) noexcept;

}  // namespace cts::cli
