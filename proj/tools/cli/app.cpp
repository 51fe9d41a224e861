#include "app.hpp"

#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "config.hpp"
#include "cts/error.hpp"
#include "cts/logging.hpp"
#include "stages.hpp"

namespace cts::cli {

namespace {

void setup_logging(int verbosity, bool quiet) {
  auto logger = spdlog::get("cts-cli");
  if (!logger) {
    logger = spdlog::stderr_color_mt("cts-cli");
    logger->set_pattern("[%H:%M:%S.%e] [%^%l%$] %v");
  }
  spdlog::set_default_logger(logger);
  spdlog::level::level_enum level = spdlog::level::info;
  LogLevel lib = LogLevel::info;
  if (quiet) {
    level = spdlog::level::warn;
    lib = LogLevel::warn;
  } else if (verbosity == 1) {
    level = spdlog::level::debug;
    lib = LogLevel::debug;
  } else if (verbosity >= 2) {
    level = spdlog::level::trace;
    lib = LogLevel::trace;
  }
  logger->set_level(level);
  set_log_level(lib);
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Contrastive task-specialization pipeline for crisis-post classification", "cts"};
  app.require_subcommand(1);

  std::optional<std::string> config_path;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> jobs;
  std::optional<std::string> embed_url;
  int verbosity = 0;
  bool quiet = false;
  bool force = false;

  app.add_option("-c,--config", config_path, "TOML configuration file");
  app.add_option("--set", overrides, "Override a config key, e.g. --set pairgen.n=5 (repeatable)")
      ->allow_extra_args(false);
  app.add_option("--seed", seed, "Master seed (overrides `seed`)");
  app.add_option("-j,--jobs", jobs, "Parallel fold jobs (overrides `jobs`)");
  app.add_option("--embed-url", embed_url, "Embedding service URL (else embed.url, else $CTS_EMBED_URL)");
  app.add_flag("-v,--verbose", verbosity, "More logging (repeat for trace)");
  app.add_flag("-q,--quiet", quiet, "Only warnings and errors");
  app.add_flag("--force", force, "Rerun stages even when their outputs are up to date");

  struct Sub {
    const char* name;
    const char* help;
  };
  const std::vector<Sub> subs = {
      {"ingest", "Validate and filter the corpus into the output directory"},
      {"split", "Write the disjoint-event fold plan"},
      {"embed", "Embed the corpus through the embedding service"},
      {"pairs", "Generate contrastive sentence pairs per fold"},
      {"specialize", "Train the specialization head per fold"},
      {"train", "Train the classifier per fold and variant"},
      {"evaluate", "Run the within-corpus experiment and write reports"},
      {"cross-corpus", "Specialize on a source corpus, evaluate on the configured corpus"},
      {"cross-lingual", "Score relevancy on a target-language corpus"},
      {"report", "Render a saved report"},
  };
  for (const auto& s : subs) app.add_subcommand(s.name, s.help)->fallthrough();

  std::string report_input;
  std::string report_format = "text";
  auto* report_cmd = app.get_subcommand("report");
  report_cmd->add_option("-i,--input", report_input, "report.csv or the directory holding it");
  report_cmd->add_option("-f,--format", report_format, "text, markdown or csv");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return 1;
  }

  setup_logging(verbosity, quiet);
  try {
    if (seed) overrides.push_back("seed=" + std::to_string(*seed));
    if (jobs) overrides.push_back("jobs=" + std::to_string(*jobs));
    std::optional<std::filesystem::path> path;
    if (config_path) path = *config_path;

    if (report_cmd->parsed()) {
      std::filesystem::path input = report_input;
      if (input.empty()) input = load_settings(path, overrides).output_dir;
      render_saved_report(input, report_format_from_string(report_format), out);
      return 0;
    }

    Context ctx{load_settings(path, overrides), embed_url, force, &out};
    const std::string name = app.get_subcommands().front()->get_name();
    if (name == "ingest") stage_ingest(ctx);
    else if (name == "split") stage_split(ctx);
    else if (name == "embed") stage_embed(ctx);
    else if (name == "pairs") stage_pairs(ctx);
    else if (name == "specialize") stage_specialize(ctx);
    else if (name == "train") stage_train(ctx);
    else if (name == "evaluate") return stage_evaluate(ctx);
    else if (name == "cross-corpus") return stage_cross_corpus(ctx);
    else if (name == "cross-lingual") return stage_cross_lingual(ctx);
    return 0;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return exit_code_for(e.kind());
  } catch (const std::filesystem::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  }
}

}  // namespace cts::cli
