#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace cts {

enum class ReportKind { within_corpus, cross_corpus, cross_lingual };

const char* to_string(ReportKind kind) noexcept;
ReportKind report_kind_from_string(const std::string& s);

/// One result line. Scores are fractions in [0, 1]; rendering shows x100.
/// `setup` is the data setup (Low/High) or, for cross-lingual reports, the
/// evaluation condition (e.g. "de", "de->en"). `source` names the corpus the
/// encoder was specialized on when it differs from `corpus`.
struct ReportRow {
  std::string variant;
  std::string source;
  std::string corpus;
  std::string setup;
  std::optional<double> micro_mean;
  std::optional<double> micro_std;
  std::optional<double> macro_mean;
  std::optional<double> macro_std;
  std::optional<double> micro_p;
  std::optional<double> macro_p;
  /// Macro-F1 difference to the comparison baseline (cross-corpus).
  std::optional<double> delta;
  bool incomplete = false;
  std::string note;

  friend bool operator==(const ReportRow&, const ReportRow&) = default;
};

struct Provenance {
  std::string config_hash;
  std::uint64_t seed = 0;
  std::vector<std::uint64_t> run_seeds;
  std::string backend;

  friend bool operator==(const Provenance&, const Provenance&) = default;
};

struct Report {
  ReportKind kind = ReportKind::within_corpus;
  std::vector<ReportRow> rows;
  Provenance provenance;

  friend bool operator==(const Report&, const Report&) = default;
};

enum class ReportFormat { text, markdown, csv };

ReportFormat report_format_from_string(const std::string& s);
const char* file_extension(ReportFormat format) noexcept;

/// "56.6 (4.9)" from (0.566, 0.049); "42.2" without a std; a trailing "*"
/// when p < 0.05.
std::string format_score(double mean, std::optional<double> std = std::nullopt,
                         std::optional<double> p = std::nullopt);

/// "(3.6↑)", "(1.0↓)", or "(0.0)" when the rounded change is zero.
std::string format_delta(double delta);

std::string render_report(const Report& report, ReportFormat format);

/// Inverse of the csv rendering (numbers are written with 17 significant
/// digits, so they round-trip exactly).
Report parse_report_csv(const std::string& text);

/// report.{md,csv,txt} in `dir`.
void write_report_files(const Report& report, const std::filesystem::path& dir);

}  // namespace cts
