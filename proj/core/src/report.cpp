#include "cts/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "cts/error.hpp"
#include "cts/metrics.hpp"

namespace cts {

const char* to_string(ReportKind kind) noexcept {
  switch (kind) {
    case ReportKind::within_corpus: return "within_corpus";
    case ReportKind::cross_corpus: return "cross_corpus";
    case ReportKind::cross_lingual: return "cross_lingual";
  }
  return "within_corpus";
}

ReportKind report_kind_from_string(const std::string& s) {
  if (s == "within_corpus") return ReportKind::within_corpus;
  if (s == "cross_corpus") return ReportKind::cross_corpus;
  if (s == "cross_lingual") return ReportKind::cross_lingual;
  throw SchemaError("unknown report kind '" + s + "'");
}

ReportFormat report_format_from_string(const std::string& s) {
  if (s == "text" || s == "txt") return ReportFormat::text;
  if (s == "markdown" || s == "md") return ReportFormat::markdown;
  if (s == "csv") return ReportFormat::csv;
  throw ArgumentError("unknown report format '" + s + "' (expected text, markdown or csv)");
}

const char* file_extension(ReportFormat format) noexcept {
  switch (format) {
    case ReportFormat::text: return "txt";
    case ReportFormat::markdown: return "md";
    case ReportFormat::csv: return "csv";
  }
  return "txt";
}

namespace {

std::string one_decimal(double fraction) {
  char buf[32];
  double v = std::round(fraction * 1000.0) / 10.0;
  if (v == 0.0) v = 0.0;  // no "-0.0"
  std::snprintf(buf, sizeof buf, "%.1f", v);
  return buf;
}

}  // namespace

std::string format_score(double mean, std::optional<double> std, std::optional<double> p) {
  std::string out = one_decimal(mean);
  if (std) out += " (" + one_decimal(*std) + ")";
  if (p && *p < kSignificanceLevel) out += "*";
  return out;
}

std::string format_delta(double delta) {
  const std::string mag = one_decimal(std::abs(delta));
  if (mag == "0.0") return "(0.0)";
  return "(" + mag + (delta > 0 ? "↑" : "↓") + ")";
}

namespace {

std::size_t display_width(const std::string& s) {
  return static_cast<std::size_t>(std::count_if(
      s.begin(), s.end(), [](char c) { return (static_cast<unsigned char>(c) & 0xC0) != 0x80; }));
}

using Table = std::vector<std::vector<std::string>>;

std::string render_table(const Table& table, ReportFormat format) {
  std::ostringstream out;
  if (table.empty()) return {};
  const auto cols = table.front().size();
  if (format == ReportFormat::markdown) {
    for (std::size_t r = 0; r < table.size(); ++r) {
      out << '|';
      for (const auto& cell : table[r]) out << ' ' << cell << " |";
      out << '\n';
      if (r == 0) {
        out << '|';
        for (std::size_t c = 0; c < cols; ++c) out << (c == 0 ? " --- |" : " ---: |");
        out << '\n';
      }
    }
    return out.str();
  }
  std::vector<std::size_t> width(cols, 0);
  for (const auto& row : table)
    for (std::size_t c = 0; c < cols; ++c) width[c] = std::max(width[c], display_width(row[c]));
  for (std::size_t r = 0; r < table.size(); ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      const auto pad = width[c] - display_width(table[r][c]);
      if (c == 0) out << table[r][c] << std::string(pad, ' ');
      else out << "  " << std::string(pad, ' ') << table[r][c];
    }
    out << '\n';
    if (r == 0) {
      std::size_t total = 0;
      for (const auto w : width) total += w;
      out << std::string(total + 2 * (cols - 1), '-') << '\n';
    }
  }
  return out.str();
}

std::string cell(const std::optional<double>& mean, const std::optional<double>& std,
                 const std::optional<double>& p) {
  return mean ? format_score(*mean, std, p) : "-";
}

std::string row_label(const ReportRow& row) {
  return row.incomplete ? row.variant + " (incomplete)" : row.variant;
}

Table within_table(const Report& report) {
  Table t{{"Variant", "Corpus", "Setup", "Micro F1", "Macro F1"}};
  for (const auto& r : report.rows) {
    t.push_back({row_label(r), r.corpus, r.setup, cell(r.micro_mean, r.micro_std, r.micro_p),
                 cell(r.macro_mean, r.macro_std, r.macro_p)});
  }
  return t;
}

Table cross_corpus_table(const Report& report) {
  Table t{{"Variant", "Source", "Target", "Macro F1"}};
  for (const auto& r : report.rows) {
    auto c = cell(r.macro_mean, r.macro_std, r.macro_p);
    if (r.macro_mean && r.delta) c += " " + format_delta(*r.delta);
    t.push_back({row_label(r), r.source.empty() ? "-" : r.source, r.corpus, c});
  }
  return t;
}

Table cross_lingual_table(const Report& report) {
  std::vector<std::string> conditions;
  std::vector<std::string> variants;
  std::map<std::pair<std::string, std::string>, const ReportRow*> cells;
  for (const auto& r : report.rows) {
    if (std::find(conditions.begin(), conditions.end(), r.setup) == conditions.end())
      conditions.push_back(r.setup);
    const auto label = row_label(r);
    if (std::find(variants.begin(), variants.end(), label) == variants.end())
      variants.push_back(label);
    cells[{label, r.setup}] = &r;
  }
  Table t;
  t.emplace_back();
  t.back().push_back("Variant");
  for (const auto& c : conditions) t.back().push_back(c);
  for (const auto& v : variants) {
    std::vector<std::string> row{v};
    for (const auto& c : conditions) {
      const auto it = cells.find({v, c});
      row.push_back(it == cells.end() ? "-" : cell(it->second->macro_mean, std::nullopt, it->second->macro_p));
    }
    t.push_back(std::move(row));
  }
  return t;
}

std::string num(const std::optional<double>& v) {
  if (!v) return {};
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", *v);
  return buf;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (const char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + '"';
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields(1);
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        fields.back() += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        fields.back() += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.emplace_back();
    } else {
      fields.back() += c;
    }
  }
  return fields;
}

constexpr const char* kCsvHeader =
    "variant,source,corpus,setup,micro_mean,micro_std,macro_mean,macro_std,micro_p,macro_p,"
    "delta,incomplete,note";

std::string render_csv(const Report& report) {
  std::ostringstream out;
  out << "# kind=" << to_string(report.kind) << '\n';
  out << "# config_hash=" << report.provenance.config_hash << '\n';
  out << "# seed=" << report.provenance.seed << '\n';
  out << "# run_seeds=";
  for (std::size_t i = 0; i < report.provenance.run_seeds.size(); ++i)
    out << (i ? ";" : "") << report.provenance.run_seeds[i];
  out << '\n';
  out << "# backend=" << report.provenance.backend << '\n';
  out << kCsvHeader << '\n';
  for (const auto& r : report.rows) {
    out << csv_field(r.variant) << ',' << csv_field(r.source) << ',' << csv_field(r.corpus) << ','
        << csv_field(r.setup) << ',' << num(r.micro_mean) << ',' << num(r.micro_std) << ','
        << num(r.macro_mean) << ',' << num(r.macro_std) << ',' << num(r.micro_p) << ','
        << num(r.macro_p) << ',' << num(r.delta) << ',' << (r.incomplete ? 1 : 0) << ','
        << csv_field(r.note) << '\n';
  }
  return out.str();
}

std::string provenance_footer(const Report& report, ReportFormat format) {
  std::ostringstream out;
  const auto& p = report.provenance;
  const char* bullet = format == ReportFormat::markdown ? "- " : "";
  out << '\n' << (format == ReportFormat::markdown ? "**Provenance**\n\n" : "Provenance\n");
  out << bullet << "config hash: " << p.config_hash << '\n';
  out << bullet << "seed: " << p.seed << '\n';
  out << bullet << "run seeds: ";
  for (std::size_t i = 0; i < p.run_seeds.size(); ++i) out << (i ? ", " : "") << p.run_seeds[i];
  out << '\n';
  out << bullet << "backend: " << p.backend << '\n';
  bool any_incomplete = false;
  for (const auto& r : report.rows) {
    if (r.incomplete) {
      if (!any_incomplete) out << '\n' << (format == ReportFormat::markdown ? "**Incomplete**\n\n" : "Incomplete\n");
      any_incomplete = true;
      out << bullet << r.variant << " / " << r.corpus << " / " << r.setup << ": " << r.note << '\n';
    }
  }
  return out.str();
}

}  // namespace

std::string render_report(const Report& report, ReportFormat format) {
  if (format == ReportFormat::csv) return render_csv(report);
  Table t;
  switch (report.kind) {
    case ReportKind::within_corpus: t = within_table(report); break;
    case ReportKind::cross_corpus: t = cross_corpus_table(report); break;
    case ReportKind::cross_lingual: t = cross_lingual_table(report); break;
  }
  return render_table(t, format) + provenance_footer(report, format);
}

Report parse_report_csv(const std::string& text) {
  Report report;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  bool header_seen = false;
  auto opt = [&](const std::string& s) -> std::optional<double> {
    if (s.empty()) return std::nullopt;
    try {
      return std::stod(s);
    } catch (const std::exception&) {
      throw ParseError(lineno, "report csv: bad number '" + s + "'");
    }
  };
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    if (line.starts_with("# ")) {
      const auto eq = line.find('=');
      if (eq == std::string::npos) continue;
      const auto key = line.substr(2, eq - 2);
      const auto value = line.substr(eq + 1);
      if (key == "kind") report.kind = report_kind_from_string(value);
      else if (key == "config_hash") report.provenance.config_hash = value;
      else if (key == "seed") report.provenance.seed = std::stoull(value);
      else if (key == "backend") report.provenance.backend = value;
      else if (key == "run_seeds") {
        std::istringstream ss(value);
        std::string tok;
        while (std::getline(ss, tok, ';'))
          if (!tok.empty()) report.provenance.run_seeds.push_back(std::stoull(tok));
      }
      continue;
    }
    if (!header_seen) {
      if (line != kCsvHeader) throw ParseError(lineno, "report csv: unexpected header");
      header_seen = true;
      continue;
    }
    const auto f = split_csv_line(line);
    if (f.size() != 13) throw ParseError(lineno, "report csv: expected 13 fields");
    ReportRow r;
    r.variant = f[0];
    r.source = f[1];
    r.corpus = f[2];
    r.setup = f[3];
    r.micro_mean = opt(f[4]);
    r.micro_std = opt(f[5]);
    r.macro_mean = opt(f[6]);
    r.macro_std = opt(f[7]);
    r.micro_p = opt(f[8]);
    r.macro_p = opt(f[9]);
    r.delta = opt(f[10]);
    r.incomplete = f[11] == "1";
    r.note = f[12];
    report.rows.push_back(std::move(r));
  }
  if (!header_seen) throw ParseError(lineno, "report csv: missing header");
  return report;
}

void write_report_files(const Report& report, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  for (const auto format : {ReportFormat::markdown, ReportFormat::csv, ReportFormat::text}) {
    const auto path = dir / (std::string("report.") + file_extension(format));
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw ArgumentError("cannot write " + path.string());
    out << render_report(report, format);
  }
}

}  // namespace cts
