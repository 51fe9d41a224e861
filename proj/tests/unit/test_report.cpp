#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

#include "cts/error.hpp"
#include "cts/report.hpp"
#include "synthetic.hpp"

using namespace cts;

namespace {

Report within_fixture() {
  Report r;
  r.provenance = {"abc123", 42, {7, 8}, "fake/32"};
  ReportRow se{"SE", "", "CrisisLex", "Low", 0.517, 0.052, 0.481, 0.06, {}, {}, {}, false, ""};
  ReportRow cts{"SE+CTS", "", "CrisisLex", "Low", 0.566, 0.049, 0.52, 0.051, 0.01, 0.2, {}, false, ""};
  r.rows = {se, cts};
  return r;
}

}  // namespace

TEST(Format, ScoreCells) {
  EXPECT_EQ(format_score(0.566, 0.049), "56.6 (4.9)");
  EXPECT_EQ(format_score(0.566, 0.049, 0.01), "56.6 (4.9)*");
  EXPECT_EQ(format_score(0.566, 0.049, 0.05), "56.6 (4.9)");
  EXPECT_EQ(format_score(0.422), "42.2");
  EXPECT_EQ(format_score(0.551), "55.1");
  EXPECT_EQ(format_score(1.0, 0.0), "100.0 (0.0)");
}

TEST(Format, Deltas) {
  EXPECT_EQ(format_delta(0.036), "(3.6↑)");
  EXPECT_EQ(format_delta(-0.010), "(1.0↓)");
  EXPECT_EQ(format_delta(0.0004), "(0.0)");
  EXPECT_EQ(format_delta(-0.0004), "(0.0)");
}

TEST(Render, WithinCorpusTables) {
  const auto r = within_fixture();
  const auto md = render_report(r, ReportFormat::markdown);
  EXPECT_NE(md.find("| Variant"), std::string::npos);
  EXPECT_NE(md.find("56.6 (4.9)*"), std::string::npos);
  EXPECT_NE(md.find("51.7 (5.2)"), std::string::npos);
  EXPECT_NE(md.find("abc123"), std::string::npos);
  const auto txt = render_report(r, ReportFormat::text);
  EXPECT_NE(txt.find("SE+CTS"), std::string::npos);
  EXPECT_EQ(txt.find('|'), std::string::npos);
}

TEST(Render, CrossCorpusDeltaAndCrossLingualPivot) {
  Report cc;
  cc.kind = ReportKind::cross_corpus;
  cc.rows = {{"SE+CTS", "CrisisLex", "TREC-IS", "High", {}, {}, 0.30, 0.02, {}, {}, 0.036, false, ""}};
  const auto t = render_report(cc, ReportFormat::markdown);
  EXPECT_NE(t.find("(3.6↑)"), std::string::npos);
  EXPECT_NE(t.find("CrisisLex"), std::string::npos);

  Report cl;
  cl.kind = ReportKind::cross_lingual;
  cl.rows = {{"Random", "", "target", "de", {}, {}, 0.422, {}, {}, {}, {}, false, ""},
             {"SE", "", "target", "de", {}, {}, 0.551, 0.01, {}, {}, {}, false, ""},
             {"SE", "", "target", "de->en", {}, {}, 0.60, 0.01, {}, {}, {}, false, ""}};
  const auto p = render_report(cl, ReportFormat::markdown);
  EXPECT_NE(p.find("42.2"), std::string::npos);
  EXPECT_NE(p.find("55.1"), std::string::npos);
  EXPECT_NE(p.find("de->en"), std::string::npos);
  EXPECT_NE(p.find(" - "), std::string::npos);  // Random has no de->en cell
}

TEST(Render, IncompleteRowsAreMarked) {
  auto r = within_fixture();
  r.rows[1].incomplete = true;
  r.rows[1].note = "failed folds: 2";
  const auto txt = render_report(r, ReportFormat::text);
  EXPECT_NE(txt.find("SE+CTS (incomplete)"), std::string::npos);
  EXPECT_NE(txt.find("failed folds: 2"), std::string::npos);
}

TEST(Csv, RoundTripsExactly) {
  auto r = within_fixture();
  r.rows[0].note = "has, comma and \"quotes\"";
  r.rows[1].micro_mean = 1.0 / 3;
  const auto csv = render_report(r, ReportFormat::csv);
  EXPECT_EQ(parse_report_csv(csv), r);
  EXPECT_THROW(parse_report_csv("variant,source\nx"), ParseError);
}

TEST(Files, WritesAllFormats) {
  test::TempDir dir;
  const auto r = within_fixture();
  write_report_files(r, dir.path());
  for (const char* f : {"report.md", "report.csv", "report.txt"})
    EXPECT_TRUE(std::filesystem::exists(dir / f)) << f;
  std::ifstream in(dir / "report.csv");
  std::stringstream ss;
  ss << in.rdbuf();
  EXPECT_EQ(parse_report_csv(ss.str()), r);
}

TEST(Formats, NamesAndErrors) {
  EXPECT_EQ(report_format_from_string("md"), ReportFormat::markdown);
  EXPECT_EQ(report_format_from_string("csv"), ReportFormat::csv);
  EXPECT_EQ(report_format_from_string("text"), ReportFormat::text);
  EXPECT_THROW(report_format_from_string("xlsx"), ArgumentError);
  EXPECT_EQ(report_kind_from_string(to_string(ReportKind::cross_lingual)), ReportKind::cross_lingual);
}
