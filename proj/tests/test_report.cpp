#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>

#include "csteer/cache_io.hpp"
#include "csteer/report.hpp"

using namespace csteer;

namespace {

std::vector<GridCellResult> golden_results() {
  return {
      {Arm::none, 0, std::nullopt, 0.0, {0.1, 0.1}, 0.1, 0.0},
      {Arm::additive, 9, std::nullopt, 2.5, {0.42, 0.49}, 0.4567, 0.0321},
      {Arm::conceptor, 9, 0.0125, 3.0, {0.5}, 0.52138, 0.01234},
      {Arm::conceptor_mc, 12, 0.1, 0.5, {0.85, 0.86, 0.85}, 0.85321, 0.004},
      {Arm::additive_mean, 3, std::nullopt, 1.0, {1.0}, 1.0, 0.0},
  };
}

std::vector<GridCellResult> awkward_results() {
  return {
      {Arm::conceptor, 18446744073709551615ULL, 1.0 / 3.0, 0.1 + 0.2, {1.0 / 7.0, 2.0 / 3.0, 5e-324}, 1.0 / 9.0,
       std::sqrt(2.0)},
      {Arm::none, 0, std::nullopt, 0.0, {}, 0.0, 0.0},
  };
}

}  // namespace

TEST(Report, MarkdownMatchesGoldenFixture) {
  const auto golden = read_file_bytes(std::filesystem::path(CSTEER_TEST_DATA) / "golden_report.md");
  EXPECT_EQ(render_report(golden_results(), ReportFormat::markdown), golden);
}

TEST(Report, CsvRoundTripIsLossless) {
  for (const auto& results : {golden_results(), awkward_results()}) {
    const auto csv = render_report(results, ReportFormat::csv);
    EXPECT_EQ(parse_results_csv(csv), results);
    EXPECT_EQ(render_report(parse_results_csv(csv), ReportFormat::csv), csv);
  }
}

TEST(Report, JsonRoundTripIsLossless) {
  for (const auto& results : {golden_results(), awkward_results()}) {
    EXPECT_EQ(parse_results_json(render_report(results, ReportFormat::json)), results);
  }
}

TEST(Report, EmptyResultsGiveHeaderOnlyCsv) {
  EXPECT_EQ(render_report({}, ReportFormat::csv), "mechanism,layer,alpha,beta,n_seeds,mean,stddev,accuracies\n");
  EXPECT_TRUE(parse_results_csv(render_report({}, ReportFormat::csv)).empty());
  EXPECT_EQ(render_report({}, ReportFormat::json), "[]\n");
}

TEST(Report, CsvRowLayout) {
  const std::vector<GridCellResult> r{{Arm::conceptor, 9, 0.05, 2.0, {0.5, 0.25}, 0.375, 0.125}};
  EXPECT_EQ(render_report(r, ReportFormat::csv),
            "mechanism,layer,alpha,beta,n_seeds,mean,stddev,accuracies\nconceptor,9,0.05,2,2,0.375,0.125,0.5;0.25\n");
}

TEST(Report, MalformedCsvIsRejected) {
  EXPECT_THROW(parse_results_csv("bad header\n"), ValidationError);
  EXPECT_THROW(parse_results_csv("mechanism,layer,alpha,beta,n_seeds,mean,stddev,accuracies\nconceptor,1\n"),
               ValidationError);
  EXPECT_THROW(
      parse_results_csv("mechanism,layer,alpha,beta,n_seeds,mean,stddev,accuracies\nwarp,1,,1,1,0.5,0,0.5\n"),
      ValidationError);
  EXPECT_THROW(
      parse_results_csv("mechanism,layer,alpha,beta,n_seeds,mean,stddev,accuracies\nnone,1,,x,1,0.5,0,0.5\n"),
      ValidationError);
  EXPECT_THROW(
      parse_results_csv("mechanism,layer,alpha,beta,n_seeds,mean,stddev,accuracies\nnone,1,,0,2,0.5,0,0.5\n"),
      ValidationError);
  EXPECT_THROW(parse_results_json("{}"), ValidationError);
  EXPECT_THROW(parse_results_json("[{\"mechanism\":\"none\"}]"), ValidationError);
}

TEST(Report, FormatNames) {
  EXPECT_EQ(parse_report_format("csv"), ReportFormat::csv);
  EXPECT_EQ(parse_report_format("json"), ReportFormat::json);
  EXPECT_EQ(parse_report_format("markdown"), ReportFormat::markdown);
  EXPECT_FALSE(parse_report_format("yaml"));
}

TEST(Report, ShortestRoundTripNumbers) {
  EXPECT_EQ(format_double(0.1), "0.1");
  EXPECT_EQ(format_double(2.0), "2");
  EXPECT_EQ(format_double(1e-300), "1e-300");
  EXPECT_EQ(std::stod(format_double(1.0 / 3.0)), 1.0 / 3.0);
}

TEST(Report, TrialLinesAreOneObjectEach) {
  const std::vector<TrialRecord> trials{
      {{Arm::conceptor, 2, 0.1, 1.0}, 0, 77, 0.25, 0.75},
      {{Arm::none, 2, std::nullopt, 0.0}, 1, 78, 0.5, 0.5},
  };
  EXPECT_EQ(render_trials_jsonl(trials),
            "{\"mechanism\":\"conceptor\",\"layer\":2,\"alpha\":0.1,\"beta\":1.0,\"seed_index\":0,\"data_seed\":77,"
            "\"unsteered\":0.25,\"steered\":0.75}\n"
            "{\"mechanism\":\"none\",\"layer\":2,\"alpha\":null,\"beta\":0.0,\"seed_index\":1,\"data_seed\":78,"
            "\"unsteered\":0.5,\"steered\":0.5}\n");
}

TEST(Report, CompositeRendering) {
  CompositeReport report;
  report.task_a = "a";
  report.task_b = "b";
  report.compound = "ab";
  report.rows = {{Arm::conceptor, 0, 0.1, 1.0, 0.5, 0.0, 0.125},
                 {Arm::additive_mean, 0, std::nullopt, 2.0, 0.25, 0.5, 0.125}};
  EXPECT_EQ(render_composite(report, ReportFormat::csv),
            "mechanism,layer,alpha,beta,mean,stddev,baseline_mean\nconceptor,0,0.1,1,0.5,0,0.125\n"
            "additive_mean,0,,2,0.25,0.5,0.125\n");
  const auto md = render_composite(report, ReportFormat::markdown);
  EXPECT_NE(md.find("| additive_mean | 0 | - | 2 | 25.00% ± 50.00% | 12.50% |"), std::string::npos);
  EXPECT_NE(render_composite(report, ReportFormat::json).find("\"compound\": \"ab\""), std::string::npos);
}
