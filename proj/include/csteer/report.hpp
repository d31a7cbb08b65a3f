#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "csteer/experiment.hpp"

namespace csteer {

enum class ReportFormat { csv, json, markdown };

const char* to_string(ReportFormat format);
std::optional<ReportFormat> parse_report_format(std::string_view name);

/// Shortest text that parses back to the same double.
std::string format_double(double value);

/// CSV and JSON are lossless; markdown shows percentages to two decimals.
std::string render_report(const std::vector<GridCellResult>& results, ReportFormat format);

std::vector<GridCellResult> parse_results_csv(std::string_view text);
std::vector<GridCellResult> parse_results_json(std::string_view text);

/// One JSON object per line, one line per seed × cell.
std::string render_trials_jsonl(const std::vector<TrialRecord>& trials);

std::string render_composite(const CompositeReport& report, ReportFormat format);

}  // namespace csteer
