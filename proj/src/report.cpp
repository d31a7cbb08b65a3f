#include "csteer/report.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "json.hpp"

namespace csteer {

namespace {

using nlohmann::ordered_json;

constexpr std::string_view kCsvHeader = "mechanism,layer,alpha,beta,n_seeds,mean,stddev,accuracies";

std::string percent(double value) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f%%", value * 100.0);
  return buf;
}

std::string optional_double(const std::optional<double>& v) { return v ? format_double(*v) : std::string(); }

double parse_double(std::string_view field, std::size_t line) {
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
  if (ec != std::errc() || ptr != field.data() + field.size()) {
    throw ValidationError("line " + std::to_string(line) + ": bad number \"" + std::string(field) + "\"");
  }
  return value;
}

std::uint64_t parse_u64(std::string_view field, std::size_t line) {
  std::uint64_t value = 0;
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
  if (ec != std::errc() || ptr != field.data() + field.size()) {
    throw ValidationError("line " + std::to_string(line) + ": bad integer \"" + std::string(field) + "\"");
  }
  return value;
}

std::vector<std::string_view> split(std::string_view text, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = text.find(sep, start);
    out.push_back(text.substr(start, pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

Arm parse_arm_or_throw(std::string_view name) {
  const auto arm = parse_arm(name);
  if (!arm) throw ValidationError("unknown mechanism \"" + std::string(name) + "\"");
  return *arm;
}

ordered_json cell_json(const GridCellResult& r) {
  ordered_json j;
  j["mechanism"] = to_string(r.mechanism);
  j["layer"] = r.layer;
  j["alpha"] = r.alpha ? ordered_json(*r.alpha) : ordered_json(nullptr);
  j["beta"] = r.beta;
  j["n_seeds"] = r.accuracies.size();
  j["mean"] = r.mean;
  j["stddev"] = r.stddev;
  j["accuracies"] = r.accuracies;
  return j;
}

std::string markdown_alpha(const std::optional<double>& alpha) { return alpha ? format_double(*alpha) : "-"; }

}  // namespace

const char* to_string(ReportFormat format) {
  switch (format) {
    case ReportFormat::csv: return "csv";
    case ReportFormat::json: return "json";
    case ReportFormat::markdown: return "markdown";
  }
  return "unknown";
}

std::optional<ReportFormat> parse_report_format(std::string_view name) {
  if (name == "csv") return ReportFormat::csv;
  if (name == "json") return ReportFormat::json;
  if (name == "markdown" || name == "md") return ReportFormat::markdown;
  return std::nullopt;
}

std::string format_double(double value) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value);
  if (ec != std::errc()) throw ValidationError("cannot format number");
  return std::string(buf, ptr);
}

std::string render_report(const std::vector<GridCellResult>& results, ReportFormat format) {
  std::ostringstream out;
  switch (format) {
    case ReportFormat::csv:
      out << kCsvHeader << '\n';
      for (const auto& r : results) {
        out << to_string(r.mechanism) << ',' << r.layer << ',' << optional_double(r.alpha) << ','
            << format_double(r.beta) << ',' << r.accuracies.size() << ',' << format_double(r.mean) << ','
            << format_double(r.stddev) << ',';
        for (std::size_t i = 0; i < r.accuracies.size(); ++i) {
          out << (i ? ";" : "") << format_double(r.accuracies[i]);
        }
        out << '\n';
      }
      break;
    case ReportFormat::json: {
      ordered_json cells = ordered_json::array();
      for (const auto& r : results) cells.push_back(cell_json(r));
      out << cells.dump(2) << '\n';
      break;
    }
    case ReportFormat::markdown:
      out << "| mechanism | layer | alpha | beta | accuracy |\n";
      out << "|---|---:|---:|---:|---:|\n";
      for (const auto& r : results) {
        out << "| " << to_string(r.mechanism) << " | " << r.layer << " | " << markdown_alpha(r.alpha) << " | "
            << format_double(r.beta) << " | " << percent(r.mean) << " ± " << percent(r.stddev) << " |\n";
      }
      break;
  }
  return out.str();
}

std::vector<GridCellResult> parse_results_csv(std::string_view text) {
  auto lines = split(text, '\n');
  if (!lines.empty() && lines.back().empty()) lines.pop_back();
  if (lines.empty() || lines.front() != kCsvHeader) throw ValidationError("results CSV has an unexpected header");
  std::vector<GridCellResult> out;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto fields = split(lines[i], ',');
    if (fields.size() != 8) throw ValidationError("line " + std::to_string(i + 1) + ": expected 8 fields");
    GridCellResult r;
    r.mechanism = parse_arm_or_throw(fields[0]);
    r.layer = parse_u64(fields[1], i + 1);
    if (!fields[2].empty()) r.alpha = parse_double(fields[2], i + 1);
    r.beta = parse_double(fields[3], i + 1);
    const auto n = parse_u64(fields[4], i + 1);
    r.mean = parse_double(fields[5], i + 1);
    r.stddev = parse_double(fields[6], i + 1);
    if (!fields[7].empty()) {
      for (auto a : split(fields[7], ';')) r.accuracies.push_back(parse_double(a, i + 1));
    }
    if (r.accuracies.size() != n) throw ValidationError("line " + std::to_string(i + 1) + ": n_seeds mismatch");
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<GridCellResult> parse_results_json(std::string_view text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("results JSON: ") + e.what());
  }
  if (!doc.is_array()) throw ValidationError("results JSON must be an array");
  std::vector<GridCellResult> out;
  try {
    for (const auto& j : doc) {
      GridCellResult r;
      r.mechanism = parse_arm_or_throw(j.at("mechanism").get<std::string>());
      r.layer = j.at("layer").get<std::uint64_t>();
      if (!j.at("alpha").is_null()) r.alpha = j.at("alpha").get<double>();
      r.beta = j.at("beta").get<double>();
      r.mean = j.at("mean").get<double>();
      r.stddev = j.at("stddev").get<double>();
      r.accuracies = j.at("accuracies").get<std::vector<double>>();
      if (r.accuracies.size() != j.at("n_seeds").get<std::size_t>()) {
        throw ValidationError("results JSON: n_seeds mismatch");
      }
      out.push_back(std::move(r));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("results JSON: ") + e.what());
  }
  return out;
}

std::string render_trials_jsonl(const std::vector<TrialRecord>& trials) {
  std::ostringstream out;
  for (const auto& t : trials) {
    ordered_json j;
    j["mechanism"] = to_string(t.cell.arm);
    j["layer"] = t.cell.layer;
    j["alpha"] = t.cell.alpha ? ordered_json(*t.cell.alpha) : ordered_json(nullptr);
    j["beta"] = t.cell.beta;
    j["seed_index"] = t.seed_index;
    j["data_seed"] = t.data_seed;
    j["unsteered"] = t.unsteered;
    j["steered"] = t.steered;
    out << j.dump() << '\n';
  }
  return out.str();
}

std::string render_composite(const CompositeReport& report, ReportFormat format) {
  std::ostringstream out;
  switch (format) {
    case ReportFormat::csv:
      out << "mechanism,layer,alpha,beta,mean,stddev,baseline_mean\n";
      for (const auto& r : report.rows) {
        out << to_string(r.mechanism) << ',' << r.layer << ',' << optional_double(r.alpha) << ','
            << format_double(r.beta) << ',' << format_double(r.mean) << ',' << format_double(r.stddev) << ','
            << format_double(r.baseline_mean) << '\n';
      }
      break;
    case ReportFormat::json: {
      ordered_json rows = ordered_json::array();
      for (const auto& r : report.rows) {
        ordered_json j;
        j["mechanism"] = to_string(r.mechanism);
        j["layer"] = r.layer;
        j["alpha"] = r.alpha ? ordered_json(*r.alpha) : ordered_json(nullptr);
        j["beta"] = r.beta;
        j["mean"] = r.mean;
        j["stddev"] = r.stddev;
        j["baseline_mean"] = r.baseline_mean;
        rows.push_back(std::move(j));
      }
      ordered_json doc;
      doc["task_a"] = report.task_a;
      doc["task_b"] = report.task_b;
      doc["compound"] = report.compound;
      doc["rows"] = std::move(rows);
      out << doc.dump(2) << '\n';
      break;
    }
    case ReportFormat::markdown:
      out << "| mechanism | layer | alpha | beta | accuracy | unsteered |\n";
      out << "|---|---:|---:|---:|---:|---:|\n";
      for (const auto& r : report.rows) {
        out << "| " << to_string(r.mechanism) << " | " << r.layer << " | " << markdown_alpha(r.alpha) << " | "
            << format_double(r.beta) << " | " << percent(r.mean) << " ± " << percent(r.stddev) << " | "
            << percent(r.baseline_mean) << " |\n";
      }
      break;
  }
  return out.str();
}

}  // namespace csteer
