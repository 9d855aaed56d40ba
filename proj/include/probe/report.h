#pragma once

// Report rendering. Every number shown comes straight from aggregate();
// CSV cells use 4 decimals, charts 3.

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "probe/metrics.h"
#include "probe/runner.h"

namespace probe {

enum class ReportKind : std::uint8_t { kOverall, kByCondition, kLearningCurve, kMetricComparison, kAttraction };
enum class ReportMetric : std::uint8_t { kBinary, kPd, kBoth };
enum class ReportFormat : std::uint8_t { kCsv, kSvg };

std::string_view to_string(ReportKind k);
std::string_view to_string(ReportMetric m);
ReportKind parse_report_kind(std::string_view s);
ReportMetric parse_report_metric(std::string_view s);
ReportFormat parse_report_format(std::string_view s);

struct Baseline {
  std::string name;
  double value = 0.0;
};

struct ReportSpec {
  ReportKind kind = ReportKind::kOverall;
  ReportMetric metric = ReportMetric::kBoth;
  ReportFormat format = ReportFormat::kCsv;
  // Horizontal reference lines; learning curves only.
  std::vector<Baseline> baselines;
  // Learning curves: split series by length and attractor.
  bool with_conditions = false;
  // Restrict rows to one checkpoint before aggregating.
  std::optional<std::uint64_t> steps;
  // Metric comparison grouping and row filters (dimension -> label).
  std::vector<Dim> group_dims = {Dim::kScorer, Dim::kDependency, Dim::kLength, Dim::kAttractor};
  std::map<Dim, std::string> filters;
  // Overall report: bootstrap resamples for percentile intervals (0 = off).
  std::size_t bootstrap = 0;
  std::uint64_t seed = 0;

  // Throws ReportError on combinations the kind does not support.
  void validate() const;
  // reports/<kind>__<metric>.<csv|svg>
  std::string filename() const;
};

struct ReportFile {
  std::string filename;
  std::string content;
};

// Each throws ReportError when there is nothing to report.
ReportFile emit_overall(const ResultSet& rs, const ReportSpec& spec);
ReportFile emit_condition_breakdown(const ResultSet& rs, const ReportSpec& spec);
ReportFile emit_learning_curve(const ResultSet& rs, const ReportSpec& spec);
ReportFile emit_metric_comparison(const ResultSet& rs, const ReportSpec& spec);
ReportFile emit_attraction(const ResultSet& rs, const ReportSpec& spec);

ReportFile emit_report(const ResultSet& rs, const ReportSpec& spec);
// Writes under <dir>/reports/ and returns the path.
std::filesystem::path write_report(const ReportFile& file, const std::filesystem::path& dir);

}  // namespace probe
