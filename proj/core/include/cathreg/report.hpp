#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "cathreg/evaluation.hpp"

namespace cathreg {

enum class ReportFormat { Csv, Json, Svg };

/// Accepts "csv", "json", "svg".
ReportFormat report_format_from_string(std::string_view text);

/// Columns: branch,run,method,mean_mm,std_mm,min_mm,max_mm,n_points,converged.
/// One row per cell, then one `overall` row per method (per-run aggregation).
std::string format_report_csv(const ExperimentReport& report);
std::string format_report_json(const ExperimentReport& report);
/// Fig.-style bar chart: one panel per method, one bar per branch plus an
/// overall bar, std-dev bars and min/max whiskers.
std::string format_report_svg(const ExperimentReport& report);

/// Writes report.<ext> into `directory` for each format; returns the paths.
std::vector<std::filesystem::path> emit_report(const ExperimentReport& report, const std::vector<ReportFormat>& formats,
                                               const std::filesystem::path& directory);

}  // namespace cathreg
