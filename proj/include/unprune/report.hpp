#pragma once

#include <filesystem>
#include <string>

#include "unprune/experiment.hpp"

namespace unpruning {

inline constexpr const char* kCsvHeader = "seed,method,sparsity,iom,uom,iou,kl,ta,ua,wall_time_s";

struct CsvOptions {
  // Leave wall_time_s empty so that reruns produce byte-identical files.
  bool redact_timing = false;
};

/// Rows in the order given. Failed cells and an empty-union IoU leave the
/// affected fields empty; wall time is printed with 3 decimals.
std::string format_csv(const std::vector<ReportRow>& rows, const CsvOptions& options = {});
void emit_csv(const std::vector<ReportRow>& rows, const std::filesystem::path& path, const CsvOptions& options = {});
void emit_csv(const ExperimentReport& report, const std::filesystem::path& path, const CsvOptions& options = {});

/// Both row sets, full precision, with error and trace fields.
std::string format_json(const ExperimentReport& report);
void emit_json(const ExperimentReport& report, const std::filesystem::path& path);
ExperimentReport parse_report_json(const std::string& text);
ExperimentReport load_report_json(const std::filesystem::path& path);

/// Numeric value of a metric column: iom, uom, iou, kl, ta, ua, sparsity or
/// wall_time_s. Unknown names are ConfigErrors.
double metric_value(const ReportRow& row, const std::string& metric);
bool is_metric_name(const std::string& metric);

}  // namespace unpruning
