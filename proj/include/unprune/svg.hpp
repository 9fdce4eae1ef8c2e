#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "unprune/experiment.hpp"
#include "unprune/mia.hpp"

namespace unpruning {

/// Scatter of one point per (method, seed) row, colored by method with a
/// legend. Rows of method "oracle" are drawn as a single diamond marker at
/// their mean. Failed rows are skipped. Unknown metric names are ConfigErrors.
std::string render_scatter(const std::vector<ReportRow>& rows, const std::string& x_metric,
                           const std::string& y_metric);
void emit_scatter(const std::vector<ReportRow>& rows, const std::string& x_metric, const std::string& y_metric,
                  const std::filesystem::path& path);

/// One line per attack channel over the sweep ratios.
std::string render_sweep(std::span<const MiaReport> sweep);
void emit_sweep_svg(std::span<const MiaReport> sweep, const std::filesystem::path& path);

}  // namespace unpruning
