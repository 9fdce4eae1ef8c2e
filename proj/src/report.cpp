#include "unprune/report.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "unprune/errors.hpp"

namespace unpruning {

namespace {

using nlohmann::json;

std::string num(double v) {
  if (!std::isfinite(v)) return {};
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

std::string seconds(double v) {
  if (!std::isfinite(v)) return {};
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.3f", v);
  return buf;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("short write to " + path.string());
}

json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

double number_from(const json& j) {
  return j.is_null() ? std::numeric_limits<double>::quiet_NaN() : j.get<double>();
}

json row_to_json(const ReportRow& r) {
  json j;
  j["seed"] = r.seed;
  j["method"] = r.method;
  j["sparsity"] = r.sparsity;
  j["iom"] = number_or_null(r.iom);
  j["uom"] = number_or_null(r.uom);
  j["iou"] = r.iou ? number_or_null(*r.iou) : json(nullptr);
  j["kl"] = number_or_null(r.kl);
  j["ta"] = number_or_null(r.ta);
  j["ua"] = number_or_null(r.ua);
  j["wall_time_s"] = number_or_null(r.wall_time_s);
  j["trace"] = r.trace;
  j["error"] = r.error;
  return j;
}

ReportRow row_from_json(const json& j) {
  ReportRow r;
  r.seed = j.at("seed").get<std::uint64_t>();
  r.method = j.at("method").get<std::string>();
  r.sparsity = j.at("sparsity").get<double>();
  r.iom = number_from(j.at("iom"));
  r.uom = number_from(j.at("uom"));
  if (!j.at("iou").is_null()) r.iou = j.at("iou").get<double>();
  r.kl = number_from(j.at("kl"));
  r.ta = number_from(j.at("ta"));
  r.ua = number_from(j.at("ua"));
  r.wall_time_s = number_from(j.at("wall_time_s"));
  r.trace = j.value("trace", "");
  r.error = j.value("error", "");
  return r;
}

}  // namespace

std::string format_csv(const std::vector<ReportRow>& rows, const CsvOptions& options) {
  std::ostringstream out;
  out << kCsvHeader << '\n';
  for (const auto& r : rows) {
    if (r.failed()) {
      out << r.seed << ',' << csv_field(r.method) << ',' << num(r.sparsity) << ",,,,,,,\n";
      continue;
    }
    out << r.seed << ',' << csv_field(r.method) << ',' << num(r.sparsity) << ',' << num(r.iom) << ','
        << num(r.uom) << ',' << (r.iou ? num(*r.iou) : std::string()) << ',' << num(r.kl) << ','
        << num(r.ta) << ',' << num(r.ua) << ',' << (options.redact_timing ? std::string() : seconds(r.wall_time_s))
        << '\n';
  }
  return out.str();
}

void emit_csv(const std::vector<ReportRow>& rows, const std::filesystem::path& path, const CsvOptions& options) {
  write_text(path, format_csv(rows, options));
}

void emit_csv(const ExperimentReport& report, const std::filesystem::path& path, const CsvOptions& options) {
  emit_csv(report.rows, path, options);
}

std::string format_json(const ExperimentReport& report) {
  json j;
  j["rows"] = json::array();
  for (const auto& r : report.rows) j["rows"].push_back(row_to_json(r));
  j["vs_original"] = json::array();
  for (const auto& r : report.vs_original) j["vs_original"].push_back(row_to_json(r));
  return j.dump(2) + "\n";
}

void emit_json(const ExperimentReport& report, const std::filesystem::path& path) {
  write_text(path, format_json(report));
}

ExperimentReport parse_report_json(const std::string& text) {
  ExperimentReport report;
  try {
    const json j = json::parse(text);
    for (const auto& r : j.at("rows")) report.rows.push_back(row_from_json(r));
    for (const auto& r : j.at("vs_original")) report.vs_original.push_back(row_from_json(r));
  } catch (const json::exception& e) {
    throw FormatError(std::string("report json: ") + e.what());
  }
  return report;
}

ExperimentReport load_report_json(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_report_json(buf.str());
}

bool is_metric_name(const std::string& m) {
  return m == "iom" || m == "uom" || m == "iou" || m == "kl" || m == "ta" || m == "ua" || m == "sparsity" ||
         m == "wall_time_s";
}

double metric_value(const ReportRow& r, const std::string& m) {
  if (m == "iom") return r.iom;
  if (m == "uom") return r.uom;
  if (m == "iou") return r.iou ? *r.iou : std::numeric_limits<double>::quiet_NaN();
  if (m == "kl") return r.kl;
  if (m == "ta") return r.ta;
  if (m == "ua") return r.ua;
  if (m == "sparsity") return r.sparsity;
  if (m == "wall_time_s") return r.wall_time_s;
  throw ConfigError("unknown metric '" + m + "'");
}

}  // namespace unpruning
