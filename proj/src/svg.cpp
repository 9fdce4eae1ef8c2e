#include "unprune/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "unprune/errors.hpp"
#include "unprune/report.hpp"

namespace unpruning {

namespace {

constexpr double kWidth = 640, kHeight = 480;
constexpr double kLeft = 70, kRight = 160, kTop = 30, kBottom = 60;

constexpr const char* kPalette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728",
                                    "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"};

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4g", v);
  return buf;
}

std::string px(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

struct Range {
  double lo = 0.0, hi = 1.0;

  void cover(const std::vector<double>& values) {
    bool any = false;
    double a = 0, b = 0;
    for (double v : values) {
      if (!std::isfinite(v)) continue;
      a = any ? std::min(a, v) : v;
      b = any ? std::max(b, v) : v;
      any = true;
    }
    if (!any) return;
    const double pad = b > a ? 0.05 * (b - a) : std::max(0.05 * std::abs(a), 0.05);
    lo = a - pad;
    hi = b + pad;
  }
};

// Axes frame, ticks and labels; returns mappers from data to pixels.
struct Plot {
  Range x, y;
  std::ostringstream body;

  double map_x(double v) const { return kLeft + (v - x.lo) / (x.hi - x.lo) * (kWidth - kLeft - kRight); }
  double map_y(double v) const { return kHeight - kBottom - (v - y.lo) / (y.hi - y.lo) * (kHeight - kTop - kBottom); }

  void axes(const std::string& x_label, const std::string& y_label) {
    const double x0 = kLeft, x1 = kWidth - kRight, y0 = kHeight - kBottom, y1 = kTop;
    body << "<rect x=\"" << px(x0) << "\" y=\"" << px(y1) << "\" width=\"" << px(x1 - x0) << "\" height=\""
         << px(y0 - y1) << "\" fill=\"none\" stroke=\"#333\"/>\n";
    for (int i = 0; i <= 4; ++i) {
      const double tx = x.lo + (x.hi - x.lo) * i / 4.0;
      const double ty = y.lo + (y.hi - y.lo) * i / 4.0;
      body << "<line x1=\"" << px(map_x(tx)) << "\" y1=\"" << px(y0) << "\" x2=\"" << px(map_x(tx)) << "\" y2=\""
           << px(y0 + 5) << "\" stroke=\"#333\"/>\n";
      body << "<text x=\"" << px(map_x(tx)) << "\" y=\"" << px(y0 + 18) << "\" text-anchor=\"middle\">" << fmt(tx)
           << "</text>\n";
      body << "<line x1=\"" << px(x0 - 5) << "\" y1=\"" << px(map_y(ty)) << "\" x2=\"" << px(x0) << "\" y2=\""
           << px(map_y(ty)) << "\" stroke=\"#333\"/>\n";
      body << "<text x=\"" << px(x0 - 8) << "\" y=\"" << px(map_y(ty) + 4) << "\" text-anchor=\"end\">" << fmt(ty)
           << "</text>\n";
    }
    body << "<text x=\"" << px((x0 + x1) / 2) << "\" y=\"" << px(kHeight - 15) << "\" text-anchor=\"middle\">"
         << xml_escape(x_label) << "</text>\n";
    body << "<text x=\"18\" y=\"" << px((y0 + y1) / 2) << "\" text-anchor=\"middle\" transform=\"rotate(-90 18 "
         << px((y0 + y1) / 2) << ")\">" << xml_escape(y_label) << "</text>\n";
  }

  void legend_entry(int slot, const std::string& color, const std::string& label, bool diamond = false) {
    const double lx = kWidth - kRight + 15, ly = kTop + 10 + 20.0 * slot;
    if (diamond) {
      body << "<path class=\"legend\" d=\"M" << px(lx) << ' ' << px(ly - 6) << " L" << px(lx + 6) << ' ' << px(ly)
           << " L" << px(lx) << ' ' << px(ly + 6) << " L" << px(lx - 6) << ' ' << px(ly) << " Z\" fill=\"" << color
           << "\"/>\n";
    } else {
      body << "<circle class=\"legend\" cx=\"" << px(lx) << "\" cy=\"" << px(ly) << "\" r=\"5\" fill=\"" << color
           << "\"/>\n";
    }
    body << "<text x=\"" << px(lx + 12) << "\" y=\"" << px(ly + 4) << "\">" << xml_escape(label) << "</text>\n";
  }

  std::string finish() const {
    std::ostringstream out;
    out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
        << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
        << "\" viewBox=\"0 0 " << kWidth << ' ' << kHeight << "\" font-family=\"sans-serif\" font-size=\"11\">\n"
        << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
        << body.str() << "</svg>\n";
    return out.str();
  }
};

void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("short write to " + path.string());
}

}  // namespace

std::string render_scatter(const std::vector<ReportRow>& rows, const std::string& x_metric,
                           const std::string& y_metric) {
  if (!is_metric_name(x_metric)) throw ConfigError("unknown metric '" + x_metric + "'");
  if (!is_metric_name(y_metric)) throw ConfigError("unknown metric '" + y_metric + "'");

  std::vector<std::string> methods;
  std::vector<double> xs, ys;
  double ox = 0, oy = 0;
  int n_oracle = 0;
  for (const auto& r : rows) {
    if (r.failed()) continue;
    const double x = metric_value(r, x_metric), y = metric_value(r, y_metric);
    if (!std::isfinite(x) || !std::isfinite(y)) continue;
    xs.push_back(x);
    ys.push_back(y);
    if (r.method == "oracle") {
      ox += x;
      oy += y;
      ++n_oracle;
    } else if (std::find(methods.begin(), methods.end(), r.method) == methods.end()) {
      methods.push_back(r.method);
    }
  }

  Plot plot;
  plot.x.cover(xs);
  plot.y.cover(ys);
  plot.axes(x_metric, y_metric);
  for (const auto& r : rows) {
    if (r.failed() || r.method == "oracle") continue;
    const double x = metric_value(r, x_metric), y = metric_value(r, y_metric);
    if (!std::isfinite(x) || !std::isfinite(y)) continue;
    const auto slot = std::find(methods.begin(), methods.end(), r.method) - methods.begin();
    plot.body << "<circle class=\"point\" cx=\"" << px(plot.map_x(x)) << "\" cy=\"" << px(plot.map_y(y))
              << "\" r=\"4\" fill=\"" << kPalette[slot % 8] << "\" fill-opacity=\"0.8\"><title>"
              << xml_escape(r.method) << " seed " << r.seed << "</title></circle>\n";
  }
  int slot = 0;
  for (const auto& m : methods) {
    plot.legend_entry(slot, kPalette[slot % 8], m);
    ++slot;
  }
  if (n_oracle > 0) {
    const double cx = plot.map_x(ox / n_oracle), cy = plot.map_y(oy / n_oracle);
    plot.body << "<path class=\"oracle\" d=\"M" << px(cx) << ' ' << px(cy - 8) << " L" << px(cx + 8) << ' ' << px(cy)
              << " L" << px(cx) << ' ' << px(cy + 8) << " L" << px(cx - 8) << ' ' << px(cy)
              << " Z\" fill=\"black\"><title>oracle</title></path>\n";
    plot.legend_entry(slot, "black", "oracle", true);
  }
  return plot.finish();
}

void emit_scatter(const std::vector<ReportRow>& rows, const std::string& x_metric, const std::string& y_metric,
                  const std::filesystem::path& path) {
  write_text(path, render_scatter(rows, x_metric, y_metric));
}

std::string render_sweep(std::span<const MiaReport> sweep) {
  std::vector<double> xs, ys;
  for (const auto& r : sweep) {
    xs.push_back(r.ratio);
    ys.insert(ys.end(), r.score.begin(), r.score.end());
  }
  Plot plot;
  plot.x.cover(xs);
  plot.y.cover(ys);
  plot.axes("member / non-member ratio", "MIA score");
  for (std::size_t c = 0; c < kMiaChannels; ++c) {
    if (!sweep.empty()) {
      plot.body << "<polyline class=\"series\" fill=\"none\" stroke=\"" << kPalette[c] << "\" stroke-width=\"1.5\" points=\"";
      for (std::size_t i = 0; i < sweep.size(); ++i) {
        plot.body << (i ? " " : "") << px(plot.map_x(sweep[i].ratio)) << ',' << px(plot.map_y(sweep[i].score[c]));
      }
      plot.body << "\"/>\n";
    }
    plot.legend_entry(static_cast<int>(c), kPalette[c], std::string(kMiaChannelNames[c]));
  }
  return plot.finish();
}

void emit_sweep_svg(std::span<const MiaReport> sweep, const std::filesystem::path& path) {
  write_text(path, render_sweep(sweep));
}

}  // namespace unpruning
