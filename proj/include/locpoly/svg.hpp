#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "locpoly/error.hpp"
#include "locpoly/experiment.hpp"

namespace locpoly {

struct SvgOptions {
  int width = 800;
  int height = 560;
};

namespace detail {
inline std::string fixed2(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

inline std::string sci(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.0e", v);
  return buf;
}

inline constexpr std::array<const char*, 8> kPalette{"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728",
                                                     "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"};
} // namespace detail

/// Log-log plot of mean error against n: one series per D with standard
/// deviation bars, and a dashed reference line of slope -r_expected anchored
/// on the pooled fit.
inline std::string render_svg(const ResultTable& table, const std::optional<RateFit>& rate, const SvgOptions& opt = {}) {
  if (table.aggregates.empty()) throw Error(ErrorCode::NoData, "no aggregate rows to plot");
  require(opt.width >= 200 && opt.height >= 150, "plot must be at least 200x150");

  std::vector<int> D_order;
  std::map<int, std::vector<const AggregateRow*>> series;
  double lx_min = 1e300, lx_max = -1e300, ly_min = 1e300, ly_max = -1e300;
  for (const auto& a : table.aggregates) {
    if (!(a.mean_error > 0.0) || !std::isfinite(a.mean_error)) continue;
    if (!series.count(a.D)) D_order.push_back(a.D);
    series[a.D].push_back(&a);
    const double lx = std::log10(static_cast<double>(a.n));
    const double sd = std::sqrt(std::max(0.0, a.var_error));
    lx_min = std::min(lx_min, lx);
    lx_max = std::max(lx_max, lx);
    ly_min = std::min(ly_min, std::log10(a.mean_error));
    ly_max = std::max(ly_max, std::log10(a.mean_error + sd));
    if (a.mean_error - sd > 0.0) ly_min = std::min(ly_min, std::log10(a.mean_error - sd));
  }
  if (D_order.empty()) throw Error(ErrorCode::NoData, "no positive mean errors to plot on log axes");

  const double x0 = std::floor(lx_min), x1 = std::max(std::ceil(lx_max), x0 + 1.0);
  const double y0 = std::floor(ly_min), y1 = std::max(std::ceil(ly_max), y0 + 1.0);
  const double left = 80, right = opt.width - 130.0, top = 30, bottom = opt.height - 60.0;
  auto px = [&](double lx) { return left + (lx - x0) / (x1 - x0) * (right - left); };
  auto py = [&](double ly) { return bottom - (ly - y0) / (y1 - y0) * (bottom - top); };
  using detail::fixed2;

  std::ostringstream s;
  s << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
    << "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"" << opt.width << "\" height=\"" << opt.height
    << "\" viewBox=\"0 0 " << opt.width << ' ' << opt.height << "\">\n"
    << "<rect x=\"0\" y=\"0\" width=\"" << opt.width << "\" height=\"" << opt.height << "\" fill=\"white\"/>\n"
    << "<g font-family=\"sans-serif\" font-size=\"12\">\n";

  // Axes, grid and decade ticks.
  s << "<rect class=\"frame\" x=\"" << fixed2(left) << "\" y=\"" << fixed2(top) << "\" width=\"" << fixed2(right - left)
    << "\" height=\"" << fixed2(bottom - top) << "\" fill=\"none\" stroke=\"black\"/>\n";
  for (double t = x0; t <= x1 + 1e-9; t += 1.0) {
    s << "<line class=\"grid\" x1=\"" << fixed2(px(t)) << "\" y1=\"" << fixed2(top) << "\" x2=\"" << fixed2(px(t))
      << "\" y2=\"" << fixed2(bottom) << "\" stroke=\"#dddddd\"/>\n"
      << "<text class=\"xtick\" x=\"" << fixed2(px(t)) << "\" y=\"" << fixed2(bottom + 18) << "\" text-anchor=\"middle\">"
      << detail::sci(std::pow(10.0, t)) << "</text>\n";
  }
  for (double t = y0; t <= y1 + 1e-9; t += 1.0) {
    s << "<line class=\"grid\" x1=\"" << fixed2(left) << "\" y1=\"" << fixed2(py(t)) << "\" x2=\"" << fixed2(right)
      << "\" y2=\"" << fixed2(py(t)) << "\" stroke=\"#dddddd\"/>\n"
      << "<text class=\"ytick\" x=\"" << fixed2(left - 6) << "\" y=\"" << fixed2(py(t) + 4) << "\" text-anchor=\"end\">"
      << detail::sci(std::pow(10.0, t)) << "</text>\n";
  }
  s << "<text x=\"" << fixed2((left + right) / 2) << "\" y=\"" << fixed2(bottom + 42)
    << "\" text-anchor=\"middle\">n (samples)</text>\n"
    << "<text x=\"18\" y=\"" << fixed2((top + bottom) / 2) << "\" text-anchor=\"middle\" transform=\"rotate(-90 18 "
    << fixed2((top + bottom) / 2) << ")\">mean error</text>\n";

  for (std::size_t c = 0; c < D_order.size(); ++c) {
    const int D = D_order[c];
    const char* color = detail::kPalette[c % detail::kPalette.size()];
    s << "<polyline class=\"series\" data-D=\"" << D << "\" fill=\"none\" stroke=\"" << color
      << "\" stroke-width=\"1.5\" points=\"";
    bool first = true;
    for (const auto* a : series[D]) {
      s << (first ? "" : " ") << fixed2(px(std::log10(static_cast<double>(a->n)))) << ','
        << fixed2(py(std::log10(a->mean_error)));
      first = false;
    }
    s << "\"/>\n";
    for (const auto* a : series[D]) {
      const double sd = std::sqrt(std::max(0.0, a->var_error));
      const double lo = a->mean_error - sd > 0.0 ? std::max(std::log10(a->mean_error - sd), y0) : y0;
      const double x = px(std::log10(static_cast<double>(a->n)));
      s << "<line class=\"errorbar\" x1=\"" << fixed2(x) << "\" y1=\"" << fixed2(py(lo)) << "\" x2=\"" << fixed2(x)
        << "\" y2=\"" << fixed2(py(std::log10(a->mean_error + sd))) << "\" stroke=\"" << color << "\"/>\n";
    }
    const double ly = top + 16.0 + 18.0 * static_cast<double>(c);
    s << "<line x1=\"" << fixed2(right + 12) << "\" y1=\"" << fixed2(ly) << "\" x2=\"" << fixed2(right + 36) << "\" y2=\""
      << fixed2(ly) << "\" stroke=\"" << color << "\" stroke-width=\"1.5\"/>\n"
      << "<text x=\"" << fixed2(right + 42) << "\" y=\"" << fixed2(ly + 4) << "\">D = " << D << "</text>\n";
  }

  if (rate && std::isfinite(rate->slope)) {
    // ln e = intercept + slope ln n, pinned at the middle of the n range.
    const double mid = 0.5 * (lx_min + lx_max);
    const double l_mid = (rate->intercept + rate->slope * mid * std::log(10.0)) / std::log(10.0);
    auto ref = [&](double lx) { return l_mid - rate->r_expected * (lx - mid); };
    s << "<polyline class=\"reference\" fill=\"none\" stroke=\"black\" stroke-dasharray=\"6,4\" points=\""
      << fixed2(px(lx_min)) << ',' << fixed2(py(ref(lx_min))) << ' ' << fixed2(px(lx_max)) << ','
      << fixed2(py(ref(lx_max))) << "\"/>\n";
    const double ly = top + 16.0 + 18.0 * static_cast<double>(D_order.size());
    char label[64];
    std::snprintf(label, sizeof label, "slope -%.4f", rate->r_expected);
    s << "<line x1=\"" << fixed2(right + 12) << "\" y1=\"" << fixed2(ly) << "\" x2=\"" << fixed2(right + 36)
      << "\" y2=\"" << fixed2(ly) << "\" stroke=\"black\" stroke-dasharray=\"6,4\"/>\n"
      << "<text x=\"" << fixed2(right + 42) << "\" y=\"" << fixed2(ly + 4) << "\">" << label << "</text>\n";
  }
  s << "</g>\n</svg>\n";
  return s.str();
}

inline void emit_svg(const ResultTable& table, const std::optional<RateFit>& rate, const std::filesystem::path& path,
                     const SvgOptions& opt = {}) {
  const std::string doc = render_svg(table, rate, opt);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoError, "cannot open '" + path.string() + "' for writing");
  out << doc;
  if (!out) throw Error(ErrorCode::IoError, "write to '" + path.string() + "' failed");
}

} // namespace locpoly
