// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include "unitlens/errors.hpp"

namespace unitlens::analysis {

struct ScatterLabels {
  std::string title;
  std::string x_axis = "class selectivity";
  std::string y_axis = "RS";
};

/// Fixed plot geometry: a 640x480 canvas whose [0,1]^2 data square maps to
/// x in [kLeft, kRight] and y in [kBottom, kTop] (SVG y grows downward).
struct ScatterGeometry {
  static constexpr int kWidth = 640;
  static constexpr int kHeight = 480;
  static constexpr double kLeft = 70.0;
  static constexpr double kRight = 610.0;
  static constexpr double kTop = 40.0;
  static constexpr double kBottom = 420.0;

  static double px(double x) { return kLeft + x * (kRight - kLeft); }
  static double py(double y) { return kBottom - y * (kBottom - kTop); }
};

namespace detail {

inline std::string fmt3(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  return buf;
}

inline std::string xml_escape(const std::string& s) {
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

}  // namespace detail

/// Scatter plot of (x, y) points in [0,1]^2 as a standalone SVG document.
/// Output depends only on the arguments.
inline std::string scatter_svg(const std::vector<std::pair<double, double>>& points,
                               const ScatterLabels& labels) {
  using G = ScatterGeometry;
  if (points.empty()) throw ContractError("scatter plot needs at least one point");
  std::string offenders;
  for (std::size_t i = 0; i < points.size(); ++i) {
    const auto [x, y] = points[i];
    if (!(x >= 0.0 && x <= 1.0 && y >= 0.0 && y <= 1.0)) {
      offenders += (offenders.empty() ? "" : ", ") + std::to_string(i) + " (" +
                   detail::fmt3(x) + ", " + detail::fmt3(y) + ")";
    }
  }
  if (!offenders.empty()) throw ContractError("scatter points outside [0,1]^2: " + offenders);

  std::string s;
  s += "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  s += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"640\" height=\"480\" "
       "viewBox=\"0 0 640 480\">\n";
  s += "<rect x=\"0\" y=\"0\" width=\"640\" height=\"480\" fill=\"white\"/>\n";
  // axes box and ticks
  s += "<rect x=\"" + detail::fmt3(G::kLeft) + "\" y=\"" + detail::fmt3(G::kTop) + "\" width=\"" +
       detail::fmt3(G::kRight - G::kLeft) + "\" height=\"" + detail::fmt3(G::kBottom - G::kTop) +
       "\" fill=\"none\" stroke=\"black\"/>\n";
  for (int t = 0; t <= 5; ++t) {
    const double v = t / 5.0;
    const std::string tick = detail::fmt3(v).substr(0, 3);
    s += "<text x=\"" + detail::fmt3(G::px(v)) + "\" y=\"" + detail::fmt3(G::kBottom + 18) +
         "\" font-size=\"12\" text-anchor=\"middle\">" + tick + "</text>\n";
    s += "<text x=\"" + detail::fmt3(G::kLeft - 8) + "\" y=\"" + detail::fmt3(G::py(v) + 4) +
         "\" font-size=\"12\" text-anchor=\"end\">" + tick + "</text>\n";
  }
  s += "<text x=\"" + detail::fmt3(0.5 * (G::kLeft + G::kRight)) +
       "\" y=\"465\" font-size=\"14\" text-anchor=\"middle\">" + detail::xml_escape(labels.x_axis) +
       "</text>\n";
  s += "<text x=\"20\" y=\"" + detail::fmt3(0.5 * (G::kTop + G::kBottom)) +
       "\" font-size=\"14\" text-anchor=\"middle\" transform=\"rotate(-90 20 " +
       detail::fmt3(0.5 * (G::kTop + G::kBottom)) + ")\">" + detail::xml_escape(labels.y_axis) +
       "</text>\n";
  if (!labels.title.empty()) {
    s += "<text x=\"320\" y=\"24\" font-size=\"16\" text-anchor=\"middle\">" +
         detail::xml_escape(labels.title) + "</text>\n";
  }
  for (const auto& [x, y] : points) {
    s += "<circle cx=\"" + detail::fmt3(G::px(x)) + "\" cy=\"" + detail::fmt3(G::py(y)) +
         "\" r=\"3\" fill=\"steelblue\" fill-opacity=\"0.7\"/>\n";
  }
  s += "</svg>\n";
  return s;
}

inline void scatter_plot(const std::vector<std::pair<double, double>>& points,
                         const ScatterLabels& labels, const std::filesystem::path& path) {
  const std::string svg = scatter_svg(points, labels);
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << svg;
}

}  // namespace unitlens::analysis
