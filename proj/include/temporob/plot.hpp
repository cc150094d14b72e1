// Copyright 2026 The temporob Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


// Minimal SVG charts for the report and gap subcommands. Output is plain
// text with fixed number formatting, so identical data gives identical files.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <span>
#include <string>
#include <vector>

namespace temporob::plot {

namespace detail {

inline std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

inline std::string escape(const std::string& s) {
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

inline std::string text(double x, double y, const std::string& s, const char* anchor = "middle",
                        int size = 12) {
  return "<text x=\"" + num(x) + "\" y=\"" + num(y) + "\" font-size=\"" + std::to_string(size) +
         "\" text-anchor=\"" + anchor + "\">" + escape(s) + "</text>\n";
}

inline std::string rect(double x, double y, double w, double h, const char* fill) {
  return "<rect x=\"" + num(x) + "\" y=\"" + num(y) + "\" width=\"" + num(w) + "\" height=\"" +
         num(h) + "\" fill=\"" + fill + "\"/>\n";
}

inline std::string line(double x1, double y1, double x2, double y2) {
  return "<line x1=\"" + num(x1) + "\" y1=\"" + num(y1) + "\" x2=\"" + num(x2) + "\" y2=\"" +
         num(y2) + "\" stroke=\"black\"/>\n";
}

inline std::string header(int w, int h) {
  return "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(w) +
         "\" height=\"" + std::to_string(h) + "\" viewBox=\"0 0 " + std::to_string(w) + " " +
         std::to_string(h) + "\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
}

inline constexpr const char* kPalette[] = {"#4c72b0", "#dd8452", "#55a868", "#c44e52", "#8172b3"};

}  // namespace detail

struct Series {
  std::string name;
  std::vector<double> values;  // NaN marks a missing bar
};

/// Grouped bars on a [0, 1] axis, one group per category.
inline std::string grouped_bars(const std::string& title, std::span<const std::string> categories,
                                std::span<const Series> series) {
  using namespace detail;
  const double left = 60, top = 40, plot_h = 260, group_w = 40.0 + 30.0 * series.size();
  const double width = left + group_w * static_cast<double>(std::max<std::size_t>(1, categories.size())) + 140;
  const double height = top + plot_h + 60;
  std::string s = header(static_cast<int>(width), static_cast<int>(height));
  s += text(width / 2, 22, title, "middle", 14);
  s += line(left, top, left, top + plot_h);
  s += line(left, top + plot_h, width - 130, top + plot_h);
  for (int t = 0; t <= 4; ++t) {
    const double y = top + plot_h * (1.0 - t / 4.0);
    s += line(left - 4, y, left, y);
    s += text(left - 8, y + 4, num(t / 4.0), "end", 10);
  }
  for (std::size_t c = 0; c < categories.size(); ++c) {
    const double gx = left + group_w * static_cast<double>(c) + 20;
    for (std::size_t k = 0; k < series.size(); ++k) {
      const double v = c < series[k].values.size() ? series[k].values[c] : NAN;
      if (std::isnan(v)) continue;
      const double h = plot_h * std::clamp(v, 0.0, 1.0);
      s += rect(gx + 30.0 * static_cast<double>(k), top + plot_h - h, 26, h, kPalette[k % 5]);
    }
    s += text(gx + 15.0 * static_cast<double>(series.size()), top + plot_h + 18, categories[c]);
  }
  for (std::size_t k = 0; k < series.size(); ++k) {
    const double y = top + 20.0 * static_cast<double>(k);
    s += rect(width - 120, y, 12, 12, kPalette[k % 5]);
    s += text(width - 102, y + 11, series[k].name, "start", 11);
  }
  return s + "</svg>\n";
}

/// Histogram with `bins` equal-width bins spanning the data range.
inline std::string histogram(const std::string& title, const std::string& xlabel,
                             std::span<const double> values, std::size_t bins = 20) {
  using namespace detail;
  const double left = 60, top = 40, plot_w = 480, plot_h = 260;
  std::string s = header(static_cast<int>(left + plot_w + 30), static_cast<int>(top + plot_h + 60));
  s += text(left + plot_w / 2, 22, title, "middle", 14);
  s += line(left, top, left, top + plot_h);
  s += line(left, top + plot_h, left + plot_w, top + plot_h);
  s += text(left + plot_w / 2, top + plot_h + 40, xlabel);
  if (values.empty() || bins == 0) return s + text(left + plot_w / 2, top + plot_h / 2, "no data") + "</svg>\n";
  auto [mn, mx] = std::minmax_element(values.begin(), values.end());
  double lo = *mn, hi = *mx;
  if (hi - lo < 1e-12) {
    lo -= 0.5;
    hi += 0.5;
  }
  std::vector<std::size_t> counts(bins, 0);
  for (double v : values) {
    auto b = static_cast<std::size_t>((v - lo) / (hi - lo) * static_cast<double>(bins));
    ++counts[std::min(b, bins - 1)];
  }
  const double peak = static_cast<double>(*std::max_element(counts.begin(), counts.end()));
  const double bw = plot_w / static_cast<double>(bins);
  for (std::size_t b = 0; b < bins; ++b) {
    const double h = plot_h * static_cast<double>(counts[b]) / peak;
    s += rect(left + bw * static_cast<double>(b) + 1, top + plot_h - h, bw - 2, h, kPalette[0]);
  }
  s += text(left, top + plot_h + 16, num(lo), "middle", 10);
  s += text(left + plot_w, top + plot_h + 16, num(hi), "middle", 10);
  if (lo < 0.0 && hi > 0.0) {
    const double zx = left + plot_w * (-lo) / (hi - lo);
    s += "<line x1=\"" + num(zx) + "\" y1=\"" + num(top) + "\" x2=\"" + num(zx) + "\" y2=\"" +
         num(top + plot_h) + "\" stroke=\"gray\" stroke-dasharray=\"4 3\"/>\n";
  }
  s += text(left - 8, top + 4, std::to_string(static_cast<std::size_t>(peak)), "end", 10);
  return s + "</svg>\n";
}

}  // namespace temporob::plot
