#pragma once

// Minimal deterministic SVG line charts: stacked panels, each with one or
// more polylines sharing an x axis.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

namespace stockbot::app::svg {

struct Series {
  std::string label;
  std::string color;
  std::vector<double> values;
};

struct Panel {
  std::string title;
  std::vector<Series> series;
};

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

inline std::string num(double x) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", x);
  return buf;
}

inline std::string render(const std::string& title, const std::vector<Panel>& panels, const std::string& x_first = "",
                          const std::string& x_last = "") {
  constexpr double W = 900, PH = 260, ML = 70, MR = 20, MT = 30, GAP = 40;
  const double H = MT + static_cast<double>(panels.size()) * (PH + GAP);
  std::string out = "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  out += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(W) + "\" height=\"" + num(H) +
         "\" viewBox=\"0 0 " + num(W) + " " + num(H) + "\">\n";
  out += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out += "<text x=\"" + num(W / 2) + "\" y=\"20\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"14\">" +
         escape(title) + "</text>\n";
  for (std::size_t p = 0; p < panels.size(); ++p) {
    const Panel& panel = panels[p];
    const double top = MT + static_cast<double>(p) * (PH + GAP) + 20;
    const double h = PH - 20, w = W - ML - MR;
    double lo = INFINITY, hi = -INFINITY;
    std::size_t n = 0;
    for (const auto& s : panel.series) {
      for (double v : s.values) {
        if (!std::isfinite(v)) continue;
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
      n = std::max(n, s.values.size());
    }
    if (!(lo <= hi)) lo = 0, hi = 1;
    if (hi - lo < 1e-12) lo -= 0.5, hi += 0.5;
    out += "<g>\n";
    out += "<text x=\"" + num(ML) + "\" y=\"" + num(top - 6) + "\" font-family=\"sans-serif\" font-size=\"12\">" +
           escape(panel.title) + "</text>\n";
    out += "<rect x=\"" + num(ML) + "\" y=\"" + num(top) + "\" width=\"" + num(w) + "\" height=\"" + num(h) +
           "\" fill=\"none\" stroke=\"#888\"/>\n";
    out += "<text x=\"" + num(ML - 6) + "\" y=\"" + num(top + 10) +
           "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"10\">" + num(hi) + "</text>\n";
    out += "<text x=\"" + num(ML - 6) + "\" y=\"" + num(top + h) +
           "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"10\">" + num(lo) + "</text>\n";
    if (!x_first.empty()) {
      out += "<text x=\"" + num(ML) + "\" y=\"" + num(top + h + 14) + "\" font-family=\"sans-serif\" font-size=\"10\">" +
             escape(x_first) + "</text>\n";
      out += "<text x=\"" + num(ML + w) + "\" y=\"" + num(top + h + 14) +
             "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"10\">" + escape(x_last) + "</text>\n";
    }
    for (std::size_t si = 0; si < panel.series.size(); ++si) {
      const Series& s = panel.series[si];
      std::string pts;
      for (std::size_t i = 0; i < s.values.size(); ++i) {
        if (!std::isfinite(s.values[i])) continue;
        const double x = ML + (n > 1 ? w * static_cast<double>(i) / static_cast<double>(n - 1) : 0.0);
        const double y = top + h - h * (s.values[i] - lo) / (hi - lo);
        if (!pts.empty()) pts += ' ';
        pts += num(x) + "," + num(y);
      }
      out += "<polyline fill=\"none\" stroke=\"" + escape(s.color) + "\" stroke-width=\"1.2\" points=\"" + pts +
             "\"/>\n";
      const double ly = top + 14 + 14 * static_cast<double>(si);
      out += "<text x=\"" + num(ML + w - 8) + "\" y=\"" + num(ly) + "\" text-anchor=\"end\" fill=\"" + escape(s.color) +
             "\" font-family=\"sans-serif\" font-size=\"11\">" + escape(s.label) + "</text>\n";
    }
    out += "</g>\n";
  }
  out += "</svg>\n";
  return out;
}

}  // namespace stockbot::app::svg
