#pragma once

// Deterministic SVG gantt rendering of a simulated timeline: one row per
// device, one rectangle per task, colored by task kind, preloaded work drawn
// with a dashed outline. Output depends only on the timeline contents.

#include <algorithm>
#include <cstdio>
#include <string>

#include "ppsim/types.hpp"

namespace ppsim {

namespace gantt_detail {

inline const char* kind_fill(Kind k) {
  switch (k) {
    case Kind::Forward: return "#4e86c8";
    case Kind::Backward: return "#e0a040";
    case Kind::Reduce: return "#9c5fc0";
    case Kind::Broadcast: return "#58b08a";
    case Kind::Update: return "#c05f5f";
  }
  return "#888888";
}

inline std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.3f", v);
  return buf;
}

}  // namespace gantt_detail

inline std::string gantt_svg(const Timeline& t) {
  using gantt_detail::fmt;
  const int rows = static_cast<int>(t.per_device.size());
  const double row_h = 26.0, row_gap = 6.0, left = 64.0, top = 28.0;
  const double plot_w = 1100.0;
  const double span = std::max(1.0, t.makespan.to_double());
  const double sx = plot_w / span;
  const double height = top + rows * (row_h + row_gap) + 44.0;
  const double width = left + plot_w + 20.0;

  std::string s;
  s += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + fmt(width) + "\" height=\"" +
       fmt(height) + "\" viewBox=\"0 0 " + fmt(width) + " " + fmt(height) + "\">\n";
  s += "<style>text{font:11px sans-serif;fill:#222}rect.task{stroke:#00000033;stroke-width:0.5}"
       "rect.preload{stroke:#000;stroke-width:1;stroke-dasharray:3 2}</style>\n";
  s += "<rect width=\"100%\" height=\"100%\" fill=\"#fcfcf8\"/>\n";
  s += "<text x=\"" + fmt(left) + "\" y=\"16\">" + std::string(policy_name(t.policy)) +
       "  depth=" + std::to_string(t.depth) + "  devices=" + std::to_string(t.devices) +
       "  makespan=" + t.makespan.str() + "</text>\n";

  // Time axis: ~12 integral ticks.
  const double tick = std::max(1.0, std::floor(span / 12.0));
  for (double x = 0.0; x <= span + 1e-9; x += tick) {
    const double px = left + x * sx;
    s += "<line x1=\"" + fmt(px) + "\" y1=\"" + fmt(top - 4) + "\" x2=\"" + fmt(px) +
         "\" y2=\"" + fmt(top + rows * (row_h + row_gap)) +
         "\" stroke=\"#dddddd\" stroke-width=\"1\"/>\n";
    s += "<text x=\"" + fmt(px + 2) + "\" y=\"" + fmt(top + rows * (row_h + row_gap) + 14) +
         "\">" + fmt(x) + "</text>\n";
  }

  for (int dev = 0; dev < rows; ++dev) {
    const double y = top + dev * (row_h + row_gap);
    s += "<text x=\"6\" y=\"" + fmt(y + row_h * 0.65) + "\">dev " + std::to_string(dev) +
         "</text>\n";
    for (const auto& e : t.per_device[static_cast<std::size_t>(dev)]) {
      if (e.duration.num() == 0) continue;
      const double x = left + e.start.to_double() * sx;
      const double w = std::max(0.75, e.duration.to_double() * sx);
      s += "<rect class=\"" + std::string(e.preloaded ? "task preload" : "task") + "\" x=\"" +
           fmt(x) + "\" y=\"" + fmt(y) + "\" width=\"" + fmt(w) + "\" height=\"" + fmt(row_h) +
           "\" fill=\"" + gantt_detail::kind_fill(e.kind) + "\">";
      s += "<title>" + std::string(kind_name(e.kind)) + " mb=" + std::to_string(e.minibatch) +
           " stage=" + std::to_string(e.stage) + " pipe=" + std::to_string(e.pipeline) +
           " [" + e.start.str() + ", " + e.finish().str() + ")</title></rect>\n";
      if (w >= 14.0 && (e.kind == Kind::Forward || e.kind == Kind::Backward)) {
        s += "<text x=\"" + fmt(x + w / 2 - 4) + "\" y=\"" + fmt(y + row_h * 0.65) + "\">" +
             std::to_string(e.minibatch) + "</text>\n";
      }
    }
  }

  // Legend.
  double lx = left;
  const double ly = height - 18.0;
  for (Kind k : {Kind::Forward, Kind::Backward, Kind::Reduce, Kind::Broadcast, Kind::Update}) {
    s += "<rect x=\"" + fmt(lx) + "\" y=\"" + fmt(ly - 10) +
         "\" width=\"12\" height=\"12\" fill=\"" + gantt_detail::kind_fill(k) + "\"/>\n";
    s += "<text x=\"" + fmt(lx + 16) + "\" y=\"" + fmt(ly) + "\">" + kind_name(k) +
         "</text>\n";
    lx += 100.0;
  }
  s += "</svg>\n";
  return s;
}

}  // namespace ppsim
