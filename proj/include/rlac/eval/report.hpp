#pragma once

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "rlac/errors.hpp"
#include "rlac/eval/harness.hpp"

namespace rlac::eval {

namespace fs = std::filesystem;

inline std::string fmt(double v, const char* spec = "%.12g") {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

inline void write_text(const fs::path& path, const std::string& text) {
  std::error_code ec;
  if (path.has_parent_path()) fs::create_directories(path.parent_path(), ec);
  if (ec) throw IoError("cannot create directory " + path.parent_path().string() + ": " + ec.message());
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open " + path.string() + " for writing");
  f << text;
  f.flush();
  if (!f) throw IoError("write failed for " + path.string());
}

inline std::vector<EvalRecord> sorted_records(std::span<const EvalRecord> records) {
  std::vector<EvalRecord> v(records.begin(), records.end());
  std::sort(v.begin(), v.end(), [](const EvalRecord& a, const EvalRecord& b) {
    return std::tie(a.controller, a.seed, a.magnitude, a.length, a.cart_mass) <
           std::tie(b.controller, b.seed, b.magnitude, b.length, b.cart_mass);
  });
  return v;
}

inline std::string impulse_csv(std::span<const EvalRecord> records) {
  std::string out = "controller,seed,magnitude,episodes,deaths,death_rate,mean_total_cost\n";
  for (const EvalRecord& r : sorted_records(records)) {
    out += r.controller + "," + std::to_string(r.seed) + "," + fmt(r.magnitude) + "," + std::to_string(r.episodes) +
           "," + std::to_string(r.deaths) + "," + fmt(r.death_rate) + "," + fmt(r.mean_total_cost) + "\n";
  }
  return out;
}

inline std::string grid_csv(std::span<const EvalRecord> records) {
  std::string out = "controller,seed,l,m_c,episodes,deaths,death_rate,mean_total_cost\n";
  for (const EvalRecord& r : sorted_records(records)) {
    out += r.controller + "," + std::to_string(r.seed) + "," + fmt(r.length) + "," + fmt(r.cart_mass) + "," +
           std::to_string(r.episodes) + "," + std::to_string(r.deaths) + "," + fmt(r.death_rate) + "," +
           fmt(r.mean_total_cost) + "\n";
  }
  return out;
}

namespace svg {

inline const char* color(std::size_t i) {
  static const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#17becf"};
  return palette[i % (sizeof palette / sizeof *palette)];
}

inline std::string escape(const std::string& s) {
  std::string out;
  for (char ch : s) {
    switch (ch) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += ch;
    }
  }
  return out;
}

inline std::string header(double w, double h) {
  return "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + fmt(w) + "\" height=\"" + fmt(h) +
         "\" viewBox=\"0 0 " + fmt(w) + " " + fmt(h) + "\" font-family=\"sans-serif\" font-size=\"12\">\n" +
         "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
}

inline std::string text(double x, double y, const std::string& s, const char* anchor = "middle") {
  return "<text x=\"" + fmt(x, "%.2f") + "\" y=\"" + fmt(y, "%.2f") + "\" text-anchor=\"" + anchor + "\">" +
         escape(s) + "</text>\n";
}

// White-to-red ramp for t in [0, 1].
inline std::string heat(double t) {
  t = std::clamp(t, 0.0, 1.0);
  const int g = static_cast<int>(std::lround(255.0 * (1.0 - t)));
  char buf[16];
  std::snprintf(buf, sizeof buf, "#ff%02x%02x", g, g);
  return buf;
}

}  // namespace svg

// Death rate against impulse magnitude, mean across seeds with a 1-SD band.
inline std::string impulse_svg(std::span<const EvalRecord> records) {
  const std::vector<PointSummary> pts = summarize(records);
  std::map<std::string, std::vector<const PointSummary*>> by_controller;
  double lo = 0.0, hi = 1.0;
  bool first = true;
  for (const PointSummary& p : pts) {
    by_controller[p.controller].push_back(&p);
    if (first) lo = hi = p.magnitude;
    lo = std::min(lo, p.magnitude);
    hi = std::max(hi, p.magnitude);
    first = false;
  }
  if (hi == lo) hi = lo + 1.0;
  const double W = 640, H = 420, L = 60, R = 150, T = 30, B = 50;
  const double pw = W - L - R, ph = H - T - B;
  auto px = [&](double m) { return L + pw * (m - lo) / (hi - lo); };
  auto py = [&](double d) { return T + ph * (1.0 - std::clamp(d, 0.0, 1.0)); };

  std::string out = svg::header(W, H);
  out += "<rect x=\"" + fmt(L) + "\" y=\"" + fmt(T) + "\" width=\"" + fmt(pw) + "\" height=\"" + fmt(ph) +
         "\" fill=\"none\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double d = i / 4.0;
    out += svg::text(L - 6, py(d) + 4, fmt(d, "%.2f"), "end");
  }
  std::set<double> ticks;
  for (const PointSummary& p : pts) ticks.insert(p.magnitude);
  for (double m : ticks) out += svg::text(px(m), T + ph + 18, fmt(m, "%g"));
  out += svg::text(L + pw / 2, H - 10, "impulse magnitude");
  out += "<text x=\"16\" y=\"" + fmt(T + ph / 2, "%.2f") + "\" text-anchor=\"middle\" transform=\"rotate(-90 16 " +
         fmt(T + ph / 2, "%.2f") + ")\">death rate</text>\n";

  std::size_t ci = 0;
  for (const auto& [name, series] : by_controller) {
    const char* col = svg::color(ci);
    std::string band, line;
    for (const PointSummary* p : series) band += fmt(px(p->magnitude), "%.2f") + "," + fmt(py(p->mean_death_rate + p->sd_death_rate), "%.2f") + " ";
    for (auto it = series.rbegin(); it != series.rend(); ++it)
      band += fmt(px((*it)->magnitude), "%.2f") + "," + fmt(py((*it)->mean_death_rate - (*it)->sd_death_rate), "%.2f") + " ";
    for (const PointSummary* p : series) line += fmt(px(p->magnitude), "%.2f") + "," + fmt(py(p->mean_death_rate), "%.2f") + " ";
    out += "<polygon points=\"" + band + "\" fill=\"" + col + "\" fill-opacity=\"0.2\" stroke=\"none\"/>\n";
    out += "<polyline points=\"" + line + "\" fill=\"none\" stroke=\"" + col + "\" stroke-width=\"2\"/>\n";
    const double ly = T + 10 + 18.0 * static_cast<double>(ci);
    out += "<line x1=\"" + fmt(L + pw + 12) + "\" y1=\"" + fmt(ly) + "\" x2=\"" + fmt(L + pw + 32) + "\" y2=\"" +
           fmt(ly) + "\" stroke=\"" + col + "\" stroke-width=\"2\"/>\n";
    out += svg::text(L + pw + 38, ly + 4, name, "start");
    ++ci;
  }
  out += "</svg>\n";
  return out;
}

// One heatmap panel per controller over (l, m_c), seeds averaged.
inline std::string grid_svg(std::span<const EvalRecord> records, bool total_cost) {
  const std::vector<PointSummary> pts = summarize(records);
  std::set<double> ls, ms;
  std::map<std::string, std::map<std::pair<double, double>, double>> panels;
  double vmax = 0.0;
  for (const PointSummary& p : pts) {
    ls.insert(p.length);
    ms.insert(p.cart_mass);
    const double v = total_cost ? p.mean_total_cost : p.mean_death_rate;
    panels[p.controller][{p.length, p.cart_mass}] = v;
    vmax = std::max(vmax, v);
  }
  const double scale = total_cost ? (vmax > 0.0 ? vmax : 1.0) : 1.0;
  const std::vector<double> lv(ls.begin(), ls.end()), mv(ms.begin(), ms.end());
  const double cell = std::max(12.0, std::min(40.0, 400.0 / static_cast<double>(std::max(lv.size(), mv.size()))));
  const double pw = cell * static_cast<double>(lv.size()), ph = cell * static_cast<double>(mv.size());
  const double L = 60, T = 40, gap = 50, B = 60;
  const double W = L + static_cast<double>(panels.size()) * (pw + gap) + 20, H = T + ph + B;

  std::string out = svg::header(W, H);
  std::size_t k = 0;
  for (const auto& [name, cells] : panels) {
    const double x0 = L + static_cast<double>(k) * (pw + gap);
    out += svg::text(x0 + pw / 2, T - 14, name + (total_cost ? " total cost" : " death rate"));
    for (std::size_t i = 0; i < lv.size(); ++i) {
      for (std::size_t j = 0; j < mv.size(); ++j) {
        const auto it = cells.find({lv[i], mv[j]});
        const double x = x0 + cell * static_cast<double>(i), y = T + ph - cell * static_cast<double>(j + 1);
        const std::string fill = it == cells.end() ? "#dddddd" : svg::heat(it->second / scale);
        out += "<rect x=\"" + fmt(x, "%.2f") + "\" y=\"" + fmt(y, "%.2f") + "\" width=\"" + fmt(cell, "%.2f") +
               "\" height=\"" + fmt(cell, "%.2f") + "\" fill=\"" + fill + "\" stroke=\"#888888\" stroke-width=\"0.5\">";
        if (it != cells.end()) out += "<title>" + fmt(it->second, "%.4g") + "</title>";
        out += "</rect>\n";
      }
    }
    for (std::size_t i = 0; i < lv.size(); ++i)
      if (lv.size() <= 6 || i % 3 == 0) out += svg::text(x0 + cell * (static_cast<double>(i) + 0.5), T + ph + 14, fmt(lv[i], "%g"));
    for (std::size_t j = 0; j < mv.size(); ++j)
      out += svg::text(x0 - 4, T + ph - cell * (static_cast<double>(j) + 0.5) + 4, fmt(mv[j], "%g"), "end");
    out += svg::text(x0 + pw / 2, T + ph + 32, "l");
    ++k;
  }
  out += svg::text(16, T + ph / 2, "m_c");
  out += svg::text(L, H - 8, total_cost ? "scale max " + fmt(scale, "%.4g") : "scale 0 to 1", "start");
  out += "</svg>\n";
  return out;
}

// Writes the CSV for one experiment and, for nonempty records, its plots.
// Returns the written paths.
inline std::vector<fs::path> emit_reports(Experiment kind, std::span<const EvalRecord> records,
                                          const fs::path& out_dir) {
  std::vector<EvalRecord> own;
  for (const EvalRecord& r : records)
    if (r.experiment == kind) own.push_back(r);
  std::vector<fs::path> written;
  auto put = [&](const std::string& name, const std::string& body) {
    write_text(out_dir / name, body);
    written.push_back(out_dir / name);
  };
  if (kind == Experiment::kImpulse) {
    put("impulse.csv", impulse_csv(own));
    if (!own.empty()) put("impulse_death_rate.svg", impulse_svg(own));
  } else {
    put("grid.csv", grid_csv(own));
    if (!own.empty()) {
      put("grid_death_rate.svg", grid_svg(own, false));
      put("grid_total_cost.svg", grid_svg(own, true));
    }
  }
  return written;
}

}  // namespace rlac::eval
