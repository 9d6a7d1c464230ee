#pragma once

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "sts/error.hpp"
#include "sts/pipeline.hpp"

namespace sts {

namespace detail {
inline std::string fixed(double v, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v == 0.0 ? 0.0 : v);
  return buf;
}

inline void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw Error(ErrorKind::Io, "cannot open " + path.string() + " for writing");
  f << content;
  if (!f.flush()) throw Error(ErrorKind::Io, "write failed for " + path.string());
}
}  // namespace detail

inline std::string aligned_csv(const AlignedTrial& at) {
  std::string out = "t_ms,front_left_kg,front_right_kg,rear_left_kg,rear_right_kg,total_kg\n";
  const LoadSeries total = total_load(at);
  for (std::size_t k = 0; k < at.frames(); ++k) {
    out += detail::fixed(at.t_ms[k], 6);
    for (double v : at.loads[k]) out += "," + detail::fixed(v, 6);
    out += "," + detail::fixed(total.kg[k], 6) + "\n";
  }
  return out;
}

inline void write_csv(const AlignedTrial& at, const std::filesystem::path& path) {
  detail::write_file(path, aligned_csv(at));
}

/// SVG line chart: one polyline per corner plus total load. Output depends
/// only on the trial, so identical input gives identical bytes.
inline std::string plot_svg(const AlignedTrial& at) {
  require(at.frames() > 0, "cannot plot an empty trial");
  constexpr double W = 800, H = 420, left = 60, right = 150, top = 40, bottom = 50;
  const double pw = W - left - right, ph = H - top - bottom;
  const LoadSeries total = total_load(at);

  double tmin = at.t_ms.front(), tmax = at.t_ms.back();
  if (tmax <= tmin) tmax = tmin + 1.0;
  double ymin = 0.0, ymax = 1.0;
  for (std::size_t k = 0; k < at.frames(); ++k) {
    for (double v : at.loads[k]) ymin = std::min(ymin, v);
    ymax = std::max(ymax, total.kg[k]);
  }
  ymax *= 1.05;
  auto px = [&](double t) { return left + (t - tmin) / (tmax - tmin) * pw; };
  auto py = [&](double v) { return top + (1.0 - (v - ymin) / (ymax - ymin)) * ph; };

  std::ostringstream s;
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" viewBox=\"0 0 " << W
    << " " << H << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  s << "<rect x=\"0\" y=\"0\" width=\"" << W << "\" height=\"" << H << "\" fill=\"white\"/>\n";
  s << "<text x=\"" << left << "\" y=\"24\" font-size=\"14\">Trial " << at.meta.trial_id << " (user "
    << at.meta.user_id << ", " << detail::fixed(at.grid_rate, 0) << " Hz)</text>\n";
  s << "<rect x=\"" << left << "\" y=\"" << top << "\" width=\"" << pw << "\" height=\"" << ph
    << "\" fill=\"none\" stroke=\"#444\"/>\n";

  constexpr int ticks = 5;
  for (int i = 0; i <= ticks; ++i) {
    const double v = ymin + (ymax - ymin) * i / ticks;
    const double t = tmin + (tmax - tmin) * i / ticks;
    s << "<text x=\"" << left - 6 << "\" y=\"" << detail::fixed(py(v) + 4, 2) << "\" text-anchor=\"end\">"
      << detail::fixed(v, 1) << "</text>\n";
    s << "<text x=\"" << detail::fixed(px(t), 2) << "\" y=\"" << top + ph + 18 << "\" text-anchor=\"middle\">"
      << detail::fixed(t / 1000.0, 1) << "</text>\n";
  }
  s << "<text x=\"" << left + pw / 2 << "\" y=\"" << H - 10 << "\" text-anchor=\"middle\">time (s)</text>\n";
  s << "<text x=\"16\" y=\"" << top + ph / 2 << "\" transform=\"rotate(-90 16 " << top + ph / 2
    << ")\" text-anchor=\"middle\">load (kg)</text>\n";

  static constexpr const char* colors[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#000000"};
  static constexpr const char* names[] = {"front_left", "front_right", "rear_left", "rear_right", "total"};
  for (std::size_t series = 0; series < 5; ++series) {
    s << "<polyline id=\"" << names[series] << "\" fill=\"none\" stroke=\"" << colors[series]
      << "\" stroke-width=\"" << (series == 4 ? "2" : "1.2") << "\" points=\"";
    for (std::size_t k = 0; k < at.frames(); ++k) {
      const double v = series == 4 ? total.kg[k] : at.loads[k][series];
      if (k) s << ' ';
      s << detail::fixed(px(at.t_ms[k]), 2) << ',' << detail::fixed(py(v), 2);
    }
    s << "\"/>\n";
    const double ly = top + 14 + 18.0 * static_cast<double>(series);
    s << "<line x1=\"" << left + pw + 12 << "\" y1=\"" << ly - 4 << "\" x2=\"" << left + pw + 32 << "\" y2=\"" << ly - 4
      << "\" stroke=\"" << colors[series] << "\" stroke-width=\"2\"/>\n";
    s << "<text x=\"" << left + pw + 38 << "\" y=\"" << ly << "\">" << names[series] << "</text>\n";
  }
  s << "</svg>\n";
  return s.str();
}

inline void emit_plot(const AlignedTrial& at, const std::filesystem::path& path) {
  detail::write_file(path, plot_svg(at));
}

}  // namespace sts
