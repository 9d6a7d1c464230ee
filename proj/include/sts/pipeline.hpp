#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sts/acquisition.hpp"
#include "sts/channel.hpp"
#include "sts/error.hpp"
#include "sts/sensor_model.hpp"

namespace sts {

/// Corner positions in the seat frame: x to the right, y to the front.
struct ChairGeometry {
  double width_m = 0.40;
  double depth_m = 0.38;

  void validate() const { require(width_m > 0.0 && depth_m > 0.0, "chair width and depth must be positive"); }

  std::array<double, 2> position(ChannelId c) const noexcept {
    return {is_left(c) ? -width_m / 2 : width_m / 2, is_front(c) ? depth_m / 2 : -depth_m / 2};
  }
};

struct TrialMeta {
  std::string trial_id;
  std::string user_id;
  std::optional<std::string> label;
  int nominal_rate = 10;

  friend bool operator==(const TrialMeta&, const TrialMeta&) = default;
};

using Frame = std::array<double, kNumChannels>;

/// Calibrated loads of all four corners on one uniform time grid.
struct AlignedTrial {
  double grid_rate = 10.0;
  std::vector<double> t_ms;
  std::vector<Frame> loads;  ///< kg, indexed by ChannelId
  TrialMeta meta;

  std::size_t frames() const noexcept { return t_ms.size(); }
};

/// A load signal with its timestamps.
struct LoadSeries {
  std::vector<double> t_ms;
  std::vector<double> kg;
};

/// Linear interpolation of each channel's calibrated kg onto a shared grid
/// spanning the channels' common time window. Nothing is extrapolated.
inline AlignedTrial resample_uniform(const TrialPacket& p, double grid_rate, double max_load_kg = kDefaultMaxLoadKg) {
  require(grid_rate > 0.0, "grid_rate must be positive");
  double start = -1e300, stop = 1e300;
  for (ChannelId c : kChannels) {
    const auto& s = p.channels[index_of(c)];
    if (s.size() < 2)
      throw Error(ErrorKind::InsufficientSamples, "channel " + std::string(channel_key(c)) + " needs at least 2 samples");
    start = std::max(start, static_cast<double>(s.front().t_ms));
    stop = std::min(stop, static_cast<double>(s.back().t_ms));
  }
  if (stop < start) throw Error(ErrorKind::NoOverlap, "channels share no common time window");

  const double step = 1000.0 / grid_rate;
  const auto rows = static_cast<std::size_t>(std::floor((stop - start) / step + 1e-9)) + 1;

  AlignedTrial out;
  out.grid_rate = grid_rate;
  out.meta = {p.trial_id, p.user_id, p.label, p.nominal_rate};
  out.t_ms.resize(rows);
  out.loads.resize(rows);
  for (std::size_t k = 0; k < rows; ++k) out.t_ms[k] = start + static_cast<double>(k) * step;

  for (ChannelId c : kChannels) {
    const auto& s = p.channels[index_of(c)];
    const Calibration& cal = p.calibration[index_of(c)];
    std::vector<double> kg(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) kg[i] = counts_to_kg(s[i].counts, cal, max_load_kg);
    std::size_t j = 0;
    for (std::size_t k = 0; k < rows; ++k) {
      const double t = out.t_ms[k];
      while (j + 2 < s.size() && static_cast<double>(s[j + 1].t_ms) < t) ++j;
      const double ta = static_cast<double>(s[j].t_ms), tb = static_cast<double>(s[j + 1].t_ms);
      double v;
      if (t <= ta) v = kg[j];
      else if (t >= tb) v = kg[j + 1];
      else v = kg[j] + (kg[j + 1] - kg[j]) * ((t - ta) / (tb - ta));
      out.loads[k][index_of(c)] = v;
    }
  }
  return out;
}

inline LoadSeries total_load(const AlignedTrial& at) {
  LoadSeries out{at.t_ms, std::vector<double>(at.frames())};
  for (std::size_t k = 0; k < at.frames(); ++k) {
    double sum = 0.0;
    for (double v : at.loads[k]) sum += v;
    out.kg[k] = sum;
  }
  return out;
}

struct CopPoint {
  double x_m = 0.0;
  double y_m = 0.0;
};

/// Load-weighted corner position per frame; nullopt where the (non-negative
/// part of the) load is at or below `load_floor_kg`.
inline std::vector<std::optional<CopPoint>> center_of_pressure(const AlignedTrial& at, const ChairGeometry& geom,
                                                               double load_floor_kg = 2.0) {
  geom.validate();
  std::vector<std::optional<CopPoint>> out(at.frames());
  for (std::size_t k = 0; k < at.frames(); ++k) {
    double sum = 0.0, mx = 0.0, my = 0.0;
    for (ChannelId c : kChannels) {
      const double w = std::max(0.0, at.loads[k][index_of(c)]);
      const auto pos = geom.position(c);
      sum += w;
      mx += w * pos[0];
      my += w * pos[1];
    }
    if (sum > load_floor_kg) out[k] = CopPoint{mx / sum, my / sum};
  }
  return out;
}

enum class TransitionKind { SitToStand, StandToSit };

constexpr std::string_view to_string(TransitionKind k) noexcept {
  return k == TransitionKind::SitToStand ? "sit_to_stand" : "stand_to_sit";
}

struct TransitionEvent {
  TransitionKind kind = TransitionKind::SitToStand;
  double t_start_ms = 0.0;
  double t_end_ms = 0.0;

  double duration_ms() const noexcept { return t_end_ms - t_start_ms; }
};

/// Hysteresis thresholds as fractions of body weight plus the minimum time a
/// state must hold to count.
struct DetectorConfig {
  double seated_fraction = 0.60;
  double standing_fraction = 0.15;
  double dwell_ms = 300.0;

  void validate() const {
    require(standing_fraction > 0.0 && standing_fraction < seated_fraction && seated_fraction < 1.5,
            "detector requires 0 < standing_fraction < seated_fraction");
    require(dwell_ms >= 0.0, "dwell_ms must be non-negative");
  }
};

/// Nearest-rank percentile (p in (0, 100]).
inline double percentile(std::span<const double> v, double p) {
  require(!v.empty(), "percentile of an empty series");
  std::vector<double> s(v.begin(), v.end());
  std::sort(s.begin(), s.end());
  const auto rank = static_cast<std::size_t>(std::ceil(p / 100.0 * static_cast<double>(s.size())));
  return s[std::clamp<std::size_t>(rank, 1, s.size()) - 1];
}

inline double estimate_body_weight(const LoadSeries& total) { return percentile(total.kg, 95.0); }

/// Segments the total-load series into seated and standing stretches and
/// reports each change between them. Event times are the interpolated
/// threshold crossings.
inline std::vector<TransitionEvent> detect_transitions(const LoadSeries& total,
                                                       std::optional<double> body_weight_kg = std::nullopt,
                                                       const DetectorConfig& cfg = {}) {
  cfg.validate();
  require(total.t_ms.size() == total.kg.size(), "series timestamps and values differ in length");
  const std::size_t n = total.kg.size();
  if (n < 2) return {};
  const double weight = body_weight_kg ? *body_weight_kg : estimate_body_weight(total);
  if (body_weight_kg) require(weight > 0.0, "body weight must be positive");
  if (!(weight > 0.0)) return {};
  const double hi = cfg.seated_fraction * weight;
  const double lo = cfg.standing_fraction * weight;
  const double step = (total.t_ms.back() - total.t_ms.front()) / static_cast<double>(n - 1);

  enum class Zone { Seated, Standing, Between };
  auto zone = [&](std::size_t i) {
    if (total.kg[i] >= hi) return Zone::Seated;
    if (total.kg[i] <= lo) return Zone::Standing;
    return Zone::Between;
  };

  struct Segment {
    Zone state;
    std::size_t first, last;
  };
  std::vector<Segment> segs;
  for (std::size_t i = 0; i < n;) {
    const Zone z = zone(i);
    std::size_t j = i;
    while (j + 1 < n && zone(j + 1) == z) ++j;
    const double span = static_cast<double>(j - i + 1) * step;
    if (z != Zone::Between && span + 1e-9 >= cfg.dwell_ms) {
      if (!segs.empty() && segs.back().state == z) segs.back().last = j;
      else segs.push_back({z, i, j});
    }
    i = j + 1;
  }

  auto crossing = [&](std::size_t a, double level) {
    const double ya = total.kg[a], yb = total.kg[a + 1];
    const double ta = total.t_ms[a], tb = total.t_ms[a + 1];
    if (ya == yb) return ta;
    return ta + (level - ya) / (yb - ya) * (tb - ta);
  };

  std::vector<TransitionEvent> events;
  for (std::size_t s = 1; s < segs.size(); ++s) {
    const Segment& from = segs[s - 1];
    const Segment& to = segs[s];
    if (from.state == Zone::Seated)
      events.push_back({TransitionKind::SitToStand, crossing(from.last, hi), crossing(to.first - 1, lo)});
    else
      events.push_back({TransitionKind::StandToSit, crossing(from.last, lo), crossing(to.first - 1, hi)});
  }
  return events;
}

struct StsScore {
  int reps_30s = 0;
  std::optional<double> five_reps_time_s;
  std::vector<double> sit_to_stand_ms;
  std::vector<double> stand_to_sit_ms;
};

/// 30-second chair-stand count and five-repetition time.
inline StsScore score_trial(std::span<const TransitionEvent> events, double window_ms = 30000.0) {
  StsScore sc;
  std::vector<const TransitionEvent*> rises;
  for (const auto& e : events) {
    if (e.kind == TransitionKind::SitToStand) {
      rises.push_back(&e);
      sc.sit_to_stand_ms.push_back(e.duration_ms());
      if (e.t_end_ms <= window_ms) ++sc.reps_30s;
    } else {
      sc.stand_to_sit_ms.push_back(e.duration_ms());
    }
  }
  if (rises.size() >= 5) sc.five_reps_time_s = (rises[4]->t_end_ms - rises[0]->t_start_ms) / 1000.0;
  return sc;
}

}  // namespace sts
