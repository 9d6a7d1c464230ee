#pragma once

// Helpers shared by the unit tests and the acceptance runner.

#include <cmath>
#include <string>
#include <vector>

#include "sts/acquisition.hpp"
#include "sts/motion_profile.hpp"
#include "sts/pipeline.hpp"
#include "sts/sensor_model.hpp"

namespace sts::testing {

inline TrialMetadata metadata(const std::string& trial_id, int rate = 10, Mode mode = Mode::Train,
                              std::optional<std::string> label = "moderate", const std::string& user = "U1") {
  TrialMetadata m;
  m.trial_id = trial_id;
  m.user_id = user;
  m.mode = mode;
  m.label = std::move(label);
  m.started_at = "2024-03-01T09:00:00.000Z";
  m.nominal_rate = rate;
  return m;
}

/// Simulates a chair session and packages the whole capture as one trial.
inline TrialPacket record_packet(const MotionProfile& profile, const DriftModel& drift, double duration_s, int rate,
                                 std::uint64_t seed, double jitter = 0.02,
                                 const std::string& trial_id = "5d4c3b2a-1f0e-4d9c-8b7a-6f5e4d3c2b1a") {
  const auto rec = simulate_chair(profile, default_calibration(), drift, duration_s, rate, seed, jitter);
  return assemble_trial(corrected_streams(rec), metadata(trial_id, rate), 0,
                        static_cast<std::int64_t>(std::llround(duration_s * 1000.0)));
}

/// Brisk profile that fits 15 repetitions into 30 s with 300 ms+ dwells.
inline MotionProfile brisk_profile(int reps, double weight = 70.0) {
  MotionProfile p;
  p.body_weight_kg = weight;
  p.lead_s = 0.5;
  p.descent_time_s = 0.5;
  p.sit_time_s = 0.45;
  p.rise_time_s = 0.5;
  p.stand_time_s = 0.45;
  p.forward_lean = 0.2;
  p.reps = reps;
  return p;
}

/// Solves smoothstep(x) = y on [0, 1] by bisection.
inline double smoothstep_inverse(double y) {
  double lo = 0.0, hi = 1.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (smoothstep(mid) < y ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

struct RiseTimes {
  double start_ms;  ///< load falls through the seated threshold
  double end_ms;    ///< load falls through the standing threshold
};

/// Closed-form threshold crossings of each programmed rise of a tremor-free
/// profile, for thresholds given as fractions of body weight.
inline std::vector<RiseTimes> analytic_rises(const MotionProfile& p, double seated = 0.60, double standing = 0.15) {
  const double xs = smoothstep_inverse(1.0 - seated);
  const double xe = smoothstep_inverse(1.0 - standing);
  std::vector<RiseTimes> out;
  for (int r = 0; r < p.reps; ++r) {
    const double t0 = p.lead_s + r * p.cycle_s() + p.descent_time_s + p.sit_time_s;
    out.push_back({1000.0 * (t0 + xs * p.rise_time_s), 1000.0 * (t0 + xe * p.rise_time_s)});
  }
  return out;
}

}  // namespace sts::testing
