#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <string>

#include "sts/channel.hpp"
#include "sts/error.hpp"
#include "sts/motion_profile.hpp"
#include "sts/rng.hpp"
#include "sts/sampler.hpp"

namespace sts {

/// Full positive 24-bit range at 25 kg.
inline constexpr double kDefaultScaleCountsPerKg = 335544.0;
inline constexpr double kDefaultMaxLoadKg = 50.0;
inline constexpr int kDefaultResolutionBits = 24;

struct GaugeChannel {
  ChannelId id = ChannelId::FrontLeft;
  double max_load_kg = kDefaultMaxLoadKg;
  int resolution_bits = kDefaultResolutionBits;
  int nominal_rate = 10;

  void validate() const {
    require(max_load_kg > 0.0, "max_load must be positive");
    require(resolution_bits >= 8 && resolution_bits <= 32, "resolution_bits must lie in [8, 32]");
    require(nominal_rate == 10 || nominal_rate == 80, "nominal_rate must be 10 or 80");
  }
};

/// Two-point affine calibration: kg = (counts - tare) / scale.
struct Calibration {
  std::int64_t tare_counts = 0;
  double scale_counts_per_kg = kDefaultScaleCountsPerKg;

  void validate() const {
    if (!(scale_counts_per_kg > 0.0) || !std::isfinite(scale_counts_per_kg))
      throw Error(ErrorKind::NonPositiveScale, "scale_counts_per_kg must be positive");
  }

  friend bool operator==(const Calibration&, const Calibration&) = default;
};

using ChairCalibration = PerChannel<Calibration>;

struct DriftModel {
  double drift_rate = 0.0;   ///< counts per second, shared by a gauge and its reference
  double noise_sigma = 0.0;  ///< std dev (counts) of one differential reading

  void validate() const { require(noise_sigma >= 0.0, "noise_sigma must be non-negative"); }
};

constexpr std::int64_t min_counts(int bits) noexcept { return -(std::int64_t{1} << (bits - 1)); }
constexpr std::int64_t max_counts(int bits) noexcept { return (std::int64_t{1} << (bits - 1)) - 1; }

/// Round half away from zero, then clamp to a signed `bits`-wide range.
inline std::int64_t saturate_counts(double counts, int bits) {
  require(bits >= 8 && bits <= 32, "bits must lie in [8, 32]");
  const auto lo = static_cast<double>(min_counts(bits));
  const auto hi = static_cast<double>(max_counts(bits));
  if (std::isnan(counts)) return 0;
  if (counts <= lo) return min_counts(bits);
  if (counts >= hi) return max_counts(bits);
  return std::llround(counts);
}

inline std::int64_t quantize(double ideal_kg, const Calibration& cal, int bits = kDefaultResolutionBits) {
  return saturate_counts(ideal_kg * cal.scale_counts_per_kg + static_cast<double>(cal.tare_counts), bits);
}

/// Converts counts to kg; raises OverRange beyond the gauge rating.
inline double counts_to_kg(std::int64_t raw, const Calibration& cal, double max_load_kg = kDefaultMaxLoadKg) {
  cal.validate();
  const double kg = static_cast<double>(raw - cal.tare_counts) / cal.scale_counts_per_kg;
  if (std::abs(kg) > max_load_kg)
    throw Error(ErrorKind::OverRange, "reading of " + std::to_string(kg) + " kg exceeds the " +
                                          std::to_string(max_load_kg) + " kg gauge rating");
  return kg;
}

/// Active minus reference; any disturbance common to both cancels exactly.
constexpr std::int64_t differential_read(std::int64_t active, std::int64_t reference) noexcept {
  return active - reference;
}

/// Drift plus white noise on an idealized chair. Reference gauges bear no
/// load; gauge k and reference k share one drift trajectory. Each gauge adds
/// independent noise of sigma/sqrt(2), so a differential reading has sigma.
class SimulatedChair {
public:
  SimulatedChair(LoadCurves curves, ChairCalibration cal, DriftModel drift,
                 int bits = kDefaultResolutionBits, PerChannel<std::int64_t> reference_tare = {})
      : curves_(std::move(curves)), cal_(cal), drift_(drift), bits_(bits), ref_tare_(reference_tare) {
    drift_.validate();
    for (const auto& c : cal_) c.validate();
  }

  GaugePair read(ChannelId c, double t_ms, Rng& noise) const {
    const double t_s = t_ms / 1000.0;
    const double drift = drift_.drift_rate * t_s;
    const double sigma = drift_.noise_sigma / std::numbers::sqrt2;
    const double n_active = noise.normal() * sigma;
    const double n_ref = noise.normal() * sigma;
    const Calibration& cal = cal_[index_of(c)];
    const double ideal = curves_.corner(c, t_s) * cal.scale_counts_per_kg + static_cast<double>(cal.tare_counts);
    return {saturate_counts(ideal + drift + n_active, bits_),
            saturate_counts(static_cast<double>(ref_tare_[index_of(c)]) + drift + n_ref, bits_)};
  }

  const LoadCurves& curves() const noexcept { return curves_; }
  const ChairCalibration& calibration() const noexcept { return cal_; }

private:
  LoadCurves curves_;
  ChairCalibration cal_;
  DriftModel drift_;
  int bits_;
  PerChannel<std::int64_t> ref_tare_;
};

/// Chair holding fixed per-corner loads, as during tare and known-mass
/// calibration. `truth` is the gauges' actual response.
class StaticLoadRig {
public:
  StaticLoadRig(PerChannel<double> loads_kg, ChairCalibration truth, DriftModel drift = {},
                int bits = kDefaultResolutionBits)
      : loads_(loads_kg), truth_(truth), drift_(drift), bits_(bits) {
    drift_.validate();
  }

  GaugePair read(ChannelId c, double t_ms, Rng& noise) const {
    const double drift = drift_.drift_rate * t_ms / 1000.0;
    const double sigma = drift_.noise_sigma / std::numbers::sqrt2;
    const double n_active = noise.normal() * sigma;
    const double n_ref = noise.normal() * sigma;
    const Calibration& cal = truth_[index_of(c)];
    const double ideal = loads_[index_of(c)] * cal.scale_counts_per_kg + static_cast<double>(cal.tare_counts);
    return {saturate_counts(ideal + drift + n_active, bits_), saturate_counts(drift + n_ref, bits_)};
  }

private:
  PerChannel<double> loads_;
  ChairCalibration truth_;
  DriftModel drift_;
  int bits_;
};

inline ChairCalibration default_calibration() { return {}; }

/// Runs the simulated chair through the per-channel samplers.
inline ChairRecording simulate_chair(const MotionProfile& profile, const ChairCalibration& cal,
                                     const DriftModel& drift, double duration_s, int rate, std::uint64_t seed,
                                     double jitter_fraction = 0.02) {
  SamplerConfig cfg;
  cfg.nominal_rate = rate;
  cfg.jitter_fraction = jitter_fraction;
  return run_samplers(SimulatedChair(LoadCurves(profile), cal, drift), cfg, duration_s, seed);
}

/// Differentially corrected stream for one channel (active - reference per tick).
inline ChannelStream corrected_stream(const ChairRecording& rec, ChannelId c) {
  const auto& act = rec.active[index_of(c)];
  const auto& ref = rec.reference[index_of(c)];
  ChannelStream out;
  out.reserve(act.size());
  for (std::size_t i = 0; i < act.size(); ++i) out.push_back({act[i].t_ms, differential_read(act[i].counts, ref[i].counts)});
  return out;
}

inline PerChannel<ChannelStream> corrected_streams(const ChairRecording& rec) {
  PerChannel<ChannelStream> out;
  for (ChannelId c : kChannels) out[index_of(c)] = corrected_stream(rec, c);
  return out;
}

}  // namespace sts
