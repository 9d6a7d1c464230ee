#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <string>
#include <string_view>

#include "sts/channel.hpp"
#include "sts/error.hpp"

namespace sts {

enum class Strength { Weak, Moderate, Strong };

constexpr std::string_view to_string(Strength s) noexcept {
  switch (s) {
    case Strength::Weak: return "weak";
    case Strength::Moderate: return "moderate";
    case Strength::Strong: return "strong";
  }
  return "";
}

inline std::optional<Strength> strength_from_string(std::string_view s) noexcept {
  if (s == "weak") return Strength::Weak;
  if (s == "moderate") return Strength::Moderate;
  if (s == "strong") return Strength::Strong;
  return std::nullopt;
}

/// Parameters of a scripted stand-sit-stand session.
///
/// Timeline: `lead_s` standing, then `reps` cycles of
/// descent -> seated -> rise -> standing.
struct MotionProfile {
  double body_weight_kg = 70.0;
  Strength strength = Strength::Moderate;
  double lead_s = 1.0;
  double descent_time_s = 1.5;
  double sit_time_s = 1.5;
  double rise_time_s = 1.5;
  double stand_time_s = 1.0;
  double asymmetry = 0.0;      ///< left/right skew, positive loads the left side
  double forward_lean = 0.2;   ///< extra front share reached as load leaves the seat
  double tremor_amp_kg = 0.0;
  double tremor_hz = 3.0;
  double tremor_phase = 0.0;
  int reps = 3;
  std::uint64_t seed = 0;

  double cycle_s() const noexcept { return descent_time_s + sit_time_s + rise_time_s + stand_time_s; }

  /// Time at which the last programmed rep has finished standing.
  double schedule_end_s() const noexcept { return lead_s + reps * cycle_s(); }

  void validate() const {
    require(body_weight_kg > 0.0, "body_weight_kg must be positive");
    require(lead_s >= 0.0, "lead_s must be non-negative");
    require(descent_time_s > 0.0 && rise_time_s > 0.0, "transition times must be positive");
    require(sit_time_s >= 0.0 && stand_time_s >= 0.0, "dwell times must be non-negative");
    require(asymmetry >= -0.3 && asymmetry <= 0.3, "asymmetry must lie in [-0.3, 0.3]");
    require(forward_lean >= 0.0 && forward_lean <= 0.5, "forward_lean must lie in [0, 0.5]");
    require(tremor_amp_kg >= 0.0 && 4.0 * tremor_amp_kg < body_weight_kg,
            "tremor amplitude must be non-negative and below a quarter of body weight");
    require(tremor_hz >= 0.0, "tremor_hz must be non-negative");
    require(reps >= 0, "reps must be non-negative");
  }

  friend bool operator==(const MotionProfile&, const MotionProfile&) = default;
};

/// 3x^2 - 2x^3 on [0, 1], clamped outside.
constexpr double smoothstep(double x) noexcept {
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  return x * x * (3.0 - 2.0 * x);
}

/// Ideal per-corner chair load as a function of time for one profile.
class LoadCurves {
public:
  explicit LoadCurves(MotionProfile profile) : p_(std::move(profile)) { p_.validate(); }

  const MotionProfile& profile() const noexcept { return p_; }

  /// Fraction of body weight on the seat, before tremor.
  double seated_fraction(double t_s) const noexcept { return phase_at(t_s).fraction; }

  /// Total chair load in kg.
  double total(double t_s) const noexcept {
    const Phase ph = phase_at(t_s);
    double load = p_.body_weight_kg * ph.fraction;
    if (ph.in_transition && p_.tremor_amp_kg > 0.0) {
      // Envelope 4f(1-f) vanishes at both ends of the edge faster than the
      // load itself, so total load never goes negative while W > 4A.
      const double env = 4.0 * ph.fraction * (1.0 - ph.fraction);
      load += p_.tremor_amp_kg * env *
              std::sin(2.0 * std::numbers::pi * p_.tremor_hz * t_s + p_.tremor_phase);
    }
    return load;
  }

  /// Share of total load carried by one corner; the four shares sum to one.
  double share(ChannelId c, double t_s) const noexcept {
    const double front = 0.5 + p_.forward_lean * (1.0 - seated_fraction(t_s));
    const double fb = is_front(c) ? front : 1.0 - front;
    const double lr = is_left(c) ? 0.5 * (1.0 + p_.asymmetry) : 0.5 * (1.0 - p_.asymmetry);
    return fb * lr;
  }

  double corner(ChannelId c, double t_s) const noexcept { return total(t_s) * share(c, t_s); }

private:
  struct Phase {
    double fraction = 0.0;
    bool in_transition = false;
  };

  Phase phase_at(double t_s) const noexcept {
    if (p_.reps == 0 || t_s < p_.lead_s) return {};
    const double cycle = p_.cycle_s();
    double rel = t_s - p_.lead_s;
    const auto k = static_cast<long>(std::floor(rel / cycle));
    if (k >= p_.reps) return {};
    rel -= static_cast<double>(k) * cycle;
    if (rel < p_.descent_time_s) return {smoothstep(rel / p_.descent_time_s), true};
    rel -= p_.descent_time_s;
    if (rel < p_.sit_time_s) return {1.0, false};
    rel -= p_.sit_time_s;
    if (rel < p_.rise_time_s) return {1.0 - smoothstep(rel / p_.rise_time_s), true};
    return {};
  }

  MotionProfile p_;
};

inline LoadCurves profile_to_load_curves(const MotionProfile& profile) { return LoadCurves(profile); }

}  // namespace sts
