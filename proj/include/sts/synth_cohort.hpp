#pragma once

#include <cstdint>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "sts/acquisition.hpp"
#include "sts/motion_profile.hpp"
#include "sts/rng.hpp"
#include "sts/sensor_model.hpp"
#include "sts/timeutil.hpp"

namespace sts {

struct Range {
  double lo, hi;
};

/// Class-specific parameter ranges. Stronger classes move faster and shake less.
struct StrengthTraits {
  Range rise_s;
  Range descent_s;
  Range tremor_kg;
};

constexpr StrengthTraits traits(Strength s) noexcept {
  switch (s) {
    case Strength::Weak: return {{2.0, 3.5}, {1.6, 2.6}, {1.5, 3.0}};
    case Strength::Moderate: return {{1.2, 2.0}, {1.1, 1.7}, {0.7, 1.5}};
    case Strength::Strong: return {{0.6, 1.2}, {0.7, 1.2}, {0.2, 0.7}};
  }
  return {{1.2, 2.0}, {1.1, 1.7}, {0.7, 1.5}};
}

/// Draws one person's motion style for a strength class. Deterministic per seed.
inline MotionProfile generate_profile(Strength strength, double body_weight_kg, std::uint64_t seed) {
  Rng rng(mix_seed(seed, 0x50F1));
  const StrengthTraits tr = traits(strength);
  MotionProfile p;
  p.body_weight_kg = body_weight_kg;
  p.strength = strength;
  p.seed = seed;
  p.rise_time_s = rng.uniform(tr.rise_s.lo, tr.rise_s.hi);
  p.descent_time_s = rng.uniform(tr.descent_s.lo, tr.descent_s.hi);
  p.tremor_amp_kg = rng.uniform(tr.tremor_kg.lo, tr.tremor_kg.hi);
  p.tremor_hz = rng.uniform(2.0, 5.0);
  p.tremor_phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
  p.sit_time_s = rng.uniform(0.8, 1.6);
  p.stand_time_s = rng.uniform(0.6, 1.2);
  p.lead_s = rng.uniform(0.8, 1.6);
  p.asymmetry = rng.uniform(-0.15, 0.15);
  p.forward_lean = rng.uniform(0.12, 0.28);
  p.reps = 3;
  p.validate();
  return p;
}

/// Default sensor disturbances for synthetic cohorts.
inline DriftModel default_cohort_drift() { return {20.0, 0.05 * kDefaultScaleCountsPerKg}; }

struct CohortOptions {
  int n_users = 4;
  int trials_per_user = 3;
  /// Strength of user i is classes[i % classes.size()].
  std::vector<Strength> classes{Strength::Weak, Strength::Moderate, Strength::Strong};
  /// The last `test_per_user` trials of every user go to the test service.
  int test_per_user = 0;
  int rate = 10;
  double duration_s = 30.0;
  int reps = 3;
  DriftModel drift = default_cohort_drift();
  std::uint64_t seed = 2024;
  /// Within-user trial-to-trial variation of timing parameters (fraction).
  double trial_variation = 0.05;

  void validate() const {
    require(n_users >= 1, "n_users must be at least 1");
    require(trials_per_user >= 1, "trials_per_user must be at least 1");
    require(!classes.empty(), "at least one strength class is required");
    require(test_per_user >= 0 && test_per_user <= trials_per_user, "test_per_user out of range");
    require(rate == 10 || rate == 80, "rate must be 10 or 80");
    require(duration_s > 0.0, "duration must be positive");
    require(reps >= 0, "reps must be non-negative");
  }
};

struct ManifestEntry {
  std::string trial_id;
  std::string user_id;
  std::string true_label;
  Mode mode = Mode::Train;
  MotionProfile profile;
};

/// The answer key of a generated cohort, kept outside the store.
struct CohortManifest {
  std::uint64_t seed = 0;
  std::vector<ManifestEntry> entries;

  const ManifestEntry* find(const std::string& trial_id) const {
    for (const auto& e : entries)
      if (e.trial_id == trial_id) return &e;
    return nullptr;
  }
};

inline nlohmann::json profile_to_json(const MotionProfile& p) {
  return {{"body_weight_kg", p.body_weight_kg},
          {"strength", std::string(to_string(p.strength))},
          {"lead_s", p.lead_s},
          {"descent_time_s", p.descent_time_s},
          {"sit_time_s", p.sit_time_s},
          {"rise_time_s", p.rise_time_s},
          {"stand_time_s", p.stand_time_s},
          {"asymmetry", p.asymmetry},
          {"forward_lean", p.forward_lean},
          {"tremor_amp_kg", p.tremor_amp_kg},
          {"tremor_hz", p.tremor_hz},
          {"tremor_phase", p.tremor_phase},
          {"reps", p.reps},
          {"seed", p.seed}};
}

inline MotionProfile profile_from_json(const nlohmann::json& j) {
  MotionProfile p;
  p.body_weight_kg = j.at("body_weight_kg").get<double>();
  const auto s = strength_from_string(j.at("strength").get<std::string>());
  if (!s) throw Error(ErrorKind::SchemaViolation, "profile.strength is not a known class");
  p.strength = *s;
  p.lead_s = j.at("lead_s").get<double>();
  p.descent_time_s = j.at("descent_time_s").get<double>();
  p.sit_time_s = j.at("sit_time_s").get<double>();
  p.rise_time_s = j.at("rise_time_s").get<double>();
  p.stand_time_s = j.at("stand_time_s").get<double>();
  p.asymmetry = j.at("asymmetry").get<double>();
  p.forward_lean = j.at("forward_lean").get<double>();
  p.tremor_amp_kg = j.at("tremor_amp_kg").get<double>();
  p.tremor_hz = j.at("tremor_hz").get<double>();
  p.tremor_phase = j.at("tremor_phase").get<double>();
  p.reps = j.at("reps").get<int>();
  p.seed = j.at("seed").get<std::uint64_t>();
  return p;
}

inline nlohmann::json manifest_to_json(const CohortManifest& m) {
  nlohmann::json trials = nlohmann::json::array();
  for (const auto& e : m.entries)
    trials.push_back({{"trial_id", e.trial_id},
                      {"user_id", e.user_id},
                      {"true_label", e.true_label},
                      {"mode", std::string(to_string(e.mode))},
                      {"profile", profile_to_json(e.profile)}});
  return {{"seed", m.seed}, {"trials", std::move(trials)}};
}

inline CohortManifest manifest_from_json(const nlohmann::json& j) {
  try {
    CohortManifest m;
    m.seed = j.at("seed").get<std::uint64_t>();
    for (const auto& t : j.at("trials")) {
      ManifestEntry e;
      e.trial_id = t.at("trial_id").get<std::string>();
      e.user_id = t.at("user_id").get<std::string>();
      e.true_label = t.at("true_label").get<std::string>();
      const auto mode = mode_from_string(t.at("mode").get<std::string>());
      if (!mode) throw Error(ErrorKind::SchemaViolation, "manifest mode must be train or test");
      e.mode = *mode;
      e.profile = profile_from_json(t.at("profile"));
      m.entries.push_back(std::move(e));
    }
    return m;
  } catch (const nlohmann::json::exception& ex) {
    throw Error(ErrorKind::SchemaViolation, std::string("malformed manifest: ") + ex.what());
  }
}

struct Cohort {
  std::vector<TrialPacket> packets;
  CohortManifest manifest;
};

/// Fixed start of the synthetic wall clock so cohorts are byte-reproducible.
inline SysTime cohort_epoch() { return *parse_rfc3339("2024-03-01T09:00:00.000Z"); }

/// Simulates one packet from a profile through the full device chain.
inline TrialPacket record_trial(const MotionProfile& profile, const TrialMetadata& meta, const DriftModel& drift,
                                double duration_s, std::uint64_t seed) {
  const auto rec = simulate_chair(profile, meta.calibration, drift, duration_s, meta.nominal_rate, seed);
  return assemble_trial(corrected_streams(rec), meta, 0, static_cast<std::int64_t>(std::llround(duration_s * 1000.0)));
}

/// Generates users with stable personal motion styles and several trials per
/// user that vary slightly around that style.
inline Cohort generate_cohort(const CohortOptions& opt) {
  opt.validate();
  Cohort out;
  out.manifest.seed = opt.seed;
  Rng ids(mix_seed(opt.seed, 0x1D5));
  int trial_index = 0;
  for (int u = 0; u < opt.n_users; ++u) {
    const Strength strength = opt.classes[static_cast<std::size_t>(u) % opt.classes.size()];
    const std::uint64_t user_seed = mix_seed(opt.seed, 0x10000 + static_cast<std::uint64_t>(u));
    Rng user_rng(user_seed);
    const double weight = user_rng.uniform(52.0, 85.0);
    MotionProfile base = generate_profile(strength, weight, user_seed);
    base.reps = opt.reps;
    const std::string user_id = "U" + std::to_string(u + 1);
    for (int t = 0; t < opt.trials_per_user; ++t, ++trial_index) {
      const std::uint64_t trial_seed = mix_seed(user_seed, 0x20000 + static_cast<std::uint64_t>(t));
      Rng tr(trial_seed);
      const double v = opt.trial_variation;
      MotionProfile p = base;
      p.seed = trial_seed;
      p.lead_s = std::max(0.2, base.lead_s + tr.uniform(-0.2, 0.2));
      p.rise_time_s *= 1.0 + tr.uniform(-v, v);
      p.descent_time_s *= 1.0 + tr.uniform(-v, v);
      p.sit_time_s *= 1.0 + tr.uniform(-v, v);
      p.stand_time_s *= 1.0 + tr.uniform(-v, v);
      p.tremor_phase = tr.uniform(0.0, 2.0 * std::numbers::pi);
      p.validate();

      const bool is_test = t >= opt.trials_per_user - opt.test_per_user;
      TrialMetadata meta;
      meta.trial_id = ids.uuid();
      meta.user_id = user_id;
      meta.mode = is_test ? Mode::Test : Mode::Train;
      if (!is_test) meta.label = std::string(to_string(strength));
      meta.started_at = format_rfc3339(cohort_epoch() + std::chrono::minutes(trial_index));
      meta.nominal_rate = opt.rate;
      meta.calibration = default_calibration();

      out.packets.push_back(record_trial(p, meta, opt.drift, opt.duration_s, trial_seed));
      out.manifest.entries.push_back({meta.trial_id, user_id, std::string(to_string(strength)), meta.mode, p});
    }
  }
  return out;
}

}  // namespace sts
