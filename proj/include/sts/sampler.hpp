#pragma once

#include <cmath>
#include <concepts>
#include <cstdint>
#include <thread>
#include <vector>

#include "sts/channel.hpp"
#include "sts/error.hpp"
#include "sts/rng.hpp"

namespace sts {

/// Per-device sampling setup. Every channel runs its own clock at
/// nominal_rate * (1 + u), u drawn once per channel per trial.
struct SamplerConfig {
  int nominal_rate = 10;
  double jitter_fraction = 0.02;
  PerChannel<double> phase_offset_ms{0.0, 0.0, 0.0, 0.0};

  void validate() const {
    require(nominal_rate == 10 || nominal_rate == 80, "nominal_rate must be 10 or 80");
    require(jitter_fraction >= 0.0 && jitter_fraction < 0.05, "jitter_fraction must lie in [0, 0.05)");
    for (double p : phase_offset_ms) require(p >= 0.0, "phase offsets must be non-negative");
  }
};

/// Active and reference reading from one ADC conversion.
struct GaugePair {
  std::int64_t active = 0;
  std::int64_t reference = 0;
};

/// Anything that can be read like a chair: given a channel, a time, and that
/// channel's private noise generator, returns one conversion.
template <typename S>
concept ChairSource = requires(const S& s, ChannelId c, double t_ms, Rng& rng) {
  { s.read(c, t_ms, rng) } -> std::same_as<GaugePair>;
};

/// Raw capture: load-bearing streams and their paired reference streams,
/// both indexed by ChannelId and sharing timestamps per channel.
struct ChairRecording {
  PerChannel<ChannelStream> active;
  PerChannel<ChannelStream> reference;
};

/// Realized per-channel rate after jitter.
inline double channel_rate(const SamplerConfig& cfg, ChannelId c, std::uint64_t seed) {
  Rng rng(mix_seed(seed, 0x1000 + index_of(c)));
  const double u = cfg.jitter_fraction == 0.0 ? 0.0 : rng.uniform(-cfg.jitter_fraction, cfg.jitter_fraction);
  return cfg.nominal_rate * (1.0 + u);
}

/// Tick timestamps (ms, rounded half away from zero) of one channel's clock
/// over [0, duration).
inline std::vector<std::int64_t> channel_ticks(const SamplerConfig& cfg, ChannelId c, double duration_s,
                                               std::uint64_t seed) {
  const double period_ms = 1000.0 / channel_rate(cfg, c, seed);
  const double end_ms = duration_s * 1000.0;
  std::vector<std::int64_t> ticks;
  for (long k = 0;; ++k) {
    const double t = cfg.phase_offset_ms[index_of(c)] + static_cast<double>(k) * period_ms;
    if (t >= end_ms) break;
    ticks.push_back(std::llround(t));
  }
  return ticks;
}

/// Samples every channel of `source` on its own jittered clock. Each channel
/// runs as an independent task with private state; the result does not depend
/// on how the tasks are scheduled.
template <ChairSource Source>
ChairRecording run_samplers(const Source& source, const SamplerConfig& cfg, double duration_s,
                            std::uint64_t seed, bool concurrent = true) {
  cfg.validate();
  require(duration_s > 0.0, "duration must be positive");
  ChairRecording rec;
  auto sample_channel = [&](ChannelId c) {
    Rng noise(mix_seed(seed, 0x2000 + index_of(c)));
    auto& act = rec.active[index_of(c)];
    auto& ref = rec.reference[index_of(c)];
    for (std::int64_t t : channel_ticks(cfg, c, duration_s, seed)) {
      const GaugePair g = source.read(c, static_cast<double>(t), noise);
      act.push_back({t, g.active});
      ref.push_back({t, g.reference});
    }
  };
  if (concurrent) {
    std::vector<std::jthread> tasks;
    for (ChannelId c : kChannels) tasks.emplace_back(sample_channel, c);
  } else {
    for (ChannelId c : kChannels) sample_channel(c);
  }
  return rec;
}

}  // namespace sts
