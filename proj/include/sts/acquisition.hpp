#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>

#include "sts/channel.hpp"
#include "sts/error.hpp"
#include "sts/sampler.hpp"
#include "sts/sensor_model.hpp"
#include "sts/timeutil.hpp"

namespace sts {

enum class Mode { Train, Test };

constexpr std::string_view to_string(Mode m) noexcept { return m == Mode::Train ? "train" : "test"; }

inline std::optional<Mode> mode_from_string(std::string_view s) noexcept {
  if (s == "train") return Mode::Train;
  if (s == "test") return Mode::Test;
  return std::nullopt;
}

/// One recording session as submitted by the device. Channel streams hold
/// differentially corrected counts with timestamps rebased to the window start.
struct TrialPacket {
  std::string trial_id;
  std::string user_id;
  Mode mode = Mode::Train;
  std::optional<std::string> label;
  std::string started_at;
  int nominal_rate = 10;
  ChairCalibration calibration{};
  PerChannel<ChannelStream> channels{};

  friend bool operator==(const TrialPacket&, const TrialPacket&) = default;
};

struct TrialMetadata {
  std::string trial_id;
  std::string user_id;
  Mode mode = Mode::Train;
  std::optional<std::string> label;
  std::string started_at;
  int nominal_rate = 10;
  ChairCalibration calibration{};
};

inline bool is_uuid(std::string_view s) noexcept {
  if (s.size() != 36) return false;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const char ch = s[i];
    if (i == 8 || i == 13 || i == 18 || i == 23) {
      if (ch != '-') return false;
    } else if (!((ch >= '0' && ch <= '9') || (ch >= 'a' && ch <= 'f') || (ch >= 'A' && ch <= 'F'))) {
      return false;
    }
  }
  return true;
}

/// Throws SchemaViolation naming the first broken invariant.
inline void validate_packet(const TrialPacket& p) {
  auto fail = [](const std::string& what) { throw Error(ErrorKind::SchemaViolation, what); };
  if (!is_uuid(p.trial_id)) fail("trial_id is not a UUID");
  if (p.user_id.empty()) fail("user_id is empty");
  if (p.mode == Mode::Test && p.label) fail("label must be null in test mode");
  if (p.label && p.label->empty()) fail("label is empty");
  if (!parse_rfc3339(p.started_at)) fail("started_at is not an RFC 3339 timestamp");
  if (p.nominal_rate != 10 && p.nominal_rate != 80) fail("nominal_rate_hz must be 10 or 80");
  for (ChannelId c : kChannels) {
    const std::string key(channel_key(c));
    const Calibration& cal = p.calibration[index_of(c)];
    if (!(cal.scale_counts_per_kg > 0.0) || !std::isfinite(cal.scale_counts_per_kg))
      fail("calibration." + key + ".scale_counts_per_kg must be positive");
    const auto& s = p.channels[index_of(c)];
    if (s.empty()) fail("channels." + key + " is empty");
    if (s.front().t_ms < 0) fail("channels." + key + "[0][0] is negative");
    for (std::size_t i = 1; i < s.size(); ++i)
      if (s[i].t_ms <= s[i - 1].t_ms)
        fail("channels." + key + "[" + std::to_string(i) + "][0] not strictly increasing");
  }
}

/// Inclusive bounds on per-channel sample count for a trial of the given shape.
inline std::pair<std::int64_t, std::int64_t> sample_count_bounds(int rate, double duration_s, double jitter) {
  const double n = rate * duration_s;
  return {static_cast<std::int64_t>(std::floor(n * (1.0 - jitter))),
          static_cast<std::int64_t>(std::ceil(n * (1.0 + jitter)))};
}

namespace detail {
inline double mean_of_first(const ChannelStream& s, std::size_t n) {
  if (n < 10) throw Error(ErrorKind::InvalidArgument, "calibration needs at least 10 readings");
  if (s.size() < n)
    throw Error(ErrorKind::InsufficientSamples,
                "need " + std::to_string(n) + " readings, have " + std::to_string(s.size()));
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) sum += static_cast<double>(s[i].counts);
  return sum / static_cast<double>(n);
}
}  // namespace detail

/// Zero-load offset: mean of the first n readings of an unloaded channel.
inline std::int64_t tare_channel(const ChannelStream& unloaded, std::size_t n) {
  return std::llround(detail::mean_of_first(unloaded, n));
}

/// Counts per kg from n readings with a known mass on the corner.
inline double calibrate_scale(const ChannelStream& loaded, std::int64_t tare, double known_mass_kg, std::size_t n) {
  require(known_mass_kg > 0.0, "known mass must be positive");
  const double scale = (detail::mean_of_first(loaded, n) - static_cast<double>(tare)) / known_mass_kg;
  if (!(scale > 0.0))
    throw Error(ErrorKind::NonPositiveScale,
                "computed scale " + std::to_string(scale) + " counts/kg is not positive (check load and wiring)");
  return scale;
}

/// Cuts [t0_ms, t1_ms) out of each channel and rebases it to start at 0.
inline TrialPacket assemble_trial(const PerChannel<ChannelStream>& sampled, const TrialMetadata& meta,
                                  std::int64_t t0_ms, std::int64_t t1_ms) {
  TrialPacket p;
  p.trial_id = meta.trial_id;
  p.user_id = meta.user_id;
  p.mode = meta.mode;
  p.label = meta.mode == Mode::Test ? std::nullopt : meta.label;
  p.started_at = meta.started_at;
  p.nominal_rate = meta.nominal_rate;
  p.calibration = meta.calibration;
  for (ChannelId c : kChannels) {
    const auto& src = sampled[index_of(c)];
    auto& dst = p.channels[index_of(c)];
    for (const RawSample& s : src)
      if (s.t_ms >= t0_ms && s.t_ms < t1_ms) dst.push_back({s.t_ms - t0_ms, s.counts});
    if (dst.empty())
      throw Error(ErrorKind::EmptyChannel, "channel " + std::string(channel_key(c)) + " has no samples in [" +
                                               std::to_string(t0_ms) + ", " + std::to_string(t1_ms) + ")");
  }
  validate_packet(p);
  return p;
}

}  // namespace sts
