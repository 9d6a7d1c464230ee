#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

namespace sts {

/// The four load-bearing corners of the seat.
enum class ChannelId : std::uint8_t { FrontLeft = 0, FrontRight = 1, RearLeft = 2, RearRight = 3 };

inline constexpr std::size_t kNumChannels = 4;

inline constexpr std::array<ChannelId, kNumChannels> kChannels{
    ChannelId::FrontLeft, ChannelId::FrontRight, ChannelId::RearLeft, ChannelId::RearRight};

constexpr std::size_t index_of(ChannelId c) noexcept { return static_cast<std::size_t>(c); }

/// Wire key for a channel.
constexpr std::string_view channel_key(ChannelId c) noexcept {
  switch (c) {
    case ChannelId::FrontLeft: return "front_left";
    case ChannelId::FrontRight: return "front_right";
    case ChannelId::RearLeft: return "rear_left";
    case ChannelId::RearRight: return "rear_right";
  }
  return "";
}

constexpr std::optional<ChannelId> channel_from_key(std::string_view key) noexcept {
  for (ChannelId c : kChannels)
    if (channel_key(c) == key) return c;
  return std::nullopt;
}

constexpr bool is_front(ChannelId c) noexcept {
  return c == ChannelId::FrontLeft || c == ChannelId::FrontRight;
}

constexpr bool is_left(ChannelId c) noexcept {
  return c == ChannelId::FrontLeft || c == ChannelId::RearLeft;
}

/// One ADC reading on a channel's own clock.
struct RawSample {
  std::int64_t t_ms = 0;
  std::int64_t counts = 0;

  friend bool operator==(const RawSample&, const RawSample&) = default;
};

using ChannelStream = std::vector<RawSample>;

template <typename T>
using PerChannel = std::array<T, kNumChannels>;

}  // namespace sts
