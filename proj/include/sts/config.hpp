#pragma once

#include <cstdint>
#include <cstdlib>
#include <type_traits>
#include <utility>
#include <filesystem>
#include <fstream>
#include <string>
#include <string_view>

#include "sts/error.hpp"

namespace sts {

/// Run-time settings shared by all subcommands.
///
/// Resolution order, lowest to highest: built-in defaults, environment
/// (STS_ADDR, STS_STORE), config file, command-line flags.
///
/// Config file format: one `key = value` per line; `#` starts a comment;
/// blank lines are ignored. Keys are the field names below.
struct Config {
  std::string addr = "127.0.0.1:8080";
  std::string store = "sts-store.db";
  int rate = 10;
  double duration_s = 30.0;
  double seated_fraction = 0.60;
  double standing_fraction = 0.15;
  double dwell_ms = 300.0;
  int k = 1;
  double band_fraction = 0.1;
  std::string channels = "raw";
  std::string dtw = "dependent";
  std::uint64_t seed = 2024;
};

namespace detail {
inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

template <typename T>
T parse_number(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    T out;
    if constexpr (std::is_same_v<T, int>) out = std::stoi(v, &pos);
    else if constexpr (std::is_same_v<T, std::uint64_t>) out = std::stoull(v, &pos);
    else out = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return out;
  } catch (const std::exception&) {
    throw Error(ErrorKind::InvalidArgument, "config key " + key + ": cannot parse '" + v + "'");
  }
}
}  // namespace detail

inline void apply_setting(Config& c, const std::string& key, const std::string& value) {
  using detail::parse_number;
  if (key == "addr") c.addr = value;
  else if (key == "store") c.store = value;
  else if (key == "rate") c.rate = parse_number<int>(key, value);
  else if (key == "duration_s") c.duration_s = parse_number<double>(key, value);
  else if (key == "seated_fraction") c.seated_fraction = parse_number<double>(key, value);
  else if (key == "standing_fraction") c.standing_fraction = parse_number<double>(key, value);
  else if (key == "dwell_ms") c.dwell_ms = parse_number<double>(key, value);
  else if (key == "k") c.k = parse_number<int>(key, value);
  else if (key == "band_fraction") c.band_fraction = parse_number<double>(key, value);
  else if (key == "channels") c.channels = value;
  else if (key == "dtw") c.dtw = value;
  else if (key == "seed") c.seed = parse_number<std::uint64_t>(key, value);
  else throw Error(ErrorKind::InvalidArgument, "unknown config key '" + key + "'");
}

inline void apply_env(Config& c) {
  if (const char* v = std::getenv("STS_ADDR"); v && *v) c.addr = v;
  if (const char* v = std::getenv("STS_STORE"); v && *v) c.store = v;
}

inline void apply_file(Config& c, const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot read config file " + path.string());
  std::string line;
  for (int lineno = 1; std::getline(in, line); ++lineno) {
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    const std::string t = detail::trim(line);
    if (t.empty()) continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos)
      throw Error(ErrorKind::InvalidArgument, path.string() + ":" + std::to_string(lineno) + ": expected key = value");
    apply_setting(c, detail::trim(t.substr(0, eq)), detail::trim(t.substr(eq + 1)));
  }
}

/// Splits "host:port"; a bare port binds 127.0.0.1.
inline std::pair<std::string, int> split_addr(const std::string& addr) {
  const auto colon = addr.rfind(':');
  const std::string host = colon == std::string::npos ? "127.0.0.1" : addr.substr(0, colon);
  const std::string port = colon == std::string::npos ? addr : addr.substr(colon + 1);
  const int p = detail::parse_number<int>("addr", port);
  require(p >= 0 && p <= 65535, "port out of range in " + addr);
  return {host.empty() ? "127.0.0.1" : host, p};
}

}  // namespace sts
