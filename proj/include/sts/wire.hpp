#pragma once

#include <set>
#include <string>
#include <string_view>

#include <json.hpp>

#include "sts/acquisition.hpp"
#include "sts/channel.hpp"
#include "sts/error.hpp"

namespace sts::wire {

using json = nlohmann::json;

inline constexpr int kSchemaVersion = 1;

/// Payload object with the exact wire field names.
inline json payload_to_json(const TrialPacket& p) {
  json cal = json::object();
  json chans = json::object();
  for (ChannelId c : kChannels) {
    const std::string key(channel_key(c));
    const Calibration& k = p.calibration[index_of(c)];
    cal[key] = {{"tare_counts", k.tare_counts}, {"scale_counts_per_kg", k.scale_counts_per_kg}};
    json arr = json::array();
    for (const RawSample& s : p.channels[index_of(c)]) arr.push_back(json::array({s.t_ms, s.counts}));
    chans[key] = std::move(arr);
  }
  return {
      {"trial_id", p.trial_id},
      {"user_id", p.user_id},
      {"mode", std::string(to_string(p.mode))},
      {"label", p.label ? json(*p.label) : json(nullptr)},
      {"started_at", p.started_at},
      {"nominal_rate_hz", p.nominal_rate},
      {"calibration", std::move(cal)},
      {"channels", std::move(chans)},
  };
}

inline json envelope_to_json(const TrialPacket& p) {
  return {{"schema_version", kSchemaVersion}, {"payload", payload_to_json(p)}};
}

/// Canonical form: sorted keys, no insignificant whitespace, UTF-8.
inline std::string canonical(const json& j) { return j.dump(-1, ' ', false, json::error_handler_t::strict); }

inline std::string serialize(const TrialPacket& p) { return canonical(envelope_to_json(p)); }

namespace detail {

[[noreturn]] inline void violation(const std::string& what) { throw Error(ErrorKind::SchemaViolation, what); }

inline const json& field(const json& obj, const std::string& path, const char* key) {
  auto it = obj.find(key);
  if (it == obj.end()) violation(path + key + " missing");
  return *it;
}

inline void only_keys(const json& obj, const std::string& path, std::initializer_list<std::string_view> keys) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    bool known = false;
    for (auto k : keys) known = known || it.key() == k;
    if (!known) violation(path + it.key() + " is not a known field");
  }
}

inline std::int64_t as_int(const json& v, const std::string& path) {
  if (v.is_number_integer()) return v.get<std::int64_t>();
  violation(path + " not an integer");
}

inline std::string as_string(const json& v, const std::string& path) {
  if (!v.is_string()) violation(path + " not a string");
  return v.get<std::string>();
}

}  // namespace detail

/// Builds a packet from a payload object; structural and invariant checks both
/// raise SchemaViolation with a field path.
inline TrialPacket payload_from_json(const json& pl) {
  using namespace detail;
  if (!pl.is_object()) violation("payload not an object");
  only_keys(pl, "", {"trial_id", "user_id", "mode", "label", "started_at", "nominal_rate_hz", "calibration",
                     "channels"});
  TrialPacket p;
  p.trial_id = as_string(field(pl, "", "trial_id"), "trial_id");
  p.user_id = as_string(field(pl, "", "user_id"), "user_id");
  const std::string mode = as_string(field(pl, "", "mode"), "mode");
  const auto m = mode_from_string(mode);
  if (!m) violation("mode must be \"train\" or \"test\"");
  p.mode = *m;
  const json& label = field(pl, "", "label");
  if (!label.is_null()) p.label = as_string(label, "label");
  p.started_at = as_string(field(pl, "", "started_at"), "started_at");
  p.nominal_rate = static_cast<int>(as_int(field(pl, "", "nominal_rate_hz"), "nominal_rate_hz"));

  const json& cal = field(pl, "", "calibration");
  if (!cal.is_object()) violation("calibration not an object");
  only_keys(cal, "calibration.", {"front_left", "front_right", "rear_left", "rear_right"});
  const json& chans = field(pl, "", "channels");
  if (!chans.is_object()) violation("channels not an object");
  only_keys(chans, "channels.", {"front_left", "front_right", "rear_left", "rear_right"});

  for (ChannelId c : kChannels) {
    const std::string key(channel_key(c));
    const std::string cpath = "calibration." + key;
    auto cit = cal.find(key);
    if (cit == cal.end()) violation(cpath + " missing");
    if (!cit->is_object()) violation(cpath + " not an object");
    only_keys(*cit, cpath + ".", {"tare_counts", "scale_counts_per_kg"});
    Calibration& k = p.calibration[index_of(c)];
    k.tare_counts = as_int(field(*cit, cpath + ".", "tare_counts"), cpath + ".tare_counts");
    const json& scale = field(*cit, cpath + ".", "scale_counts_per_kg");
    if (!scale.is_number()) violation(cpath + ".scale_counts_per_kg not a number");
    k.scale_counts_per_kg = scale.get<double>();

    const std::string spath = "channels." + key;
    auto sit = chans.find(key);
    if (sit == chans.end()) violation(spath + " missing");
    if (!sit->is_array()) violation(spath + " not an array");
    auto& stream = p.channels[index_of(c)];
    stream.reserve(sit->size());
    for (std::size_t i = 0; i < sit->size(); ++i) {
      const json& pair = (*sit)[i];
      const std::string ppath = spath + "[" + std::to_string(i) + "]";
      if (!pair.is_array() || pair.size() != 2) violation(ppath + " not a [t_ms, counts] pair");
      stream.push_back({as_int(pair[0], ppath + "[0]"), as_int(pair[1], ppath + "[1]")});
    }
  }
  validate_packet(p);
  return p;
}

inline TrialPacket envelope_from_json(const json& env) {
  using namespace detail;
  if (!env.is_object()) violation("envelope not an object");
  only_keys(env, "", {"schema_version", "payload"});
  const std::int64_t version = as_int(field(env, "", "schema_version"), "schema_version");
  if (version != kSchemaVersion) violation("schema_version " + std::to_string(version) + " is not supported");
  return payload_from_json(field(env, "", "payload"));
}

inline json parse_json(std::string_view bytes) {
  try {
    return json::parse(bytes);
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::SchemaViolation, std::string("body is not valid JSON: ") + e.what());
  }
}

inline TrialPacket parse(std::string_view bytes) { return envelope_from_json(parse_json(bytes)); }

}  // namespace sts::wire
