#include <functional>
#include <string>

#include <gtest/gtest.h>

#include "sts/sensor_model.hpp"
#include "sts/wire.hpp"

using namespace sts;
using wire::json;

namespace {

TrialPacket minimal_packet() {
  TrialPacket p;
  p.trial_id = "3f2a9c1e-8b7d-4e6f-a5b4-c3d2e1f0a9b8";
  p.user_id = "U1";
  p.mode = Mode::Train;
  p.label = std::nullopt;
  p.started_at = "2024-03-01T09:00:00.000Z";
  p.nominal_rate = 10;
  for (ChannelId c : kChannels) p.channels[index_of(c)] = {{0, 1000 + static_cast<std::int64_t>(index_of(c))}};
  return p;
}

TrialPacket random_packet(Rng& rng) {
  TrialPacket p;
  p.trial_id = rng.uuid();
  p.user_id = "user-" + std::to_string(rng.next() % 1000);
  p.mode = rng.uniform() < 0.5 ? Mode::Train : Mode::Test;
  if (p.mode == Mode::Train && rng.uniform() < 0.7) p.label = rng.uniform() < 0.5 ? "weak" : "strong";
  p.started_at = format_rfc3339(SysTime(std::chrono::milliseconds(1'700'000'000'000LL + static_cast<long long>(rng.next() % 100'000'000))));
  p.nominal_rate = rng.uniform() < 0.5 ? 10 : 80;
  for (ChannelId c : kChannels) {
    p.calibration[index_of(c)] = {static_cast<std::int64_t>(rng.uniform(-1e6, 1e6)), rng.uniform(1.0, 5e5)};
    auto& s = p.channels[index_of(c)];
    std::int64_t t = static_cast<std::int64_t>(rng.next() % 50);
    const auto n = 1 + rng.next() % 40;
    for (std::uint64_t i = 0; i < n; ++i) {
      s.push_back({t, static_cast<std::int64_t>(rng.uniform(-8388608.0, 8388607.0))});
      t += 1 + static_cast<std::int64_t>(rng.next() % 200);
    }
  }
  return p;
}

std::string violation_of(const std::string& body) {
  try {
    wire::parse(body);
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::SchemaViolation);
    return e.what();
  }
  ADD_FAILURE() << "parse accepted " << body.substr(0, 200);
  return {};
}

std::string mutated(const std::function<void(json&)>& f) {
  json env = wire::envelope_to_json(minimal_packet());
  f(env);
  return env.dump();
}

}  // namespace

TEST(Wire, MinimalPacketRoundTrips) {
  const TrialPacket p = minimal_packet();
  const std::string bytes = wire::serialize(p);
  EXPECT_EQ(wire::parse(bytes), p);
  EXPECT_EQ(wire::serialize(wire::parse(bytes)), bytes);
}

TEST(Wire, ExactFieldNames) {
  const json env = json::parse(wire::serialize(minimal_packet()));
  EXPECT_EQ(env["schema_version"], 1);
  const json& pl = env["payload"];
  for (const char* k :
       {"trial_id", "user_id", "mode", "label", "started_at", "nominal_rate_hz", "calibration", "channels"})
    EXPECT_TRUE(pl.contains(k)) << k;
  EXPECT_EQ(pl.size(), 8u);
  EXPECT_TRUE(pl["label"].is_null());
  EXPECT_EQ(pl["mode"], "train");
  for (const char* k : {"front_left", "front_right", "rear_left", "rear_right"}) {
    EXPECT_TRUE(pl["channels"].contains(k));
    EXPECT_TRUE(pl["calibration"][k].contains("tare_counts"));
    EXPECT_TRUE(pl["calibration"][k].contains("scale_counts_per_kg"));
  }
  EXPECT_EQ(pl["channels"]["front_right"], json::parse("[[0,1001]]"));
}

TEST(Wire, CanonicalFormIsCompactAndSorted) {
  const std::string bytes = wire::serialize(minimal_packet());
  EXPECT_EQ(bytes.find(' '), std::string::npos);
  EXPECT_EQ(bytes.find('\n'), std::string::npos);
  EXPECT_LT(bytes.find("\"payload\""), bytes.find("\"schema_version\""));
  EXPECT_LT(bytes.find("\"calibration\""), bytes.find("\"channels\""));
  // Key order in the input does not change the canonical bytes.
  const std::string shuffled =
      R"({"schema_version":1,"payload":{"user_id":"U1","trial_id":"3f2a9c1e-8b7d-4e6f-a5b4-c3d2e1f0a9b8",)"
      R"("started_at":"2024-03-01T09:00:00.000Z","mode":"train","label":null,"nominal_rate_hz":10,)"
      R"("channels":{"rear_right":[[0,1003]],"rear_left":[[0,1002]],"front_right":[[0,1001]],"front_left":[[0,1000]]},)"
      R"("calibration":{"rear_right":{"scale_counts_per_kg":335544.0,"tare_counts":0},)"
      R"("rear_left":{"scale_counts_per_kg":335544.0,"tare_counts":0},)"
      R"("front_right":{"scale_counts_per_kg":335544.0,"tare_counts":0},)"
      R"("front_left":{"tare_counts":0,"scale_counts_per_kg":335544.0}}}})";
  EXPECT_EQ(wire::serialize(wire::parse(shuffled)), bytes);
}

TEST(Wire, RandomPacketsRoundTrip) {
  Rng rng(2024);
  for (int i = 0; i < 500; ++i) {
    const TrialPacket p = random_packet(rng);
    const std::string bytes = wire::serialize(p);
    const TrialPacket q = wire::parse(bytes);
    ASSERT_EQ(q, p);
    ASSERT_EQ(wire::serialize(q), bytes);
  }
}

TEST(Wire, SimulatedThirtySecondTrialRoundTrips) {
  MotionProfile prof;
  prof.reps = 3;
  SamplerConfig cfg;
  const auto rec = run_samplers(SimulatedChair(LoadCurves(prof), default_calibration(), {20.0, 16777.0}), cfg, 30.0, 1);
  TrialMetadata m;
  m.trial_id = "aaaaaaaa-bbbb-4ccc-8ddd-eeeeeeeeeeee";
  m.user_id = "U3";
  m.label = "strong";
  m.started_at = "2024-03-01T09:00:00Z";
  const TrialPacket p = assemble_trial(corrected_streams(rec), m, 0, 30000);
  const TrialPacket q = wire::parse(wire::serialize(p));
  std::size_t total = 0;
  for (ChannelId c : kChannels) {
    EXPECT_EQ(q.channels[index_of(c)], p.channels[index_of(c)]);
    total += q.channels[index_of(c)].size();
  }
  EXPECT_GE(total, 4u * 294u);
  EXPECT_LE(total, 4u * 306u);
}

TEST(Wire, MissingChannel) {
  EXPECT_EQ(violation_of(mutated([](json& e) { e["payload"]["channels"].erase("rear_left"); })),
            "channels.rear_left missing");
}

TEST(Wire, NonIntegerTimestamp) {
  EXPECT_EQ(violation_of(mutated([](json& e) {
              e["payload"]["channels"]["front_left"] = json::parse("[[0,1],[100,2],[200,3],[300.5,4]]");
            })),
            "channels.front_left[3][0] not an integer");
  EXPECT_EQ(violation_of(mutated([](json& e) { e["payload"]["channels"]["front_left"][0][1] = "9"; })),
            "channels.front_left[0][1] not an integer");
}

TEST(Wire, StructuralViolations) {
  EXPECT_EQ(violation_of(mutated([](json& e) { e["payload"].erase("user_id"); })), "user_id missing");
  EXPECT_EQ(violation_of(mutated([](json& e) { e["payload"]["calibration"].erase("front_right"); })),
            "calibration.front_right missing");
  EXPECT_EQ(violation_of(mutated([](json& e) { e["payload"]["channels"]["middle"] = json::array(); })),
            "channels.middle is not a known field");
  EXPECT_EQ(violation_of(mutated([](json& e) { e["payload"]["extra"] = 1; })), "extra is not a known field");
  EXPECT_EQ(violation_of(mutated([](json& e) { e["payload"]["channels"]["rear_right"][0] = json::array({1}); })),
            "channels.rear_right[0] not a [t_ms, counts] pair");
  EXPECT_EQ(violation_of(mutated([](json& e) { e["payload"]["mode"] = "validate"; })),
            "mode must be \"train\" or \"test\"");
  violation_of(mutated([](json& e) { e["payload"]["nominal_rate_hz"] = 20; }));
  violation_of(mutated([](json& e) { e["payload"]["trial_id"] = "T-1"; }));
  violation_of(mutated([](json& e) { e["payload"]["channels"]["front_left"] = json::array(); }));
  violation_of(mutated([](json& e) { e["payload"]["channels"]["front_left"] = json::parse("[[5,1],[5,2]]"); }));
  violation_of(mutated([](json& e) {
    e["payload"]["mode"] = "test";
    e["payload"]["label"] = "weak";
  }));
}

TEST(Wire, RejectsUnknownSchemaVersion) {
  EXPECT_EQ(violation_of(mutated([](json& e) { e["schema_version"] = 2; })), "schema_version 2 is not supported");
  violation_of(mutated([](json& e) { e.erase("schema_version"); }));
}

TEST(Wire, RejectsMalformedJson) {
  const std::string msg = violation_of("{\"schema_version\": 1, ");
  EXPECT_EQ(msg.rfind("body is not valid JSON", 0), 0u);
  violation_of("[]");
  violation_of("");
}
