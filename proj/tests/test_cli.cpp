#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "process.hpp"
#include "support.hpp"
#include "sts/client.hpp"
#include "sts/synth_cohort.hpp"
#include "sts/wire.hpp"

using namespace sts;
using sts::testing::RunResult;
using sts::testing::ServerProcess;
namespace fs = std::filesystem;

namespace {

const std::string kCli = STS_CLI_PATH;

RunResult sts_cli(std::vector<std::string> args, const std::string& stdin_text = "") {
  args.insert(args.begin(), kCli);
  return sts::testing::run(std::move(args), stdin_text);
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

class CliTest : public ::testing::Test {
protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("sts_cli_" + std::to_string(::getpid()) + "_" + ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  fs::path dir_;
};

}  // namespace

TEST_F(CliTest, HelpListsFlagsWithDefaults) {
  const RunResult top = sts_cli({"--help"});
  EXPECT_EQ(top.exit_code, 0);
  for (const char* s : {"serve", "device", "cohort", "score", "classify", "calibrate", "--seed", "--config"})
    EXPECT_NE(top.out.find(s), std::string::npos) << s;
  const RunResult cls = sts_cli({"classify", "--help"});
  EXPECT_EQ(cls.exit_code, 0);
  for (const char* s : {"--min-accuracy", "--loo", "--k", "--band", "--channels", "--manifest", "0.1", "dependent"})
    EXPECT_NE(cls.out.find(s), std::string::npos) << s;
  const RunResult dev = sts_cli({"device", "run", "--help"});
  for (const char* s : {"--users", "--trials", "--rate", "--duration", "--mode", "--label"})
    EXPECT_NE(dev.out.find(s), std::string::npos) << s;
}

TEST_F(CliTest, UsageErrorsExitTwo) {
  EXPECT_EQ(sts_cli({}).exit_code, 2);
  EXPECT_EQ(sts_cli({"classify", "--bogus"}).exit_code, 2);
  EXPECT_EQ(sts_cli({"cohort", "generate", "--rate", "20", "--manifest", path("m.json")}).exit_code, 2);
  EXPECT_EQ(sts_cli({"cohort", "generate", "--classes", "mighty", "--manifest", path("m.json")}).exit_code, 2);
}

TEST_F(CliTest, CohortGenerateIsReproducible) {
  for (const char* sub : {"a", "b"}) {
    const RunResult r = sts_cli({"cohort", "generate", "--users", "2", "--trials", "2", "--seed", "11", "--out",
                                 path(sub), "--manifest", path(std::string(sub) + ".json")});
    ASSERT_EQ(r.exit_code, 0) << r.err;
  }
  EXPECT_EQ(slurp(path("a.json")), slurp(path("b.json")));
  std::size_t files = 0;
  for (const auto& e : fs::directory_iterator(path("a"))) {
    EXPECT_EQ(slurp(e.path()), slurp(fs::path(path("b")) / e.path().filename()));
    ++files;
  }
  EXPECT_EQ(files, 4u);
  const CohortManifest m = manifest_from_json(nlohmann::json::parse(slurp(path("a.json"))));
  EXPECT_EQ(m.seed, 11u);
  EXPECT_EQ(m.entries.size(), 4u);

  ASSERT_EQ(sts_cli({"cohort", "generate", "--users", "2", "--trials", "2", "--seed", "12", "--manifest",
                     path("c.json")})
                .exit_code,
            0);
  EXPECT_NE(slurp(path("a.json")), slurp(path("c.json")));
}

TEST_F(CliTest, ScoreZeroLoadTrialFromFile) {
  MotionProfile p;
  p.reps = 0;
  const TrialPacket t = sts::testing::record_packet(p, {0.0, 0.0}, 30.0, 10, 1);
  std::ofstream(path("zero.json")) << wire::serialize(t);
  const RunResult r = sts_cli({"score", path("zero.json"), "--body-weight", "70", "--plot", path("zero.svg"),
                               "--csv", path("zero.csv")});
  ASSERT_EQ(r.exit_code, 0) << r.err;
  const auto j = nlohmann::json::parse(r.out);
  EXPECT_EQ(j["reps_30s"], 0);
  EXPECT_TRUE(j["five_reps_time_s"].is_null());
  EXPECT_TRUE(j["events"].empty());
  EXPECT_EQ(slurp(path("zero.svg")).rfind("<svg", 0), 0u);
  EXPECT_EQ(slurp(path("zero.csv")).rfind("t_ms,", 0), 0u);
}

TEST_F(CliTest, ScoreCountsProgrammedReps) {
  const TrialPacket t = sts::testing::record_packet(sts::testing::brisk_profile(7), {0.0, 0.0}, 31.0, 80, 3);
  std::ofstream(path("seven.json")) << wire::serialize(t);
  const RunResult r = sts_cli({"score", path("seven.json")});
  ASSERT_EQ(r.exit_code, 0) << r.err;
  const auto j = nlohmann::json::parse(r.out);
  EXPECT_EQ(j["reps_30s"], 7);
  EXPECT_TRUE(j["five_reps_time_s"].is_number());
}

TEST_F(CliTest, ScoreRejectsInvalidEnvelope) {
  std::ofstream(path("bad.json")) << R"({"schema_version":1,"payload":{}})";
  const RunResult r = sts_cli({"score", path("bad.json")});
  EXPECT_EQ(r.exit_code, 2);
  EXPECT_NE(r.err.find("missing"), std::string::npos) << r.err;
}

TEST_F(CliTest, UnreachableServiceExitsOne) {
  EXPECT_EQ(sts_cli({"classify", "--loo", "--server", "127.0.0.1:1"}).exit_code, 1);
  EXPECT_EQ(sts_cli({"score", "some-trial-id", "--server", "127.0.0.1:1"}).exit_code, 1);
}

TEST_F(CliTest, BadConfigFileExitsTwo) {
  std::ofstream(path("bad.conf")) << "colour = red\n";
  EXPECT_EQ(sts_cli({"--config", path("bad.conf"), "cohort", "generate", "--manifest", path("m.json")}).exit_code, 2);
}

TEST_F(CliTest, ConfigFileSuppliesDefaultsAndFlagsWin) {
  std::ofstream(path("c.conf")) << "# cohort seed\nseed = 5\n";
  ASSERT_EQ(sts_cli({"--config", path("c.conf"), "cohort", "generate", "--users", "1", "--trials", "1", "--manifest",
                     path("file.json")})
                .exit_code,
            0);
  ASSERT_EQ(sts_cli({"--config", path("c.conf"), "cohort", "generate", "--users", "1", "--trials", "1", "--seed", "6",
                     "--manifest", path("flag.json")})
                .exit_code,
            0);
  EXPECT_EQ(nlohmann::json::parse(slurp(path("file.json")))["seed"], 5);
  EXPECT_EQ(nlohmann::json::parse(slurp(path("flag.json")))["seed"], 6);
}

TEST_F(CliTest, CalibrateRecoversScale) {
  const RunResult r = sts_cli({"calibrate", "--yes", "--seed", "3"});
  ASSERT_EQ(r.exit_code, 0) << r.err;
  const auto j = nlohmann::json::parse(r.out.substr(r.out.find('{')));
  for (const char* c : {"front_left", "front_right", "rear_left", "rear_right"})
    EXPECT_LT(std::abs(j[c]["scale_error_pct"].get<double>()), 0.2) << c;
}

TEST_F(CliTest, CalibrateAbortsWhenOperatorQuits) {
  EXPECT_EQ(sts_cli({"calibrate"}, "q\n").exit_code, 2);
  const RunResult ok = sts_cli({"calibrate"}, "\n\n\n\n\n");
  EXPECT_EQ(ok.exit_code, 0) << ok.err;
}

TEST_F(CliTest, CohortPostThenClassifyEndToEnd) {
  ServerProcess server(kCli, path("store.db"));
  const RunResult gen = sts_cli({"cohort", "generate", "--users", "4", "--trials", "3", "--post", "--server",
                                 server.addr(), "--manifest", path("m.json")});
  ASSERT_EQ(gen.exit_code, 0) << gen.err;
  const RunResult loo = sts_cli({"classify", "--loo", "--label-by", "user", "--server", server.addr(),
                                 "--min-accuracy", "0.8", "--report", path("report.json")});
  ASSERT_EQ(loo.exit_code, 0) << loo.err << loo.out;
  const auto rep = nlohmann::json::parse(slurp(path("report.json")));
  EXPECT_EQ(rep["total"], 12);
  EXPECT_GE(rep["correct"].get<int>(), 10);

  const RunResult gate = sts_cli({"classify", "--loo", "--label-by", "user", "--server", server.addr(),
                                  "--min-accuracy", "1.01", "--text"});
  EXPECT_EQ(gate.exit_code, 3);
  EXPECT_NE(gate.out.find("accuracy"), std::string::npos);

  // Scoring by id goes through the service.
  const CohortManifest m = manifest_from_json(nlohmann::json::parse(slurp(path("m.json"))));
  const RunResult sc = sts_cli({"score", m.entries[0].trial_id, "--server", server.addr()});
  ASSERT_EQ(sc.exit_code, 0) << sc.err;
  EXPECT_EQ(nlohmann::json::parse(sc.out)["reps_30s"], 3);
  EXPECT_EQ(sts_cli({"score", "00000000-0000-4000-8000-000000000000", "--server", server.addr()}).exit_code, 2);

  // Test-mode classification needs the manifest for ground truth.
  EXPECT_EQ(sts_cli({"classify", "--server", server.addr()}).exit_code, 2);
}

TEST_F(CliTest, DeviceRunAtBothRates) {
  ServerProcess server(kCli, path("store.db"));
  for (const char* rate : {"10", "80"}) {
    const RunResult r = sts_cli({"device", "run", "--server", server.addr(), "--users", "2", "--trials", "1", "--rate",
                                 rate, "--duration", "10", "--mode", "train", "--label", "strong", "--seed", rate});
    ASSERT_EQ(r.exit_code, 0) << r.err;
  }
  const RunResult t = sts_cli({"device", "run", "--server", server.addr(), "--users", "1", "--trials", "1", "--mode",
                               "test", "--duration", "5"});
  ASSERT_EQ(t.exit_code, 0) << t.err;
  EXPECT_EQ(sts_cli({"device", "run", "--server", server.addr(), "--mode", "test", "--label", "weak"}).exit_code, 2);

  IngestionClient client(server.url());
  const auto train = client.pull(Mode::Train);
  ASSERT_EQ(train.size(), 4u);
  int at80 = 0;
  for (const auto& st : train) {
    EXPECT_NO_THROW(validate_packet(st.packet));
    EXPECT_EQ(st.packet.label, "strong");
    if (st.packet.nominal_rate == 80) {
      ++at80;
      for (const auto& ch : st.packet.channels) {
        EXPECT_GE(ch.size(), 760u);
        EXPECT_LE(ch.size(), 840u);
      }
    }
  }
  EXPECT_EQ(at80, 2);
  const auto test = client.pull(Mode::Test);
  ASSERT_EQ(test.size(), 1u);
  EXPECT_FALSE(test[0].packet.label);
}

TEST_F(CliTest, ServeStopsCleanlyOnSigterm) {
  ServerProcess server(kCli, path("store.db"));
  IngestionClient client(server.url());
  EXPECT_TRUE(client.pull(Mode::Train).empty());
  const int status = server.kill(SIGTERM);
  EXPECT_TRUE(WIFEXITED(status));
  EXPECT_EQ(WEXITSTATUS(status), 0);
}

TEST_F(CliTest, ServeRejectsBadAddress) {
  EXPECT_EQ(sts_cli({"serve", "--addr", "127.0.0.1:notaport", "--store", path("s.db")}).exit_code, 2);
}
