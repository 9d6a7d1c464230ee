// sts: command-line entry point for the sit-to-stand chair toolkit.
//
//   sts serve              run the ingestion service
//   sts device run         simulate a chair and POST trials
//   sts cohort generate    write or POST a labeled synthetic cohort
//   sts score              score one trial (file or stored trial id)
//   sts classify           pull trials and evaluate the DTW k-NN classifier
//   sts calibrate          tare / known-mass calibration against a simulated chair

#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "sts/sts.hpp"

namespace fs = std::filesystem;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitValidation = 2;
constexpr int kExitGate = 3;

sts::IngestionServer* g_server = nullptr;

extern "C" void on_signal(int) {
  if (g_server) g_server->stop();
}

/// Resolves defaults, environment and an optional --config file before the
/// real parse so that --help shows the effective defaults.
sts::Config preload_config(int argc, char** argv) {
  sts::Config cfg;
  sts::apply_env(cfg);
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--config" && i + 1 < argc) sts::apply_file(cfg, argv[i + 1]);
    else if (a.rfind("--config=", 0) == 0) sts::apply_file(cfg, a.substr(9));
  }
  return cfg;
}

std::string server_url(const std::string& addr) {
  return addr.rfind("http://", 0) == 0 ? addr : "http://" + addr;
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw sts::Error(sts::ErrorKind::Io, "cannot read " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

sts::ChannelMode channel_mode(const std::string& s) {
  if (s == "raw") return sts::ChannelMode::Raw;
  if (s == "total") return sts::ChannelMode::WithTotal;
  throw sts::Error(sts::ErrorKind::InvalidArgument, "channels must be raw or total");
}

sts::DtwMode dtw_mode(const std::string& s) {
  if (s == "dependent") return sts::DtwMode::Dependent;
  if (s == "independent") return sts::DtwMode::Independent;
  throw sts::Error(sts::ErrorKind::InvalidArgument, "dtw must be dependent or independent");
}

std::vector<sts::Strength> parse_classes(const std::string& csv) {
  std::vector<sts::Strength> out;
  std::stringstream ss(csv);
  for (std::string item; std::getline(ss, item, ',');) {
    const auto s = sts::strength_from_string(item);
    if (!s) throw sts::Error(sts::ErrorKind::InvalidArgument, "unknown strength class '" + item + "'");
    out.push_back(*s);
  }
  return out;
}

void write_text(const fs::path& p, const std::string& content) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out || !(out << content)) throw sts::Error(sts::ErrorKind::Io, "cannot write " + p.string());
}

bool confirm(bool assume_yes, const std::string& prompt) {
  if (assume_yes) {
    std::cout << prompt << " [auto]\n";
    return true;
  }
  std::cout << prompt << " Press Enter to continue (q to abort): " << std::flush;
  std::string line;
  if (!std::getline(std::cin, line)) return false;
  return line != "q";
}

}  // namespace

int main(int argc, char** argv) {
  sts::Config cfg;
  try {
    cfg = preload_config(argc, argv);
  } catch (const sts::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  }

  CLI::App app{"Sit-to-stand chair toolkit: simulated device, ingestion service, scoring, and classification"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_config();  // disable CLI11's own config handling; --config is ours
  std::string config_path;
  app.add_option("--config", config_path, "key = value config file (overrides env, overridden by flags)");
  app.add_option("--seed", cfg.seed, "random seed")->capture_default_str();

  // serve
  auto* serve = app.add_subcommand("serve", "run the ingestion service");
  bool live_sim = false;
  double live_duration = 60.0, live_speed = 1.0;
  bool quiet = false;
  serve->add_option("--addr", cfg.addr, "listen address host:port (env STS_ADDR)")->capture_default_str();
  serve->add_option("--store", cfg.store, "trial store path (env STS_STORE)")->capture_default_str();
  serve->add_flag("--live-sim", live_sim, "attach a simulated device session to /api/v1/live");
  serve->add_option("--live-duration", live_duration, "simulated live session length in seconds")->capture_default_str();
  serve->add_option("--live-speed", live_speed, "simulated live session speed relative to real time")->capture_default_str();
  serve->add_option("--rate", cfg.rate, "simulated device sampling rate (10|80)")->capture_default_str();
  serve->add_flag("--quiet", quiet, "suppress the request log");

  // device run
  auto* device = app.add_subcommand("device", "simulated chair device");
  device->require_subcommand(1);
  auto* device_run = device->add_subcommand("run", "simulate trials and POST them to the service");
  int dev_users = 1, dev_trials = 1;
  std::string dev_mode = "train", dev_label, dev_out, dev_strength;
  device_run->add_option("--server", cfg.addr, "service address")->capture_default_str();
  device_run->add_option("--users", dev_users, "number of simulated users")->capture_default_str();
  device_run->add_option("--trials", dev_trials, "trials per user")->capture_default_str();
  device_run->add_option("--rate", cfg.rate, "sampling rate (10|80)")->capture_default_str();
  device_run->add_option("--duration", cfg.duration_s, "trial duration in seconds")->capture_default_str();
  device_run->add_option("--mode", dev_mode, "train or test")->capture_default_str();
  device_run->add_option("--label", dev_label, "label for train trials (a strength class also sets the motion)");
  device_run->add_option("--strength", dev_strength, "motion strength class (weak|moderate|strong)");
  device_run->add_option("--out", dev_out, "also write each envelope into this directory");

  // cohort generate
  auto* cohort = app.add_subcommand("cohort", "synthetic cohorts");
  cohort->require_subcommand(1);
  auto* cohort_gen = cohort->add_subcommand("generate", "generate a labeled synthetic cohort");
  sts::CohortOptions co;
  std::string co_classes = "weak,moderate,strong", co_out, co_manifest = "manifest.json";
  bool co_post = false;
  double co_noise_kg = 0.05, co_drift = 20.0;
  cohort_gen->add_option("--users", co.n_users, "number of users")->capture_default_str();
  cohort_gen->add_option("--trials", co.trials_per_user, "trials per user")->capture_default_str();
  cohort_gen->add_option("--test-per-user", co.test_per_user, "trials per user sent to the test service")
      ->capture_default_str();
  cohort_gen->add_option("--classes", co_classes, "strength classes assigned round-robin to users")
      ->capture_default_str();
  cohort_gen->add_option("--reps", co.reps, "sit-to-stand repetitions per trial")->capture_default_str();
  cohort_gen->add_option("--rate", cfg.rate, "sampling rate (10|80)")->capture_default_str();
  cohort_gen->add_option("--duration", cfg.duration_s, "trial duration in seconds")->capture_default_str();
  cohort_gen->add_option("--noise-kg", co_noise_kg, "differential noise std dev in kg")->capture_default_str();
  cohort_gen->add_option("--drift-rate", co_drift, "drift in counts per second")->capture_default_str();
  cohort_gen->add_option("--out", co_out, "write one envelope file per trial into this directory");
  cohort_gen->add_option("--manifest", co_manifest, "manifest output path")->capture_default_str();
  cohort_gen->add_flag("--post", co_post, "POST every trial to the service");
  cohort_gen->add_option("--server", cfg.addr, "service address")->capture_default_str();

  // score
  auto* score = app.add_subcommand("score", "score one trial");
  std::string score_target, score_plot, score_csv, score_mode = "train";
  double body_weight = 0.0, grid_rate = 0.0;
  score->add_option("trial", score_target, "envelope file or stored trial id")->required();
  score->add_option("--server", cfg.addr, "service address for trial ids")->capture_default_str();
  score->add_option("--mode", score_mode, "service holding the trial id (train|test)")->capture_default_str();
  score->add_option("--plot", score_plot, "write an SVG plot here");
  score->add_option("--csv", score_csv, "write the aligned trial as CSV here");
  score->add_option("--body-weight", body_weight, "body weight in kg (0 estimates it)")->capture_default_str();
  score->add_option("--grid-rate", grid_rate, "resampling rate in Hz (0 uses the device rate)")->capture_default_str();
  score->add_option("--seated-fraction", cfg.seated_fraction, "seated threshold as a fraction of body weight")
      ->capture_default_str();
  score->add_option("--standing-fraction", cfg.standing_fraction, "standing threshold as a fraction of body weight")
      ->capture_default_str();
  score->add_option("--dwell-ms", cfg.dwell_ms, "minimum state dwell in ms")->capture_default_str();

  // classify
  auto* classify = app.add_subcommand("classify", "evaluate the DTW k-NN classifier on stored trials");
  std::string manifest_path, report_path, label_by = "label";
  bool loo = false, text = false;
  double min_accuracy = 0.0, cls_grid = 0.0;
  classify->add_option("--server", cfg.addr, "service address")->capture_default_str();
  classify->add_option("--manifest", manifest_path, "cohort manifest with test ground truth");
  classify->add_flag("--loo", loo, "leave-one-out over the training service");
  classify->add_option("--label-by", label_by, "label or user")->capture_default_str();
  classify->add_option("--k", cfg.k, "neighbors")->capture_default_str();
  classify->add_option("--band", cfg.band_fraction, "Sakoe-Chiba band fraction")->capture_default_str();
  classify->add_option("--channels", cfg.channels, "raw or total")->capture_default_str();
  classify->add_option("--dtw", cfg.dtw, "dependent or independent")->capture_default_str();
  classify->add_option("--grid-rate", cls_grid, "resampling rate in Hz (0 uses the device rate)")
      ->capture_default_str();
  classify->add_option("--min-accuracy", min_accuracy, "exit 3 when accuracy is below this")->capture_default_str();
  classify->add_option("--report", report_path, "write the JSON report here");
  classify->add_flag("--text", text, "print the plain-text table instead of JSON");

  // calibrate
  auto* calibrate = app.add_subcommand("calibrate", "tare and known-mass calibration on a simulated chair");
  double known_mass = 10.0;
  std::size_t cal_samples = 50;
  bool assume_yes = false;
  calibrate->add_option("--known-mass", known_mass, "reference mass in kg")->capture_default_str();
  calibrate->add_option("--samples", cal_samples, "readings averaged per step (>= 10)")->capture_default_str();
  calibrate->add_option("--rate", cfg.rate, "sampling rate (10|80)")->capture_default_str();
  calibrate->add_flag("--yes", assume_yes, "do not wait for the operator");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitValidation;
  }

  try {
    if (*serve) {
      const auto [host, port] = sts::split_addr(cfg.addr);
      sts::TrialStore store(cfg.store);
      sts::LiveHub hub;
      std::unique_ptr<sts::DeviceSession> session;
      if (live_sim) {
        const auto profile = sts::generate_profile(sts::Strength::Moderate, 70.0, cfg.seed);
        session = std::make_unique<sts::DeviceSession>(hub, profile, sts::default_cohort_drift(), live_duration,
                                                       cfg.rate, cfg.seed, live_speed);
      }
      sts::IngestionServer server(store, hub, quiet ? nullptr : &std::cout);
      g_server = &server;
      std::signal(SIGINT, on_signal);
      std::signal(SIGTERM, on_signal);
      server.run(host, port, [&, host = host](int bound) {
        std::cerr << "listening on " << host << ":" << bound << ", store " << cfg.store << std::endl;
      });
      g_server = nullptr;
      return kExitOk;
    }

    if (*device_run) {
      const auto mode = sts::mode_from_string(dev_mode);
      if (!mode) throw sts::Error(sts::ErrorKind::InvalidArgument, "--mode must be train or test");
      if (*mode == sts::Mode::Test && !dev_label.empty())
        throw sts::Error(sts::ErrorKind::InvalidArgument, "test trials cannot carry a label");
      sts::Strength strength = sts::Strength::Moderate;
      if (!dev_strength.empty()) {
        const auto s = sts::strength_from_string(dev_strength);
        if (!s) throw sts::Error(sts::ErrorKind::InvalidArgument, "unknown strength '" + dev_strength + "'");
        strength = *s;
      } else if (auto s = sts::strength_from_string(dev_label)) {
        strength = *s;
      }
      sts::IngestionClient client(server_url(cfg.addr));
      sts::Rng ids(sts::mix_seed(cfg.seed, 0xDE1));
      for (int u = 0; u < dev_users; ++u) {
        const std::uint64_t user_seed = sts::mix_seed(cfg.seed, static_cast<std::uint64_t>(u));
        const auto profile = sts::generate_profile(strength, sts::Rng(user_seed).uniform(52.0, 85.0), user_seed);
        for (int t = 0; t < dev_trials; ++t) {
          sts::TrialMetadata meta;
          meta.trial_id = ids.uuid();
          meta.user_id = "U" + std::to_string(u + 1);
          meta.mode = *mode;
          if (!dev_label.empty()) meta.label = dev_label;
          meta.started_at = sts::format_rfc3339(sts::now_ms());
          meta.nominal_rate = cfg.rate;
          meta.calibration = sts::default_calibration();
          const auto packet = sts::record_trial(profile, meta, sts::default_cohort_drift(), cfg.duration_s,
                                                sts::mix_seed(user_seed, static_cast<std::uint64_t>(t) + 1));
          if (!dev_out.empty()) write_text(fs::path(dev_out) / (meta.trial_id + ".json"), sts::wire::serialize(packet));
          const int status = client.post_trial(packet);
          std::cout << meta.trial_id << " " << meta.user_id << " " << status << "\n";
        }
      }
      return kExitOk;
    }

    if (*cohort_gen) {
      co.classes = parse_classes(co_classes);
      co.rate = cfg.rate;
      co.duration_s = cfg.duration_s;
      co.seed = cfg.seed;
      co.drift = {co_drift, co_noise_kg * sts::kDefaultScaleCountsPerKg};
      const sts::Cohort c = sts::generate_cohort(co);
      write_text(co_manifest, sts::wire::canonical(sts::manifest_to_json(c.manifest)) + "\n");
      if (!co_out.empty())
        for (const auto& p : c.packets) write_text(fs::path(co_out) / (p.trial_id + ".json"), sts::wire::serialize(p));
      if (co_post) {
        sts::IngestionClient client(server_url(cfg.addr));
        for (const auto& p : c.packets) client.post_trial(p);
      }
      std::cout << "generated " << c.packets.size() << " trials, manifest " << co_manifest << "\n";
      return kExitOk;
    }

    if (*score) {
      sts::TrialPacket packet;
      if (fs::is_regular_file(score_target)) {
        packet = sts::wire::parse(read_file(score_target));
      } else {
        const auto mode = sts::mode_from_string(score_mode);
        if (!mode) throw sts::Error(sts::ErrorKind::InvalidArgument, "--mode must be train or test");
        sts::IngestionClient client(server_url(cfg.addr));
        auto stored = client.get(*mode, score_target);
        if (!stored) throw sts::Error(sts::ErrorKind::NotFound, "trial " + score_target + " not found");
        packet = stored->packet;
      }
      const double rate = grid_rate > 0.0 ? grid_rate : packet.nominal_rate;
      const auto aligned = sts::resample_uniform(packet, rate);
      const auto total = sts::total_load(aligned);
      const sts::DetectorConfig det{cfg.seated_fraction, cfg.standing_fraction, cfg.dwell_ms};
      const auto events = sts::detect_transitions(
          total, body_weight > 0.0 ? std::optional<double>(body_weight) : std::nullopt, det);
      const auto sc = sts::score_trial(events);
      nlohmann::json ev = nlohmann::json::array();
      for (const auto& e : events)
        ev.push_back({{"kind", std::string(sts::to_string(e.kind))}, {"t_start_ms", e.t_start_ms}, {"t_end_ms", e.t_end_ms}});
      const nlohmann::json out = {
          {"trial_id", packet.trial_id},
          {"reps_30s", sc.reps_30s},
          {"five_reps_time_s", sc.five_reps_time_s ? nlohmann::json(*sc.five_reps_time_s) : nlohmann::json(nullptr)},
          {"events", ev}};
      std::cout << sts::wire::canonical(out) << "\n";
      if (!score_plot.empty()) sts::emit_plot(aligned, score_plot);
      if (!score_csv.empty()) sts::write_csv(aligned, score_csv);
      return kExitOk;
    }

    if (*classify) {
      sts::EvalOptions opt;
      opt.knn.k = static_cast<std::size_t>(cfg.k);
      opt.knn.band_fraction = cfg.band_fraction;
      opt.knn.dtw = dtw_mode(cfg.dtw);
      opt.channels = channel_mode(cfg.channels);
      opt.grid_rate = cls_grid;
      if (label_by == "user") opt.label_by = sts::LabelSource::User;
      else if (label_by != "label") throw sts::Error(sts::ErrorKind::InvalidArgument, "--label-by must be label or user");
      sts::require(cfg.k >= 1, "--k must be at least 1");
      sts::CohortManifest manifest;
      if (!manifest_path.empty()) manifest = sts::manifest_from_json(sts::wire::parse_json(read_file(manifest_path)));
      else if (!loo && opt.label_by == sts::LabelSource::Label)
        throw sts::Error(sts::ErrorKind::InvalidArgument, "--manifest is required to score the test service");
      sts::IngestionClient client(server_url(cfg.addr));
      const auto report = sts::evaluate_service(client, manifest, opt, loo);
      const std::string json = sts::wire::canonical(report.to_json());
      if (!report_path.empty()) write_text(report_path, json + "\n");
      std::cout << (text ? report.to_text() : json + "\n");
      if (report.accuracy < min_accuracy) {
        std::cerr << "accuracy " << report.accuracy << " is below the required " << min_accuracy << "\n";
        return kExitGate;
      }
      return kExitOk;
    }

    if (*calibrate) {
      // The simulated gauges have a response unknown to the operator; the
      // procedure must recover it from readings alone.
      sts::Rng truth_rng(sts::mix_seed(cfg.seed, 0xCA1));
      sts::ChairCalibration truth;
      for (auto& c : truth) {
        c.tare_counts = static_cast<std::int64_t>(truth_rng.uniform(-80000.0, 80000.0));
        c.scale_counts_per_kg = truth_rng.uniform(300000.0, 370000.0);
      }
      const sts::DriftModel drift{20.0, 0.02 * sts::kDefaultScaleCountsPerKg};
      sts::SamplerConfig sc;
      sc.nominal_rate = cfg.rate;
      const double secs = static_cast<double>(cal_samples + 2) / (cfg.rate * 0.95);
      if (!confirm(assume_yes, "Remove all load from the chair.")) return kExitValidation;
      const auto unloaded = sts::corrected_streams(
          sts::run_samplers(sts::StaticLoadRig({0, 0, 0, 0}, truth, drift), sc, secs, cfg.seed));
      sts::ChairCalibration result;
      for (sts::ChannelId c : sts::kChannels)
        result[sts::index_of(c)].tare_counts = sts::tare_channel(unloaded[sts::index_of(c)], cal_samples);
      for (sts::ChannelId c : sts::kChannels) {
        if (!confirm(assume_yes, "Place the " + std::to_string(known_mass) + " kg mass on the " +
                                     std::string(sts::channel_key(c)) + " corner."))
          return kExitValidation;
        sts::PerChannel<double> loads{0, 0, 0, 0};
        loads[sts::index_of(c)] = known_mass;
        const auto loaded = sts::corrected_streams(sts::run_samplers(
            sts::StaticLoadRig(loads, truth, drift), sc, secs, sts::mix_seed(cfg.seed, sts::index_of(c) + 1)));
        auto& r = result[sts::index_of(c)];
        r.scale_counts_per_kg = sts::calibrate_scale(loaded[sts::index_of(c)], r.tare_counts, known_mass, cal_samples);
      }
      nlohmann::json out = nlohmann::json::object();
      for (sts::ChannelId c : sts::kChannels) {
        const auto& r = result[sts::index_of(c)];
        const auto& t = truth[sts::index_of(c)];
        out[std::string(sts::channel_key(c))] = {
            {"tare_counts", r.tare_counts},
            {"scale_counts_per_kg", r.scale_counts_per_kg},
            {"scale_error_pct", 100.0 * (r.scale_counts_per_kg - t.scale_counts_per_kg) / t.scale_counts_per_kg}};
      }
      std::cout << out.dump(2) << "\n";
      return kExitOk;
    }
  } catch (const sts::Error& e) {
    std::cerr << "error (" << sts::to_string(e.kind()) << "): " << e.what() << "\n";
    return e.kind() == sts::ErrorKind::Transport || e.kind() == sts::ErrorKind::Io ? kExitFailure : kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitOk;
}
