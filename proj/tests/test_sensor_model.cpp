#include <cmath>
#include <cstdint>
#include <limits>

#include <gtest/gtest.h>

#include "sts/sensor_model.hpp"

using namespace sts;

namespace {

MotionProfile seated_profile(double weight) {
  MotionProfile p;
  p.body_weight_kg = weight;
  p.lead_s = 0.0;
  p.descent_time_s = 0.05;
  p.sit_time_s = 1000.0;
  p.reps = 1;
  return p;
}

MotionProfile stand_sit_stand() {
  MotionProfile p;
  p.body_weight_kg = 72.0;
  p.lead_s = 2.0;
  p.descent_time_s = 1.5;
  p.sit_time_s = 4.0;
  p.rise_time_s = 1.4;
  p.stand_time_s = 2.0;
  p.reps = 3;
  return p;
}

}  // namespace

TEST(CountsToKg, TareMapsToZero) {
  const Calibration cal{1234, 400.0};
  EXPECT_EQ(counts_to_kg(1234, cal), 0.0);
}

TEST(CountsToKg, LinearLaw) {
  EXPECT_DOUBLE_EQ(counts_to_kg(5000, {1000, 400.0}), 10.0);
  EXPECT_DOUBLE_EQ(counts_to_kg(-3000, {1000, 400.0}), -10.0);
}

TEST(CountsToKg, OverRangeBeyondRating) {
  try {
    counts_to_kg(22'000'000, {0, 400.0});
    FAIL() << "expected OverRange";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::OverRange);
  }
  EXPECT_NO_THROW(counts_to_kg(20'000, {0, 400.0}));
}

TEST(CountsToKg, RejectsNonPositiveScale) {
  try {
    counts_to_kg(0, {0, 0.0});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::NonPositiveScale);
  }
}

TEST(CountsToKg, StrictlyIncreasingInRaw) {
  const Calibration cal{-77, 335544.0};
  double last = -std::numeric_limits<double>::infinity();
  for (std::int64_t raw = -8'000'000; raw <= 8'000'000; raw += 99'991) {
    const double kg = counts_to_kg(raw, cal);
    EXPECT_GT(kg, last);
    last = kg;
  }
}

TEST(DifferentialRead, Examples) {
  EXPECT_EQ(differential_read(5000, 0), 5000);
  EXPECT_EQ(differential_read(5000 + 123456, 123456), 5000);
}

TEST(DifferentialRead, CommonModeCancelsForAnyOffset) {
  Rng rng(7);
  for (int i = 0; i < 1000; ++i) {
    const auto a = static_cast<std::int64_t>(rng.next() % 16'000'000) - 8'000'000;
    const auto r = static_cast<std::int64_t>(rng.next() % 16'000'000) - 8'000'000;
    const auto d = static_cast<std::int64_t>(rng.next() % 2'000'000'000) - 1'000'000'000;
    EXPECT_EQ(differential_read(a + d, r + d), differential_read(a, r));
  }
}

TEST(Quantize, ZeroAtZeroTare) { EXPECT_EQ(quantize(0.0, {0, 400.0}, 24), 0); }

TEST(Quantize, RoundsHalfAwayFromZero) {
  EXPECT_EQ(quantize(2.5, {0, 1.0}, 24), 3);
  EXPECT_EQ(quantize(-2.5, {0, 1.0}, 24), -3);
  EXPECT_EQ(quantize(2.4999, {0, 1.0}, 24), 2);
}

TEST(Quantize, SaturatesAtBitRange) {
  EXPECT_EQ(quantize(1000.0, {0, 335544.0}, 24), (1 << 23) - 1);
  EXPECT_EQ(quantize(-1000.0, {0, 335544.0}, 24), -(1 << 23));
  EXPECT_EQ(quantize(1.0, {0, 1000.0}, 8), 127);
  EXPECT_EQ(quantize(-1.0, {0, 1000.0}, 8), -128);
  EXPECT_EQ(quantize(1e12, {0, 1.0}, 32), 2147483647LL);
}

TEST(Quantize, RoundTripWithinHalfCount) {
  Rng rng(11);
  const Calibration cal{-4321, 335544.0};
  for (int i = 0; i < 2000; ++i) {
    const double x = rng.uniform(-24.0, 24.0);
    const double back = counts_to_kg(quantize(x, cal), cal);
    EXPECT_LE(std::abs(back - x), 0.5 / cal.scale_counts_per_kg + 1e-15);
  }
}

TEST(SimulateChair, EmptyChairReadsTareExactly) {
  MotionProfile standing;
  standing.reps = 0;
  ChairCalibration cal;
  for (auto& c : cal) c = {1234, 335544.0};
  const auto rec = simulate_chair(standing, cal, {}, 10.0, 10, 99);
  for (ChannelId c : kChannels)
    for (const RawSample& s : corrected_stream(rec, c)) EXPECT_EQ(s.counts, 1234);
}

TEST(SimulateChair, SeatedWeightSplitsEvenly) {
  const DriftModel drift{20.0, 0.05 * kDefaultScaleCountsPerKg};
  const auto rec = simulate_chair(seated_profile(80.0), default_calibration(), drift, 30.0, 10, 5);
  for (ChannelId c : kChannels) {
    double sum = 0.0;
    int n = 0;
    for (const RawSample& s : corrected_stream(rec, c)) {
      if (s.t_ms < 100) continue;
      sum += counts_to_kg(s.counts, Calibration{});
      ++n;
    }
    EXPECT_NEAR(sum / n, 20.0, 3.0 * drift.noise_sigma / kDefaultScaleCountsPerKg);
  }
}

TEST(SimulateChair, SampleCountMatchesRateAndDuration) {
  for (int rate : {10, 80}) {
    const auto rec = simulate_chair(stand_sit_stand(), default_calibration(), {}, 30.0, rate, 3);
    for (ChannelId c : kChannels) {
      const auto n = static_cast<double>(rec.active[index_of(c)].size());
      EXPECT_GE(n, std::floor(rate * 30.0 * 0.98));
      EXPECT_LE(n, std::ceil(rate * 30.0 * 1.02));
    }
  }
}

TEST(SimulateChair, NoiseFreeOutputIsQuantizedProfile) {
  const MotionProfile p = stand_sit_stand();
  const LoadCurves curves(p);
  const Calibration cal{};
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const auto rec = simulate_chair(p, default_calibration(), {}, 30.0, 10, seed);
    for (ChannelId c : kChannels)
      for (const RawSample& s : corrected_stream(rec, c))
        ASSERT_EQ(s.counts, quantize(curves.corner(c, s.t_ms / 1000.0), cal));
  }
  // Without jitter every seed yields the same bytes.
  const auto a = simulate_chair(p, default_calibration(), {}, 30.0, 10, 1, 0.0);
  const auto b = simulate_chair(p, default_calibration(), {}, 30.0, 10, 2, 0.0);
  for (ChannelId c : kChannels) EXPECT_EQ(a.active[index_of(c)], b.active[index_of(c)]);
}

TEST(SimulateChair, DeterministicPerSeed) {
  const DriftModel drift{20.0, 1000.0};
  const auto a = simulate_chair(stand_sit_stand(), default_calibration(), drift, 10.0, 80, 42);
  const auto b = simulate_chair(stand_sit_stand(), default_calibration(), drift, 10.0, 80, 42);
  const auto c = simulate_chair(stand_sit_stand(), default_calibration(), drift, 10.0, 80, 43);
  EXPECT_EQ(a.active, b.active);
  EXPECT_EQ(a.reference, b.reference);
  EXPECT_NE(a.active, c.active);
}

TEST(SimulateChair, CornersConserveTotalLoad) {
  MotionProfile p = stand_sit_stand();
  p.asymmetry = 0.2;
  p.tremor_amp_kg = 2.0;
  const LoadCurves curves(p);
  for (double t = 0.0; t < 30.0; t += 0.013) {
    double sum = 0.0;
    for (ChannelId c : kChannels) sum += curves.corner(c, t);
    EXPECT_NEAR(sum, curves.total(t), 1e-12 * p.body_weight_kg);
  }
  // After quantization and noise the calibrated sum stays within the error budget.
  const DriftModel drift{0.0, 0.01 * kDefaultScaleCountsPerKg};
  const double scale = kDefaultScaleCountsPerKg;
  const double bound = 4.0 * (0.5 / scale + 3.0 * drift.noise_sigma / scale);
  SamplerConfig cfg;
  cfg.jitter_fraction = 0.0;
  const auto rec = run_samplers(SimulatedChair(curves, default_calibration(), drift), cfg, 30.0, 8);
  const auto corr = corrected_streams(rec);
  for (std::size_t i = 0; i < corr[0].size(); ++i) {
    double sum = 0.0;
    for (ChannelId c : kChannels) sum += counts_to_kg(corr[index_of(c)][i].counts, Calibration{});
    EXPECT_NEAR(sum, curves.total(corr[0][i].t_ms / 1000.0), bound);
  }
}

TEST(SimulateChair, ReferenceStreamsCarryNoLoad) {
  const DriftModel drift{50.0, 0.0};
  const auto rec = simulate_chair(stand_sit_stand(), default_calibration(), drift, 30.0, 10, 4);
  for (ChannelId c : kChannels)
    for (const RawSample& s : rec.reference[index_of(c)])
      EXPECT_EQ(s.counts, std::llround(50.0 * (static_cast<double>(s.t_ms) / 1000.0)));
}

// Reference: noise-free ground truth from the load curves; with zero noise
// the only residual is the two independent roundings.
TEST(DriftCancellation, NoiselessDifferentialReadIsExact) {
  const DriftModel drift{50.0, 0.0};
  const MotionProfile p = stand_sit_stand();
  const LoadCurves curves(p);
  const auto rec = simulate_chair(p, default_calibration(), drift, 30.0, 10, 2024);
  double worst_corrected = 0.0, worst_raw = 0.0;
  for (ChannelId c : kChannels) {
    const auto& act = rec.active[index_of(c)];
    const auto& ref = rec.reference[index_of(c)];
    for (std::size_t i = 0; i < act.size(); ++i) {
      const double ideal = curves.corner(c, act[i].t_ms / 1000.0) * kDefaultScaleCountsPerKg;
      worst_corrected = std::max(
          worst_corrected, std::abs(static_cast<double>(differential_read(act[i].counts, ref[i].counts)) - ideal));
      worst_raw = std::max(worst_raw, std::abs(static_cast<double>(act[i].counts) - ideal));
    }
  }
  EXPECT_LE(worst_corrected, 1.0);
  EXPECT_GT(worst_raw, 1400.0);
  EXPECT_LT(worst_raw, 1501.0);
}

TEST(DriftCancellation, ResidualIsWhiteNoiseOfSigma) {
  const DriftModel drift{50.0, 10.0};
  const MotionProfile p = stand_sit_stand();
  const LoadCurves curves(p);
  const auto rec = simulate_chair(p, default_calibration(), drift, 30.0, 80, 2024);
  double sum = 0.0, sq = 0.0, early = 0.0, late = 0.0;
  int n = 0, ne = 0, nl = 0;
  for (ChannelId c : kChannels) {
    const auto corr = corrected_stream(rec, c);
    for (const RawSample& s : corr) {
      const double e = static_cast<double>(s.counts) - curves.corner(c, s.t_ms / 1000.0) * kDefaultScaleCountsPerKg;
      sum += e;
      sq += e * e;
      ++n;
      if (s.t_ms < 5000) early += e, ++ne;
      if (s.t_ms >= 25000) late += e, ++nl;
    }
  }
  const double mean = sum / n;
  const double sd = std::sqrt(sq / n - mean * mean);
  EXPECT_NEAR(mean, 0.0, 0.5);
  EXPECT_NEAR(sd, drift.noise_sigma, 0.05 * drift.noise_sigma);
  // No trend: drift would put ~1250 counts between these windows.
  EXPECT_NEAR(late / nl - early / ne, 0.0, 1.5);
}

TEST(GaugeChannel, ValidatesRanges) {
  EXPECT_NO_THROW((GaugeChannel{ChannelId::RearLeft, 50.0, 24, 80}.validate()));
  EXPECT_THROW((GaugeChannel{ChannelId::RearLeft, 0.0, 24, 10}.validate()), Error);
  EXPECT_THROW((GaugeChannel{ChannelId::RearLeft, 50.0, 33, 10}.validate()), Error);
  EXPECT_THROW((GaugeChannel{ChannelId::RearLeft, 50.0, 24, 20}.validate()), Error);
}
