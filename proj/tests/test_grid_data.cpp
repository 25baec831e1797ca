#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <random>

#include "pasta/error.hpp"
#include "pasta/grid_data.hpp"
#include "test_util.hpp"

namespace {

using namespace pasta;
using namespace std::chrono;

Timestamp at(int y, unsigned mo, unsigned d, int h = 0, int mi = 0) {
  return sys_days{year{y} / month{mo} / day{d}} + hours{h} + minutes{mi};
}

std::string data_kind(const std::function<void()>& f) {
  try {
    f();
  } catch (const DataError& e) {
    return e.kind();
  }
  return "no error";
}

// Every cell of frame k holds k, so normalized inputs with an identity
// scaler read back as source frame indices.
FlowSequence index_sequence(std::size_t frames, int interval = 60, std::size_t n = 2, std::size_t m = 2) {
  FlowSequence seq(n, m, interval, at(2024, 1, 1));
  for (std::size_t k = 0; k < frames; ++k) {
    const std::vector<double> f(n * m, static_cast<double>(k));
    seq.push_frame(f);
  }
  return seq;
}

constexpr Scaler kIdentity{-1.0, 1.0};

TEST(Timestamps, ParseAndFormat) {
  EXPECT_EQ(parse_timestamp("2024-03-05T07:30:00"), at(2024, 3, 5, 7, 30));
  EXPECT_EQ(parse_timestamp("2024-03-05T07:30"), at(2024, 3, 5, 7, 30));
  EXPECT_EQ(parse_timestamp("2024-03-05"), at(2024, 3, 5));
  EXPECT_FALSE(parse_timestamp("2024-13-05").has_value());
  EXPECT_FALSE(parse_timestamp("yesterday").has_value());
  EXPECT_EQ(format_timestamp(at(2024, 3, 5, 7, 30)), "2024-03-05T07:30:00");
}

TEST(FlowIo, RoundTripIsBitExact) {
  FlowSequence seq(2, 2, 60, at(2024, 1, 1));
  seq.push_frame(std::vector<double>{0.1, 1.0 / 3.0, 12345.678901234567, 0.0});
  seq.push_frame(std::vector<double>{std::nextafter(1.0, 2.0), 1e-300, 7.0, 2.5e10});
  const auto dir = testutil::scratch("flow_round_trip");
  save_flow_sequence(seq, dir / "a.flow");
  const FlowSequence back = load_flow_sequence(dir / "a.flow");
  ASSERT_EQ(back.frame_count(), 2u);
  EXPECT_EQ(back.n(), 2u);
  EXPECT_EQ(back.interval_minutes(), 60);
  EXPECT_EQ(back.start(), seq.start());
  EXPECT_EQ(std::memcmp(back.values().data(), seq.values().data(), 8 * sizeof(double)), 0);
  EXPECT_EQ(serialize_flow_sequence(back), serialize_flow_sequence(seq));
  EXPECT_FALSE(std::filesystem::exists(dir / "a.flow.tmp"));
}

TEST(FlowIo, HeaderShape) {
  FlowSequence seq(2, 3, 30, at(2024, 1, 1, 0, 30));
  seq.push_frame(std::vector<double>{1, 2, 3, 4, 5, 6});
  const std::string text = serialize_flow_sequence(seq);
  EXPECT_EQ(text, "#pasta-flow v1 n=2 m=3 interval_minutes=30 start=2024-01-01T00:30:00\n1,2,3,4,5,6\n");
}

TEST(FlowIo, ErrorKinds) {
  const std::string h = "#pasta-flow v1 n=2 m=3 interval_minutes=60 start=2024-01-01T00:00:00\n";
  EXPECT_EQ(data_kind([&] { parse_flow_sequence(h + "1,2,3,4,5\n"); }), "ragged-row");
  EXPECT_EQ(data_kind([&] { parse_flow_sequence(h + "1,2,3,4,5,-1\n"); }), "negative-value");
  EXPECT_EQ(data_kind([&] { parse_flow_sequence(h + "1,2,3,4,5,x\n"); }), "bad-value");
  EXPECT_EQ(data_kind([&] { parse_flow_sequence(h); }), "empty-sequence");
  EXPECT_EQ(data_kind([] { parse_flow_sequence("#pasta-flow v2 n=1 m=1 interval_minutes=60 start=2024-01-01\n1\n"); }),
            "malformed-header");
  EXPECT_EQ(data_kind([] { parse_flow_sequence("n=1 m=1\n1\n"); }), "malformed-header");
  EXPECT_EQ(data_kind([] { parse_flow_sequence("#pasta-flow v1 n=1 m=1 interval_minutes=0 start=2024-01-01\n1\n"); }),
            "non-monotonic-time");
  EXPECT_EQ(data_kind([] { parse_flow_sequence("#pasta-flow v1 n=1 m=1 interval_minutes=-60 start=2024-01-01\n1\n"); }),
            "non-monotonic-time");
  EXPECT_EQ(data_kind([] { load_flow_sequence("/nonexistent/flow/file"); }), "io");
}

TEST(FlowSequence, PushValidates) {
  FlowSequence seq(1, 2, 60, at(2024, 1, 1));
  EXPECT_THROW(seq.push_frame(std::vector<double>{1.0}), DataError);
  EXPECT_THROW(seq.push_frame(std::vector<double>{1.0, -0.5}), DataError);
  EXPECT_THROW(seq.push_frame(std::vector<double>{1.0, NAN}), DataError);
  seq.push_frame(std::vector<double>{1.0, 2.0});
  EXPECT_EQ(seq.timestamp(1), at(2024, 1, 1, 1));
}

TEST(Holidays, ParseSkipsCommentsAndBlanks) {
  const HolidayCalendar cal = parse_holidays("# national\n2024-01-01\n\n2024-12-25  \n");
  EXPECT_EQ(cal.size(), 2u);
  EXPECT_TRUE(cal.count(sys_days{year{2024} / 12 / 25}));
  EXPECT_EQ(data_kind([] { parse_holidays("2024-02-30\n"); }), "bad-value");
}

TEST(Fragments, DefaultHourlyLagIndices) {
  const FragmentSpec spec;
  EXPECT_EQ(spec.channels(), 15);
  const FlowSequence seq = index_sequence(700);
  const auto samples = build_samples(seq, spec, kIdentity, {}, 673, 674);
  ASSERT_EQ(samples.size(), 1u);
  std::vector<double> sources;
  for (std::size_t c = 0; c < 15; ++c) sources.push_back(samples[0].input[c]);
  EXPECT_EQ(sources, (std::vector<double>{672, 671, 670, 669, 668, 648, 624, 600, 576, 552, 528, 504, 336, 168, 0}));
  EXPECT_EQ(samples[0].target[0], 673.0);
}

TEST(Fragments, FirstValidTargetAndSkipping) {
  const FragmentSpec spec;
  EXPECT_EQ(first_valid_target(spec, 60), 673u);
  const FlowSequence seq = index_sequence(700);
  const auto samples = build_samples(seq, spec, kIdentity);
  EXPECT_EQ(samples.front().target_index, 673u);
  EXPECT_EQ(samples.size(), 700u - 673u);
  EXPECT_EQ(data_kind([&] { build_samples(seq, spec, kIdentity, {}, 100, 101); }), "no-samples");
  EXPECT_EQ(data_kind([] { build_samples(index_sequence(600), FragmentSpec{}, kIdentity); }), "no-samples");
}

TEST(Fragments, HalfHourClosenessStepIsTwoFrames) {
  const FragmentSpec spec;
  const auto off = spec.frame_offsets(30);
  EXPECT_EQ(std::vector<std::size_t>(off.begin(), off.begin() + 5), (std::vector<std::size_t>{0, 2, 4, 6, 8}));
  EXPECT_EQ(off[5], 48u);
  EXPECT_EQ(off[11], 336u);
}

TEST(Fragments, UnrepresentableStep) {
  EXPECT_EQ(data_kind([] { FragmentSpec{}.frame_offsets(45); }), "step-resolution");
}

TEST(Fragments, ChannelLabels) {
  const auto labels = FragmentSpec{}.channel_labels();
  ASSERT_EQ(labels.size(), 15u);
  EXPECT_EQ(labels[0], "closeness-1h");
  EXPECT_EQ(labels[4], "closeness-5h");
  EXPECT_EQ(labels[5], "periodic-1d");
  EXPECT_EQ(labels[10], "periodic-6d");
  EXPECT_EQ(labels[11], "trend-1w");
  EXPECT_EQ(labels[14], "trend-4w");
  FragmentSpec half;
  half.closeness_step = minutes{30};
  EXPECT_EQ(half.channel_labels()[1], "closeness-1h");
  EXPECT_EQ(half.channel_labels()[0], "closeness-30m");
}

TEST(Fragments, ValidateRejectsEmptyAndNegative) {
  FragmentSpec none;
  none.t_closeness = none.t_periodic = none.t_trend = 0;
  EXPECT_THROW(none.validate(), InvalidArgument);
  FragmentSpec neg;
  neg.t_trend = -1;
  EXPECT_THROW(neg.validate(), InvalidArgument);
}

TEST(Fragments, AppendingFramesKeepsEarlierSamples) {
  FragmentSpec spec;
  spec.t_trend = 1;
  SyntheticConfig cfg;
  cfg.n = cfg.m = 4;
  cfg.days = 10;
  cfg.seed = 4;
  const FlowSequence longer = generate_synthetic(cfg);
  FlowSequence shorter(4, 4, 60, longer.start());
  for (std::size_t k = 0; k < 200; ++k) shorter.push_frame(longer.frame(k).values);
  const Scaler sc{0.0, 500.0};
  const auto a = build_samples(shorter, spec, sc), b = build_samples(longer, spec, sc);
  ASSERT_LT(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].target_index, b[i].target_index);
    EXPECT_EQ(std::vector<double>(a[i].input.data().begin(), a[i].input.data().end()),
              std::vector<double>(b[i].input.data().begin(), b[i].input.data().end()));
    EXPECT_EQ(a[i].raw_target, b[i].raw_target);
  }
}

TEST(Scaler, EndpointsAndRoundTrip) {
  std::vector<double> v(101);
  for (int i = 0; i <= 100; ++i) v[i] = i;
  const Scaler s = Scaler::fit(v);
  EXPECT_EQ(s.apply(0), -1.0);
  EXPECT_EQ(s.apply(100), 1.0);
  EXPECT_EQ(s.apply(50), 0.0);
  EXPECT_EQ(s.apply(25), -0.5);
  std::mt19937_64 gen(1);
  std::uniform_real_distribution<double> d(-50, 150);
  for (int i = 0; i < 1000; ++i) {
    const double x = d(gen);
    EXPECT_NEAR(s.invert(s.apply(x)), x, 1e-12);
  }
  EXPECT_EQ(data_kind([] { Scaler::fit(std::vector<double>{3, 3, 3}); }), "degenerate-scaler");
}

TEST(Scaler, FitOnTrainingFramesOnly) {
  SyntheticConfig cfg;
  cfg.n = cfg.m = 4;
  cfg.days = 10;
  const FlowSequence seq = generate_synthetic(cfg);
  const DataSplit split = split_by_test_days(seq, 2);
  EXPECT_EQ(split.test_start, 8u * 24u);
  const Scaler manual = Scaler::fit(seq.values().subspan(0, split.test_start * 16));
  EXPECT_EQ(split.scaler.data_min, manual.data_min);
  EXPECT_EQ(split.scaler.data_max, manual.data_max);
  FragmentSpec spec;
  spec.t_trend = 1;
  for (const auto& s : build_samples(seq, spec, split.scaler, {}, 0, split.test_start))
    for (double v : s.input.data()) {
      EXPECT_GE(v, -1.0);
      EXPECT_LE(v, 1.0);
    }
  EXPECT_EQ(data_kind([&] { split_by_test_days(seq, 10); }), "split");
}

TEST(External, HourlyMondayMidnight) {
  const auto f = external_features(at(2024, 1, 1), 60, {});
  ASSERT_EQ(f.size(), 32u);
  std::vector<double> want(32, 0.0);
  want[0] = want[24] = 1.0;
  EXPECT_EQ(f, want);
}

TEST(External, HalfHourSundayLastSlot) {
  const auto f = external_features(at(2024, 1, 7, 23, 30), 30, {});
  ASSERT_EQ(f.size(), 56u);
  EXPECT_EQ(f[47], 1.0);
  EXPECT_EQ(f[48 + 6], 1.0);
  EXPECT_EQ(f[55], 0.0);
}

TEST(External, HolidayFlagAndOneHotBlocks) {
  const HolidayCalendar cal = parse_holidays("2024-01-03\n");
  EXPECT_EQ(external_features(at(2024, 1, 3, 15), 60, cal).back(), 1.0);
  EXPECT_EQ(external_features(at(2024, 1, 4, 15), 60, cal).back(), 0.0);
  for (int h = 0; h < 24 * 9; ++h) {
    const auto f = external_features(at(2024, 1, 1) + hours{h}, 60, cal);
    double tod = 0, dow = 0;
    for (int i = 0; i < 24; ++i) tod += f[i];
    for (int i = 24; i < 31; ++i) dow += f[i];
    EXPECT_EQ(tod, 1.0);
    EXPECT_EQ(dow, 1.0);
  }
  EXPECT_EQ(external_dim(60), 32u);
  EXPECT_EQ(external_dim(30), 56u);
  EXPECT_EQ(data_kind([] { external_dim(15); }), "unsupported-interval");
  EXPECT_EQ(data_kind([] { external_features(at(2024, 1, 1), 45, {}); }), "unsupported-interval");
}

TEST(Synthetic, DeterministicAndNonNegative) {
  SyntheticConfig cfg;
  cfg.seed = 99;
  const std::string a = serialize_flow_sequence(generate_synthetic(cfg));
  const std::string b = serialize_flow_sequence(generate_synthetic(cfg));
  EXPECT_EQ(a, b);
  cfg.seed = 100;
  EXPECT_NE(serialize_flow_sequence(generate_synthetic(cfg)), a);
  cfg.noise = 3.0;
  const FlowSequence noisy = generate_synthetic(cfg);
  EXPECT_EQ(noisy.frame_count(), 35u * 24u);
  for (double v : noisy.values()) EXPECT_GE(v, 0.0);
}

TEST(Synthetic, HotspotOutOfBounds) {
  SyntheticConfig cfg;
  cfg.hotspots = {{3, 16}};
  EXPECT_THROW(generate_synthetic(cfg), InvalidArgument);
}

TEST(Synthetic, HotspotsReadAsHighLowAtPeakHours) {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    SyntheticConfig cfg;
    cfg.seed = seed;
    const FlowSequence seq = generate_synthetic(cfg);
    const auto spots = default_hotspots(cfg.n, cfg.m);
    std::vector<std::size_t> hl(spots.size(), 0);
    std::size_t peaks = 0;
    for (std::size_t t = 0; t < seq.frame_count(); ++t) {
      if (!is_peak(cfg, seq.timestamp(t))) continue;
      ++peaks;
      const QuadrantMap q = quadrants(seq.frame(t));
      for (std::size_t h = 0; h < spots.size(); ++h) hl[h] += q(spots[h].first, spots[h].second) == Quadrant::HL;
    }
    ASSERT_EQ(peaks, 35u * 2u);
    for (std::size_t h = 0; h < spots.size(); ++h)
      EXPECT_GE(2 * hl[h], peaks) << "seed " << seed << " hotspot " << h << ": " << hl[h] << "/" << peaks;
  }
}

}  // namespace
