#include <gtest/gtest.h>

#include <fstream>

#include "oracles/oracles.hpp"
#include "psfr/frame_signals.hpp"
#include "test_util.hpp"

using namespace psfr;
using testutil::scene;

namespace {

PsfrFrameOutcome outcome_with(std::vector<Point2> survivors) {
  PsfrFrameOutcome o;
  o.survivors = std::move(survivors);
  return o;
}

}  // namespace

TEST(FrameSignals, SentinelCues) {
  const auto f = make_frame_gray(oracle::textured_image(64, 48, 1));
  PsfrFrameOutcome sentinel;
  const auto c = compute_raw_cues(f, sentinel);
  EXPECT_EQ(c.corners, 0);
  EXPECT_EQ(c.central, 0);
  EXPECT_EQ(c.motion, 0);
  EXPECT_EQ(c.low_retention, 0);
  EXPECT_EQ(c.edge_density, canny_edge_density(f.gray, 50, 150));
  EXPECT_EQ(c.entropy, grayscale_entropy(f.gray));
}

TEST(FrameSignals, CentralWindowCounts) {
  const auto f = make_frame_gray(GrayImage(100, 80, 5));
  const auto center = compute_raw_cues(f, outcome_with({{50, 40}, {49.5, 40.5}, {51, 39}}));
  EXPECT_EQ(center.central, center.corners);
  EXPECT_EQ(center.corners, 3);
  const std::vector<Point2> corners{{0, 0}, {99, 0}, {0, 79}, {99, 79}};
  const auto edge = compute_raw_cues(f, outcome_with(corners));
  for (const auto& p : corners) EXPECT_FALSE(in_central_window(p, 100, 80, 0.5));
  EXPECT_EQ(edge.central, 0);
  EXPECT_EQ(edge.corners, 4);
}

TEST(FrameSignals, ConstantColumnIsHalf) {
  const std::vector<double> col(17, 3.25);
  for (double v : normalize_column(col)) EXPECT_EQ(v, 0.5);
}

TEST(FrameSignals, RampColumnMatchesPercentileOracle) {
  std::vector<double> col(100);
  for (int i = 0; i < 100; ++i) col[i] = i;
  const double p5 = oracle::percentile(col, 5), p95 = oracle::percentile(col, 95);
  EXPECT_NEAR(p5, 4.95, 1e-12);
  EXPECT_NEAR(p95, 94.05, 1e-12);
  const auto n = normalize_column(col);
  EXPECT_NEAR(n[50], (50 - p5) / (p95 - p5), 1e-12);
  EXPECT_NEAR(n[50], (50 - 4.95) / (94.05 - 4.95), 1e-12);
  EXPECT_EQ(n[0], 0.0);
  EXPECT_EQ(n[99], 1.0);
}

TEST(FrameSignals, PercentileAgreesWithOracle) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-5, 5);
  for (int n : {1, 2, 3, 7, 20, 101}) {
    std::vector<double> xs(n);
    for (auto& x : xs) x = u(rng);
    auto sorted = xs;
    std::sort(sorted.begin(), sorted.end());
    for (double p : {0.0, 5.0, 37.5, 95.0, 100.0}) EXPECT_NEAR(percentile_sorted(sorted, p), oracle::percentile(xs, p), 1e-12);
  }
}

TEST(FrameSignals, NormalizedValuesInUnitInterval) {
  std::mt19937_64 rng(5);
  std::lognormal_distribution<double> d(0, 2);
  std::vector<double> raw(60 * kRawDim);
  for (auto& v : raw) v = d(rng);
  for (double v : robust_normalize(raw, 60)) {
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 1.0);
  }
}

TEST(FrameSignals, NormalizationIsScaleRobust) {
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> u(0, 50);
  std::vector<double> col(73);
  for (auto& v : col) v = u(rng);
  auto scaled = col;
  for (auto& v : scaled) v *= 37.25;
  const auto a = normalize_column(col), b = normalize_column(scaled);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a[i], b[i], 1e-9);
}

TEST(FrameSignals, SpikeColumnFallsBackToMinMax) {
  std::vector<double> col(50, 0.0);
  col[20] = 17;
  const auto n = normalize_column(col);
  EXPECT_EQ(n[20], 1.0);
  EXPECT_EQ(n[0], 0.0);
}

TEST(FrameSignals, ExtractShapesAndCutPeak) {
  const auto v = testutil::video("two", {scene(Texture::Blocks, 20, 0.5, 0), scene(Texture::Checker, 20, 0, 0.5)});
  const auto track = extract_signals(testutil::render_source(v, 160, 120, 1), SignalConfig{}, "two");
  ASSERT_EQ(track.frames, 40);
  EXPECT_EQ(track.S.size(), 40u * kSignalDim);
  EXPECT_EQ(track.H.size(), 40u * kHistDim);
  EXPECT_EQ(track.raw.size(), 40u * kRawDim);
  // raw low-retention count peaks at the cut; the p95 clip saturates it
  int best = 0;
  for (int t = 1; t < 40; ++t)
    if (track.raw_row(t)[kRawLowRetention] > track.raw_row(best)[kRawLowRetention]) best = t;
  EXPECT_EQ(best, 20);
  EXPECT_EQ(track.s_row(20)[4], 1.0f);
}

TEST(FrameSignals, ExtractTwiceSameCacheBytes) {
  const auto v = testutil::video("same", {scene(Texture::Discs, 15, 0.7, 0.2)});
  const auto src = testutil::render_source(v, 160, 120, 2);
  EXPECT_EQ(encode_cache(extract_signals(src, SignalConfig{})), encode_cache(extract_signals(src, SignalConfig{})));
}

TEST(FrameSignals, CacheRoundTrip) {
  testutil::TempDir dir("cache_rt");
  SignalTrack t;
  t.frames = 3;
  std::mt19937 rng(1);
  std::uniform_real_distribution<float> u(-1, 1);
  t.S.resize(3 * kSignalDim);
  t.H.resize(3 * kHistDim);
  t.raw.resize(3 * kRawDim);
  for (auto* v : {&t.S, &t.H, &t.raw})
    for (auto& x : *v) x = u(rng);
  write_cache(t, dir.path() / "clip.psfc");
  const auto back = read_cache(dir.path() / "clip.psfc");
  EXPECT_TRUE(back.same_data(t));
  EXPECT_EQ(back.video_id, "clip");
}

TEST(FrameSignals, WrongMagicIsCorrupt) {
  testutil::TempDir dir("cache_magic");
  SignalTrack t;
  t.frames = 1;
  t.S.assign(kSignalDim, 0);
  t.H.assign(kHistDim, 0);
  t.raw.assign(kRawDim, 0);
  auto bytes = encode_cache(t);
  bytes[0] = 'X';
  std::ofstream(dir.path() / "bad.psfc", std::ios::binary).write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  try {
    read_cache(dir.path() / "bad.psfc");
    FAIL() << "expected CorruptCache";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::CorruptCache);
  }
}

TEST(FrameSignals, TruncatedCacheIsCorrupt) {
  SignalTrack t;
  t.frames = 2;
  t.S.assign(2 * kSignalDim, 0);
  t.H.assign(2 * kHistDim, 0);
  t.raw.assign(2 * kRawDim, 0);
  auto bytes = encode_cache(t);
  bytes.pop_back();
  EXPECT_THROW(decode_cache(bytes), Error);
}

TEST(FrameSignals, CacheSizeForThousandFrames) {
  SignalTrack t;
  t.frames = 1000;
  t.S.assign(1000 * kSignalDim, 0.5f);
  t.H.assign(1000 * kHistDim, 0.25f);
  t.raw.assign(1000 * kRawDim, 1.0f);
  testutil::TempDir dir("cache_size");
  write_cache(t, dir.path() / "k.psfc");
  EXPECT_EQ(std::filesystem::file_size(dir.path() / "k.psfc"), 24u + 4u * (1000 * 5 + 1000 * 432 + 1000 * 6));
}
