#include <gtest/gtest.h>

#include "oracles/oracles.hpp"
#include "psfr/psfr_tracker.hpp"
#include "test_util.hpp"

using namespace psfr;
using testutil::scene;

namespace {

FrameBuffer textured_frame(int w, int h, std::uint64_t seed, int index = 0) {
  return make_frame_gray(oracle::textured_image(w, h, seed, 400), index);
}

std::vector<int> event_frames(const std::vector<PsfrFrameOutcome>& out) {
  std::vector<int> ev;
  for (const auto& o : out)
    if (o.is_event) ev.push_back(o.t);
  return ev;
}

}  // namespace

TEST(PatchGrid, DefaultHasTwentyFivePatches) {
  PsfrConfig cfg;
  EXPECT_EQ(cfg.patch_count(), 25);
  EXPECT_EQ(cfg.resolved_k_min(), 10);
  const PatchGrid g(320, 240, 4, 4, true);
  EXPECT_EQ(g.size(), 25);
  // centroidal patch 16 spans the centres of base patches 0, 1, 4, 5
  EXPECT_EQ(g[16].x0, 40);
  EXPECT_EQ(g[16].x1, 120);
  EXPECT_EQ(g[16].y0, 30);
  EXPECT_EQ(g[16].y1, 90);
}

TEST(PsfrTracker, SeedRespectsCapsAndSpacing) {
  const auto f = textured_frame(320, 240, 1);
  PsfrConfig cfg;
  const PatchGrid grid(320, 240, 4, 4, true);
  const auto pts = seed_corners(f, grid, {}, cfg);
  ASSERT_FALSE(pts.empty());
  EXPECT_LE(pts.size(), 400u);
  std::vector<int> per(grid.base_count(), 0);
  for (const auto& c : pts) ++per[grid.base_index(c.pos())];
  for (int n : per) EXPECT_LE(n, 20);
  for (std::size_t i = 0; i < pts.size(); ++i)
    for (std::size_t j = i + 1; j < pts.size(); ++j) ASSERT_GE(squared_distance(pts[i].pos(), pts[j].pos()), 64.0);
}

TEST(PsfrTracker, SeedGlobalCap) {
  const auto f = textured_frame(320, 240, 2);
  PsfrConfig cfg;
  cfg.max_corners = 30;
  const auto pts = seed_corners(f, PatchGrid(320, 240, 4, 4, true), {}, cfg);
  EXPECT_EQ(pts.size(), 30u);
}

TEST(PsfrTracker, SeedIsIdempotent) {
  const auto f = textured_frame(320, 240, 3);
  PsfrConfig cfg;
  const PatchGrid grid(320, 240, 4, 4, true);
  const auto once = seed_corners(f, grid, {}, cfg);
  const auto twice = seed_corners(f, grid, once, cfg);
  auto key = [](std::vector<Corner> v) {
    std::vector<std::pair<double, double>> k;
    for (const auto& c : v) k.push_back({c.x, c.y});
    std::sort(k.begin(), k.end());
    return k;
  };
  EXPECT_EQ(key(once), key(twice));
}

TEST(PsfrTracker, SeedKeepsStrongerOfTwoNearbyPeaks) {
  Image<double> resp(64, 64, 0.0);
  resp.at(30, 30) = 3.0;
  resp.at(32, 30) = 5.0;
  PsfrConfig cfg;
  const auto pts = seed_corners(resp, PatchGrid(64, 64, 4, 4, true), {}, cfg);
  ASSERT_EQ(pts.size(), 1u);
  EXPECT_EQ(pts[0].x, 32);
  EXPECT_EQ(pts[0].y, 30);
}

TEST(PsfrTracker, RetentionRatio) {
  const PatchGrid grid(64, 32, 1, 2, false);
  std::vector<Point2> surv;
  for (int i = 0; i < 7; ++i) surv.push_back({2.0 + 3 * i, 10.0});
  const std::vector<int> den{10, 0};
  const auto s = retention_ratios(surv, grid, den, 0.5);
  ASSERT_TRUE(s.ratios[0].has_value());
  EXPECT_DOUBLE_EQ(*s.ratios[0], 0.7);
  EXPECT_FALSE(s.ratios[1].has_value());
  EXPECT_EQ(s.active, 1);
  EXPECT_EQ(s.low_retention, 0);
}

TEST(PsfrTracker, TotalLossCountsEveryActivePatch) {
  const PatchGrid grid(320, 240, 4, 4, true);
  std::vector<int> den(25, 0);
  for (int j = 0; j < 16; ++j) den[j] = 5;
  const auto s = retention_ratios({}, grid, den, 0.5);
  EXPECT_EQ(s.low_retention, 16);
  EXPECT_EQ(s.active, 16);
  EXPECT_TRUE(is_psfr_event(s.low_retention, s.active, 10));
}

TEST(PsfrTracker, DriftCountsInDestinationPatch) {
  const PatchGrid grid(64, 32, 1, 2, false);
  const std::vector<Point2> seeded{{30.0, 10.0}};
  const auto den = grid.count_points(seeded);
  ASSERT_EQ(den, (std::vector<int>{1, 0}));
  const std::vector<Point2> moved{{33.5, 10.0}};
  const auto s = retention_ratios(moved, grid, den, 0.5);
  // oracle: point-in-rectangle
  for (int j = 0; j < grid.size(); ++j) EXPECT_EQ(s.counts[j], grid[j].contains(moved[0]) ? 1 : 0);
  EXPECT_EQ(s.counts, (std::vector<int>{0, 1}));
  EXPECT_EQ(s.low_retention, 1);
}

TEST(PsfrTracker, EventNeedsActivePatches) {
  EXPECT_FALSE(is_psfr_event(0, 0, 10));
  EXPECT_TRUE(is_psfr_event(3, 3, 10));  // fewer active patches than k_min
  EXPECT_FALSE(is_psfr_event(9, 25, 10));
  EXPECT_TRUE(is_psfr_event(10, 25, 10));
}

TEST(PsfrTracker, StaticSceneStep) {
  PsfrConfig cfg;
  const auto f0 = textured_frame(320, 240, 4, 0);
  auto f1 = f0;
  f1.index = 1;
  const auto st0 = initial_state(f0, cfg);
  const auto [st1, o] = step(st0, f0, f1, cfg);
  EXPECT_FALSE(o.is_event);
  EXPECT_EQ(st1.denominators, st0.denominators);
  EXPECT_EQ(st1.tau, 0);
  EXPECT_GE(o.survivors.size(), st0.corners.size() * 9 / 10);
  EXPECT_LT(o.motion_mag, 0.1);
}

TEST(PsfrTracker, CutToBlack) {
  PsfrConfig cfg;
  const auto f0 = textured_frame(320, 240, 5, 0);
  const auto black = make_frame_gray(GrayImage(320, 240, 0), 1);
  const auto st0 = initial_state(f0, cfg);
  const auto [st1, o] = step(st0, f0, black, cfg);
  EXPECT_EQ(o.low_retention, st0.active_patches());
  EXPECT_TRUE(o.is_event);
  EXPECT_EQ(st1.tau, 1);
  EXPECT_TRUE(st1.corners.empty());
  EXPECT_EQ(st1.active_patches(), 0);
}

TEST(PsfrTracker, SingleCutSingleEvent) {
  const auto v = testutil::video("cut1", {scene(Texture::Blocks, 50, 0.6, 0.2), scene(Texture::Discs, 50, -0.4, 0.3)});
  const auto out = run_video(testutil::render_source(v, 320, 240, 1), PsfrConfig{});
  EXPECT_EQ(event_frames(out), (std::vector<int>{50}));
}

TEST(PsfrTracker, TwoFrameStaticVideo) {
  const auto v = testutil::video("still", {scene(Texture::Checker, 2)});
  const auto out = run_video(testutil::render_source(v, 160, 120, 2), PsfrConfig{});
  ASSERT_EQ(out.size(), 2u);
  EXPECT_FALSE(out[1].is_event);
}

TEST(PsfrTracker, OneOutcomePerFrameAndEventsAtCuts) {
  const auto v = testutil::video("three", {scene(Texture::Checker, 30, 0.5, 0), scene(Texture::Blocks, 25, 0, 0.5),
                                           scene(Texture::Discs, 30, -0.5, -0.5)});
  const auto src = testutil::render_source(v, 320, 240, 3);
  const auto out = run_video(src, PsfrConfig{});
  ASSERT_EQ(static_cast<int>(out.size()), v.frames());
  for (int t = 0; t < v.frames(); ++t) EXPECT_EQ(out[t].t, t);
  EXPECT_FALSE(out[0].is_event);
  EXPECT_TRUE(out[0].survivors.empty());
  EXPECT_EQ(event_frames(out), v.cuts());
}

TEST(PsfrTracker, RunIsDeterministic) {
  const auto v = testutil::video("det", {scene(Texture::Blocks, 12, 1.0, 0.5), scene(Texture::Discs, 12, 0.3, 0)});
  const auto src = testutil::render_source(v, 200, 150, 4);
  const auto a = run_video(src, PsfrConfig{});
  const auto b = run_video(src, PsfrConfig{});
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t t = 0; t < a.size(); ++t) {
    ASSERT_EQ(a[t].survivors.size(), b[t].survivors.size());
    for (std::size_t i = 0; i < a[t].survivors.size(); ++i) {
      EXPECT_EQ(a[t].survivors[i].x, b[t].survivors[i].x);
      EXPECT_EQ(a[t].survivors[i].y, b[t].survivors[i].y);
    }
    EXPECT_EQ(a[t].counts, b[t].counts);
    EXPECT_EQ(a[t].is_event, b[t].is_event);
    EXPECT_EQ(a[t].motion_mag, b[t].motion_mag);
  }
}

TEST(PsfrTracker, RejectsBadConfig) {
  PsfrConfig cfg;
  cfg.retention_thresh = 1.0;
  EXPECT_THROW(cfg.validate(), Error);
  cfg = {};
  cfg.k_min = 26;
  EXPECT_THROW(cfg.validate(), Error);
  cfg = {};
  cfg.max_corners = 5;
  EXPECT_THROW(cfg.validate(), Error);
}

TEST(PsfrTracker, FrameSizeChangeIsRejected) {
  PsfrTracker tr(PsfrConfig{}, 160, 120);
  tr.start(textured_frame(160, 120, 1));
  EXPECT_THROW(tr.advance(textured_frame(100, 120, 1)), Error);
}
