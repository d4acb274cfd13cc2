#include <gtest/gtest.h>

#include <cmath>

#include "oracles/oracles.hpp"
#include "psfr/vision_kernels.hpp"

using namespace psfr;

namespace {

GrayImage checkerboard(int size, int cell) {
  GrayImage im(size, size);
  for (int y = 0; y < size; ++y)
    for (int x = 0; x < size; ++x) im.at(x, y) = ((x / cell + y / cell) % 2) ? 200 : 40;
  return im;
}

std::vector<Point2> corner_points(const GrayImage& im, int n = 200) {
  std::vector<Point2> pts;
  for (const auto& c : shi_tomasi_corners(im, n, 0.01, 8.0))
    if (c.x > 12 && c.y > 12 && c.x < im.width - 13 && c.y < im.height - 13) pts.push_back(c.pos());
  return pts;
}

}  // namespace

TEST(VisionKernels, ConstantImageHasNoCorners) {
  EXPECT_TRUE(shi_tomasi_corners(GrayImage(64, 64, 128), 100).empty());
}

TEST(VisionKernels, ResponseMatchesScalarOracle) {
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    const auto im = oracle::random_image(40, 33, seed);
    const auto r = min_eigen_response(im);
    for (int y = 0; y < im.height; ++y)
      for (int x = 0; x < im.width; ++x) ASSERT_NEAR(r.at(x, y), oracle::lambda_min_at(im, x, y), 1e-4);
  }
}

TEST(VisionKernels, CheckerboardCornersAtCellCrossings) {
  const auto im = checkerboard(64, 16);
  const auto corners = shi_tomasi_corners(im, 100, 0.01, 8.0);
  ASSERT_EQ(corners.size(), 9u);
  std::set<std::pair<int, int>> crossings;
  for (const auto& c : corners) {
    EXPECT_NEAR(c.response, oracle::lambda_min_at(im, static_cast<int>(c.x), static_cast<int>(c.y)), 1e-4);
    const int gx = static_cast<int>(std::lround(c.x / 16.0)) * 16, gy = static_cast<int>(std::lround(c.y / 16.0)) * 16;
    EXPECT_LE(std::abs(c.x - gx), 1.0);
    EXPECT_LE(std::abs(c.y - gy), 1.0);
    crossings.insert({gx, gy});
  }
  EXPECT_EQ(crossings.size(), 9u);
  for (const auto& [x, y] : crossings) {
    EXPECT_GE(x, 16);
    EXPECT_LE(x, 48);
    EXPECT_GE(y, 16);
    EXPECT_LE(y, 48);
  }
}

TEST(VisionKernels, CornerCapKeepsStrongest) {
  const auto im = oracle::textured_image(128, 128, 5);
  const auto all = shi_tomasi_corners(im, 1000);
  ASSERT_GE(all.size(), 20u);
  const auto five = shi_tomasi_corners(im, 5);
  ASSERT_EQ(five.size(), 5u);
  for (int i = 0; i < 5; ++i) EXPECT_EQ(five[i], all[i]);
  for (std::size_t i = 5; i < all.size(); ++i) EXPECT_LE(all[i].response, five[4].response);
}

TEST(VisionKernels, CornersRespectMinDistance) {
  const auto c = shi_tomasi_corners(oracle::textured_image(128, 128, 6), 1000, 0.01, 8.0);
  for (std::size_t i = 0; i < c.size(); ++i)
    for (std::size_t j = i + 1; j < c.size(); ++j) ASSERT_GE(squared_distance(c[i].pos(), c[j].pos()), 64.0);
}

TEST(VisionKernels, ResponseInvariantToBrightnessOffset) {
  auto im = oracle::random_image(48, 48, 9);
  for (auto& v : im.px) v = static_cast<std::uint8_t>(v % 200);
  auto shifted = im;
  for (auto& v : shifted.px) v = static_cast<std::uint8_t>(v + 50);
  EXPECT_EQ(min_eigen_response(im).px, min_eigen_response(shifted).px);
}

TEST(VisionKernels, LkIdenticalFrames) {
  const auto im = oracle::textured_image(128, 128, 21);
  const auto pyr = build_pyramid(im, 3);
  const auto pts = corner_points(im);
  ASSERT_GE(pts.size(), 10u);
  const auto res = lk_track(pyr, pyr, pts);
  EXPECT_EQ(res.accepted(), pts.size());
  for (std::size_t i = 0; i < pts.size(); ++i)
    EXPECT_LT(std::sqrt(squared_distance(res.points_out[i], pts[i])), 0.1);
}

TEST(VisionKernels, LkRecoversShiftRightByThree) {
  const auto canvas = oracle::textured_image(140, 140, 22);
  const auto prev = oracle::crop(canvas, 6, 6, 128, 128);
  const auto next = oracle::crop(canvas, 3, 6, 128, 128);  // content moves right by 3
  const auto pts = corner_points(prev);
  const auto res = lk_track(build_pyramid(prev, 3), build_pyramid(next, 3), pts);
  ASSERT_GE(res.accepted(), pts.size() / 2);
  for (std::size_t i = 0; i < pts.size(); ++i) {
    if (!res.status[i]) continue;
    EXPECT_NEAR(res.points_out[i].x - pts[i].x, 3.0, 0.5);
    EXPECT_NEAR(res.points_out[i].y - pts[i].y, 0.0, 0.5);
  }
}

TEST(VisionKernels, LkRejectsPointsInBorderMargin) {
  const auto im = oracle::textured_image(64, 64, 23);
  const auto pyr = build_pyramid(im, 3);
  const std::vector<Point2> pts{{1, 1}};
  EXPECT_EQ(lk_track(pyr, pyr, pts).status[0], 0);
}

TEST(VisionKernels, CannyConstantIsZero) { EXPECT_EQ(canny_edge_density(GrayImage(50, 40, 77)), 0.0); }

TEST(VisionKernels, CannyStepMatchesOracle) {
  const int W = 64, H = 40;
  GrayImage im(W, H, 0);
  for (int y = 0; y < H; ++y)
    for (int x = W / 2; x < W; ++x) im.at(x, y) = 255;
  const auto ref = oracle::canny(im, 50, 150);
  const double ref_density = static_cast<double>(std::count(ref.px.begin(), ref.px.end(), 1)) / (W * H);
  EXPECT_EQ(canny_edge_density(im, 50, 150), ref_density);
  // one edge column per row
  EXPECT_EQ(ref_density, static_cast<double>(H) / (W * H));
}

TEST(VisionKernels, CannyTextureAgreesWithOracle) {
  const auto im = oracle::textured_image(96, 80, 31);
  const auto a = canny_edges(im, 50, 150);
  const auto b = oracle::canny(im, 50, 150);
  int diff = 0;
  for (std::size_t i = 0; i < a.px.size(); ++i) diff += a.px[i] != b.px[i];
  // float and double can break exact magnitude ties differently
  EXPECT_LE(diff, static_cast<int>(a.px.size() / 200));
}

TEST(VisionKernels, CannyThresholdOrder) {
  EXPECT_THROW(canny_edge_density(GrayImage(20, 20, 1), 150, 150), Error);
  EXPECT_THROW(canny_edge_density(GrayImage(20, 20, 1), 200, 100), Error);
}

TEST(VisionKernels, EntropyExamples) {
  EXPECT_EQ(grayscale_entropy(GrayImage(16, 16, 9)), 0.0);
  GrayImage half(16, 16, 0);
  for (int i = 0; i < 128; ++i) half.px[i] = 255;
  EXPECT_EQ(grayscale_entropy(half), 0.125);
  GrayImage all(16, 16);
  for (int i = 0; i < 256; ++i) all.px[i] = static_cast<std::uint8_t>(i);
  EXPECT_EQ(grayscale_entropy(all), 1.0);
}

TEST(VisionKernels, HsvBinsMatchOracleOnEveryColor) {
  for (int r = 0; r < 256; ++r)
    for (int g = 0; g < 256; ++g)
      for (int b = 0; b < 256; ++b)
        if (hsv_bin(r, g, b) != oracle::hsv_bin(r, g, b)) FAIL() << r << "," << g << "," << b;
}

TEST(VisionKernels, SingleColorHistogram) {
  std::vector<std::uint8_t> rgb;
  for (int i = 0; i < 16 * 16; ++i) rgb.insert(rgb.end(), {30, 140, 200});
  const auto h = hsv_histogram(make_frame_rgb(16, 16, rgb));
  int nonzero = 0;
  for (int i = 0; i < kHistDim; ++i)
    if (h[i] != 0.0f) {
      ++nonzero;
      EXPECT_EQ(i, oracle::hsv_bin(30, 140, 200));
      EXPECT_EQ(h[i], 1.0f);
    }
  EXPECT_EQ(nonzero, 1);
}

TEST(VisionKernels, HistogramSelfSimilarity) {
  std::vector<std::uint8_t> rgb(20 * 20 * 3);
  std::mt19937 rng(4);
  for (auto& v : rgb) v = static_cast<std::uint8_t>(rng() & 0xFF);
  const auto h = hsv_histogram(make_frame_rgb(20, 20, rgb));
  EXPECT_NEAR(cosine_similarity(h, h), 1.0, 1e-6);
}

TEST(VisionKernels, RedGreenHistogram) {
  std::vector<std::uint8_t> rgb;
  for (int i = 0; i < 16 * 16; ++i) {
    if (i < 128) rgb.insert(rgb.end(), {255, 0, 0});
    else rgb.insert(rgb.end(), {0, 255, 0});
  }
  const auto h = hsv_histogram(make_frame_rgb(16, 16, rgb));
  const int red = oracle::hsv_bin(255, 0, 0), green = oracle::hsv_bin(0, 255, 0);
  ASSERT_NE(red, green);
  const float expect = static_cast<float>(1.0 / std::sqrt(2.0));
  for (int i = 0; i < kHistDim; ++i) EXPECT_EQ(h[i], (i == red || i == green) ? expect : 0.0f) << i;
}

TEST(VisionKernels, GrayFrameHistogramUsesGrayAsRgb) {
  const auto f = make_frame_gray(GrayImage(16, 16, 100));
  const auto h = hsv_histogram(f);
  EXPECT_EQ(h[oracle::hsv_bin(100, 100, 100)], 1.0f);
}
