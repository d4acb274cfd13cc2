#pragma once

// Image measurements shared by both PSFR stages. Everything here is a pure
// function of its inputs.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <vector>

#include "psfr/error.hpp"
#include "psfr/image.hpp"
#include "psfr/media_io.hpp"

namespace psfr {

struct Corner {
  double x = 0.0;
  double y = 0.0;
  double response = 0.0;

  Point2 pos() const { return {x, y}; }
  bool operator==(const Corner&) const = default;
};

// ---------------------------------------------------------------------------
// Gradients and the min-eigenvalue response

struct Gradients {
  Image<float> gx;
  Image<float> gy;
};

// 3x3 Sobel in raw units (|g| <= 4 * max intensity), replicated border.
template <typename T>
Gradients sobel(const Image<T>& img) {
  const int w = img.width, h = img.height;
  Gradients g{Image<float>(w, h), Image<float>(w, h)};
  for (int y = 0; y < h; ++y) {
    const int ym = std::max(y - 1, 0), yp = std::min(y + 1, h - 1);
    const auto* rm = img.row(ym).data();
    const auto* r0 = img.row(y).data();
    const auto* rp = img.row(yp).data();
    float* ox = g.gx.row(y).data();
    float* oy = g.gy.row(y).data();
    for (int x = 0; x < w; ++x) {
      const int xm = std::max(x - 1, 0), xp = std::min(x + 1, w - 1);
      const float a = static_cast<float>(rm[xm]), b = static_cast<float>(rm[x]), c = static_cast<float>(rm[xp]);
      const float d = static_cast<float>(r0[xm]), f = static_cast<float>(r0[xp]);
      const float gg = static_cast<float>(rp[xm]), hh = static_cast<float>(rp[x]), i = static_cast<float>(rp[xp]);
      ox[x] = (c + 2.0f * f + i) - (a + 2.0f * d + gg);
      oy[x] = (gg + 2.0f * hh + i) - (a + 2.0f * b + c);
    }
  }
  return g;
}

// Smallest eigenvalue of the structure tensor: gradients are Sobel/8
// (intensity per pixel) and products are summed over a 3x3 window with
// replicated borders.
inline Image<double> min_eigen_response(const GrayImage& gray) {
  const int w = gray.width, h = gray.height;
  const std::size_t n = gray.size();
  // Raw Sobel products are integers below 2^21 and their 3x3 sums below
  // 2^24, so int32 keeps every sum exact.
  std::vector<std::int32_t> xx(n), xy(n), yy(n);
  for (int y = 0; y < h; ++y) {
    const auto* rm = gray.row(std::max(y - 1, 0)).data();
    const auto* r0 = gray.row(y).data();
    const auto* rp = gray.row(std::min(y + 1, h - 1)).data();
    const std::size_t base = static_cast<std::size_t>(y) * w;
    for (int x = 0; x < w; ++x) {
      const int xm = std::max(x - 1, 0), xp = std::min(x + 1, w - 1);
      const std::int32_t gx = (rm[xp] + 2 * r0[xp] + rp[xp]) - (rm[xm] + 2 * r0[xm] + rp[xm]);
      const std::int32_t gy = (rp[xm] + 2 * rp[x] + rp[xp]) - (rm[xm] + 2 * rm[x] + rm[xp]);
      xx[base + x] = gx * gx;
      xy[base + x] = gx * gy;
      yy[base + x] = gy * gy;
    }
  }
  // Separable box sum, horizontal then vertical.
  std::vector<std::int32_t> tmp(n);
  auto box = [&](std::vector<std::int32_t>& p) {
    for (int y = 0; y < h; ++y) {
      const std::int32_t* r = p.data() + static_cast<std::size_t>(y) * w;
      std::int32_t* o = tmp.data() + static_cast<std::size_t>(y) * w;
      o[0] = r[0] + r[0] + r[std::min(1, w - 1)];
      for (int x = 1; x + 1 < w; ++x) o[x] = r[x - 1] + r[x] + r[x + 1];
      if (w > 1) o[w - 1] = r[w - 2] + r[w - 1] + r[w - 1];
    }
    for (int y = 0; y < h; ++y) {
      const std::int32_t* rm = tmp.data() + static_cast<std::size_t>(std::max(y - 1, 0)) * w;
      const std::int32_t* r0 = tmp.data() + static_cast<std::size_t>(y) * w;
      const std::int32_t* rp = tmp.data() + static_cast<std::size_t>(std::min(y + 1, h - 1)) * w;
      std::int32_t* o = p.data() + static_cast<std::size_t>(y) * w;
      for (int x = 0; x < w; ++x) o[x] = rm[x] + r0[x] + rp[x];
    }
  };
  box(xx);
  box(xy);
  box(yy);
  Image<double> r(w, h);
  for (std::size_t i = 0; i < n; ++i) {
    const double a = xx[i] / 64.0, b = xy[i] / 64.0, c = yy[i] / 64.0;
    const double half_diff = 0.5 * (a - c);
    const double lam = 0.5 * (a + c) - std::sqrt(half_diff * half_diff + b * b);
    r.px[i] = lam > 0.0 ? lam : 0.0;
  }
  return r;
}

// ---------------------------------------------------------------------------
// Radius-limited point set for greedy suppression.

class PointSieve {
 public:
  PointSieve(int width, int height, double radius)
      : radius2_(radius * radius), cell_(std::max(radius, 1.0)),
        cols_(static_cast<int>(std::ceil(width / cell_)) + 1), rows_(static_cast<int>(std::ceil(height / cell_)) + 1),
        cells_(static_cast<std::size_t>(cols_) * rows_) {}

  // True when no accepted point lies strictly closer than the radius.
  bool admits(Point2 p) const {
    if (radius2_ <= 0.0) return true;
    const int cx = cell_x(p.x), cy = cell_y(p.y);
    for (int y = std::max(cy - 1, 0); y <= std::min(cy + 1, rows_ - 1); ++y)
      for (int x = std::max(cx - 1, 0); x <= std::min(cx + 1, cols_ - 1); ++x)
        for (const Point2& q : cells_[static_cast<std::size_t>(y) * cols_ + x])
          if (squared_distance(p, q) < radius2_) return false;
    return true;
  }

  void insert(Point2 p) { cells_[static_cast<std::size_t>(cell_y(p.y)) * cols_ + cell_x(p.x)].push_back(p); }

 private:
  int cell_x(double x) const { return std::clamp(static_cast<int>(std::floor(x / cell_)), 0, cols_ - 1); }
  int cell_y(double y) const { return std::clamp(static_cast<int>(std::floor(y / cell_)), 0, rows_ - 1); }

  double radius2_;
  double cell_;
  int cols_, rows_;
  std::vector<std::vector<Point2>> cells_;
};

// Local maxima (3x3, ties allowed) with response >= quality * max response,
// at least `border` pixels from the frame edge, sorted by descending
// response with row-major order breaking ties.
inline std::vector<Corner> corner_candidates(const Image<double>& response, double quality, int border = 1) {
  require(quality > 0.0 && quality <= 1.0, ErrorCode::InvalidArgument, "corner quality must lie in (0, 1]");
  const int w = response.width, h = response.height;
  const double peak = response.empty() ? 0.0 : *std::max_element(response.px.begin(), response.px.end());
  std::vector<Corner> out;
  if (peak <= 0.0) return out;
  const double thresh = quality * peak;
  border = std::max(border, 1);
  for (int y = border; y < h - border; ++y) {
    for (int x = border; x < w - border; ++x) {
      const double v = response.at(x, y);
      if (v < thresh || v <= 0.0) continue;
      bool is_max = true;
      for (int dy = -1; dy <= 1 && is_max; ++dy)
        for (int dx = -1; dx <= 1; ++dx)
          if (response.at(x + dx, y + dy) > v) {
            is_max = false;
            break;
          }
      if (is_max) out.push_back({static_cast<double>(x), static_cast<double>(y), v});
    }
  }
  std::stable_sort(out.begin(), out.end(), [](const Corner& a, const Corner& b) { return a.response > b.response; });
  return out;
}

inline std::vector<Corner> shi_tomasi_corners(const GrayImage& gray, int max_count, double quality = 0.01,
                                              double min_dist = 8.0) {
  require(gray.width >= kMinFrameSide && gray.height >= kMinFrameSide, ErrorCode::InvalidArgument,
          "corner detection needs at least a 16x16 plane");
  const auto candidates = corner_candidates(min_eigen_response(gray), quality);
  std::vector<Corner> out;
  PointSieve sieve(gray.width, gray.height, min_dist);
  for (const Corner& c : candidates) {
    if (static_cast<int>(out.size()) >= max_count) break;
    if (!sieve.admits(c.pos())) continue;
    sieve.insert(c.pos());
    out.push_back(c);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Gaussian pyramid with per-level gradients (Sobel/8).

struct PyramidLevel {
  Image<float> img;
  Image<float> gx;
  Image<float> gy;
};

struct ImagePyramid {
  std::vector<PyramidLevel> levels;

  int width() const { return levels.empty() ? 0 : levels.front().img.width; }
  int height() const { return levels.empty() ? 0 : levels.front().img.height; }
};

namespace detail {

inline PyramidLevel make_level(Image<float> img) {
  Gradients g = sobel(img);
  for (auto& v : g.gx.px) v *= 0.125f;
  for (auto& v : g.gy.px) v *= 0.125f;
  return {std::move(img), std::move(g.gx), std::move(g.gy)};
}

// [1 4 6 4 1]/16 prefilter then 2:1 decimation (floor).
inline Image<float> pyr_down(const Image<float>& src) {
  const int w = src.width, h = src.height;
  const int dw = w / 2, dh = h / 2;
  Image<float> tmp(dw, h);
  for (int y = 0; y < h; ++y) {
    const float* r = src.row(y).data();
    for (int x = 0; x < dw; ++x) {
      const int c = 2 * x;
      const auto at = [&](int i) { return r[std::clamp(i, 0, w - 1)]; };
      tmp.at(x, y) = (at(c - 2) + 4.0f * at(c - 1) + 6.0f * at(c) + 4.0f * at(c + 1) + at(c + 2)) * (1.0f / 16.0f);
    }
  }
  Image<float> out(dw, dh);
  for (int y = 0; y < dh; ++y) {
    const int c = 2 * y;
    const auto rowp = [&](int i) { return tmp.row(std::clamp(i, 0, h - 1)).data(); };
    const float *r0 = rowp(c - 2), *r1 = rowp(c - 1), *r2 = rowp(c), *r3 = rowp(c + 1), *r4 = rowp(c + 2);
    for (int x = 0; x < dw; ++x)
      out.at(x, y) = (r0[x] + 4.0f * r1[x] + 6.0f * r2[x] + 4.0f * r3[x] + r4[x]) * (1.0f / 16.0f);
  }
  return out;
}

}  // namespace detail

// Builds up to `max_levels` levels; stops early once a level would drop below 8x8.
inline ImagePyramid build_pyramid(const GrayImage& gray, int max_levels) {
  require(max_levels >= 1, ErrorCode::InvalidArgument, "pyramid needs at least one level");
  require(gray.width >= 8 && gray.height >= 8, ErrorCode::InvalidArgument, "pyramid base must be at least 8x8");
  ImagePyramid pyr;
  pyr.levels.push_back(detail::make_level(convert<float>(gray)));
  while (static_cast<int>(pyr.levels.size()) < max_levels) {
    const auto& top = pyr.levels.back().img;
    if (top.width / 2 < 8 || top.height / 2 < 8) break;
    pyr.levels.push_back(detail::make_level(detail::pyr_down(top)));
  }
  return pyr;
}

// ---------------------------------------------------------------------------
// Pyramidal Lucas-Kanade with forward-backward verification.

struct LkParams {
  int win = 21;
  int levels = 3;
  int max_iters = 30;
  double eps = 0.03;
  double fb_thresh = 1.0;
  // Minimum eigenvalue of the window's gradient matrix per pixel; below it a
  // window is treated as untrackable.
  double min_eig = 1e-2;
};

struct TrackResult {
  std::vector<Point2> points_out;
  std::vector<std::uint8_t> status;
  std::vector<double> fb_error;

  std::size_t accepted() const { return static_cast<std::size_t>(std::count(status.begin(), status.end(), 1)); }
};

namespace detail {

inline float sample(const Image<float>& im, double x, double y) {
  const int w = im.width, h = im.height;
  const double fx = std::floor(x), fy = std::floor(y);
  const int x0 = static_cast<int>(fx), y0 = static_cast<int>(fy);
  const float ax = static_cast<float>(x - fx), ay = static_cast<float>(y - fy);
  if (x0 >= 0 && y0 >= 0 && x0 + 1 < w && y0 + 1 < h) {
    const float* r0 = im.px.data() + static_cast<std::size_t>(y0) * w + x0;
    const float* r1 = r0 + w;
    return (r0[0] * (1 - ax) + r0[1] * ax) * (1 - ay) + (r1[0] * (1 - ax) + r1[1] * ax) * ay;
  }
  const float v00 = im.clamped(x0, y0), v01 = im.clamped(x0 + 1, y0);
  const float v10 = im.clamped(x0, y0 + 1), v11 = im.clamped(x0 + 1, y0 + 1);
  return (v00 * (1 - ax) + v01 * ax) * (1 - ay) + (v10 * (1 - ax) + v11 * ax) * ay;
}

// Samples the (2r+1)^2 window centred at (x, y). Every tap shares the same
// sub-pixel fraction, so the bilinear weights are computed once.
inline void sample_window(const Image<float>& im, double x, double y, int r, float* out) {
  const int w = im.width, h = im.height, side = 2 * r + 1;
  const double fx = std::floor(x), fy = std::floor(y);
  const int x0 = static_cast<int>(fx) - r, y0 = static_cast<int>(fy) - r;
  const float ax = static_cast<float>(x - fx), ay = static_cast<float>(y - fy);
  const float w00 = (1 - ax) * (1 - ay), w01 = ax * (1 - ay), w10 = (1 - ax) * ay, w11 = ax * ay;
  if (x0 >= 0 && y0 >= 0 && x0 + side < w && y0 + side < h) {
    for (int v = 0; v < side; ++v) {
      const float* r0 = im.px.data() + static_cast<std::size_t>(y0 + v) * w + x0;
      const float* r1 = r0 + w;
      float* o = out + static_cast<std::size_t>(v) * side;
      for (int u = 0; u < side; ++u) o[u] = w00 * r0[u] + w01 * r0[u + 1] + w10 * r1[u] + w11 * r1[u + 1];
    }
    return;
  }
  for (int v = 0; v < side; ++v)
    for (int u = 0; u < side; ++u)
      out[v * side + u] = w00 * im.clamped(x0 + u, y0 + v) + w01 * im.clamped(x0 + u + 1, y0 + v) +
                          w10 * im.clamped(x0 + u, y0 + v + 1) + w11 * im.clamped(x0 + u + 1, y0 + v + 1);
}

struct LkOutcome {
  Point2 pos;
  bool converged = false;
};

inline LkOutcome lk_single(const ImagePyramid& from, const ImagePyramid& to, Point2 p, const LkParams& prm,
                           int levels) {
  const int r = prm.win / 2;
  const int n = (2 * r + 1) * (2 * r + 1);
  std::vector<float> iw(n), gxw(n), gyw(n), jw(n);
  double gx_acc = 0.0, gy_acc = 0.0;  // pyramid guess carried between levels
  for (int lvl = levels - 1; lvl >= 0; --lvl) {
    const PyramidLevel& I = from.levels[lvl];
    const PyramidLevel& J = to.levels[lvl];
    const double scale = 1.0 / static_cast<double>(1 << lvl);
    const double px = p.x * scale, py = p.y * scale;

    sample_window(I.img, px, py, r, iw.data());
    sample_window(I.gx, px, py, r, gxw.data());
    sample_window(I.gy, px, py, r, gyw.data());
    double a = 0, b = 0, c = 0;
    for (int k = 0; k < n; ++k) {
      a += static_cast<double>(gxw[k]) * gxw[k];
      b += static_cast<double>(gxw[k]) * gyw[k];
      c += static_cast<double>(gyw[k]) * gyw[k];
    }
    const double det = a * c - b * b;
    const double min_eig = 0.5 * (a + c) - std::sqrt(0.25 * (a - c) * (a - c) + b * b);
    if (min_eig / n < prm.min_eig || det <= 0.0) return {{p.x, p.y}, false};

    double dx = 0, dy = 0, pdx = 0, pdy = 0;
    bool conv = false;
    for (int it = 0; it < prm.max_iters; ++it) {
      const double qx = px + gx_acc + dx, qy = py + gy_acc + dy;
      if (qx < -r || qy < -r || qx > J.img.width - 1 + r || qy > J.img.height - 1 + r) return {{qx / scale, qy / scale}, false};
      sample_window(J.img, qx, qy, r, jw.data());
      double bx = 0, by = 0;
      for (int k = 0; k < n; ++k) {
        const double diff = static_cast<double>(iw[k]) - jw[k];
        bx += diff * gxw[k];
        by += diff * gyw[k];
      }
      const double ddx = (c * bx - b * by) / det;
      const double ddy = (a * by - b * bx) / det;
      dx += ddx;
      dy += ddy;
      if (ddx * ddx + ddy * ddy < prm.eps * prm.eps) {
        conv = true;
        break;
      }
      // Two-cycle oscillation: settle at the midpoint.
      if (it > 0 && std::abs(ddx + pdx) < prm.eps && std::abs(ddy + pdy) < prm.eps) {
        dx -= 0.5 * ddx;
        dy -= 0.5 * ddy;
        conv = true;
        break;
      }
      pdx = ddx;
      pdy = ddy;
    }
    if (!conv) return {{(px + gx_acc + dx) / scale, (py + gy_acc + dy) / scale}, false};
    if (lvl > 0) {
      gx_acc = 2.0 * (gx_acc + dx);
      gy_acc = 2.0 * (gy_acc + dy);
    } else {
      return {{px + gx_acc + dx, py + gy_acc + dy}, true};
    }
  }
  return {p, false};
}

}  // namespace detail

// A track is accepted iff it converged at every level in both directions,
// lands at least win/2 pixels inside the frame, and the forward-backward
// error is within fb_thresh.
inline TrackResult lk_track(const ImagePyramid& prev, const ImagePyramid& next, std::span<const Point2> points,
                            const LkParams& prm = {}) {
  require(prev.width() == next.width() && prev.height() == next.height() && !prev.levels.empty(),
          ErrorCode::DimensionMismatch, "pyramids come from frames of different size");
  require(prm.win >= 3 && prm.levels >= 1 && prm.max_iters >= 1, ErrorCode::InvalidArgument, "bad LK parameters");
  const int levels = std::min({prm.levels, static_cast<int>(prev.levels.size()), static_cast<int>(next.levels.size())});
  const double margin = prm.win / 2;
  const double w = prev.width(), h = prev.height();
  const auto inside = [&](Point2 q) { return q.x >= margin && q.y >= margin && q.x <= w - 1 - margin && q.y <= h - 1 - margin; };

  TrackResult res;
  res.points_out.resize(points.size());
  res.status.assign(points.size(), 0);
  res.fb_error.assign(points.size(), std::numeric_limits<double>::infinity());
  for (std::size_t i = 0; i < points.size(); ++i) {
    const Point2 p = points[i];
    const auto fwd = detail::lk_single(prev, next, p, prm, levels);
    res.points_out[i] = fwd.pos;
    if (!fwd.converged) continue;
    const auto bwd = detail::lk_single(next, prev, fwd.pos, prm, levels);
    if (!bwd.converged) continue;
    const double fb = std::sqrt(squared_distance(bwd.pos, p));
    res.fb_error[i] = fb;
    res.status[i] = (fb <= prm.fb_thresh && inside(fwd.pos)) ? 1 : 0;
  }
  return res;
}

// ---------------------------------------------------------------------------
// Canny edge density

inline Image<float> gaussian_blur(const GrayImage& gray, double sigma) {
  const int radius = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<float> k(2 * radius + 1);
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) sum += (k[i + radius] = static_cast<float>(std::exp(-0.5 * i * i / (sigma * sigma))));
  for (auto& v : k) v = static_cast<float>(v / sum);
  const int w = gray.width, h = gray.height;
  Image<float> tmp(w, h), out(w, h);
  std::vector<float> padded(static_cast<std::size_t>(w) + 2 * radius);
  for (int y = 0; y < h; ++y) {
    const auto* r = gray.row(y).data();
    for (int x = -radius; x < w + radius; ++x) padded[x + radius] = r[std::clamp(x, 0, w - 1)];
    float* o = tmp.px.data() + static_cast<std::size_t>(y) * w;
    for (int x = 0; x < w; ++x) {
      float acc = 0.0f;
      for (int i = 0; i <= 2 * radius; ++i) acc += k[i] * padded[x + i];
      o[x] = acc;
    }
  }
  for (int y = 0; y < h; ++y) {
    float* o = out.px.data() + static_cast<std::size_t>(y) * w;
    std::fill(o, o + w, 0.0f);
    for (int i = -radius; i <= radius; ++i) {
      const float* src = tmp.px.data() + static_cast<std::size_t>(std::clamp(y + i, 0, h - 1)) * w;
      const float kv = k[i + radius];
      for (int x = 0; x < w; ++x) o[x] += kv * src[x];
    }
  }
  return out;
}

// Binary edge map: Gaussian (sigma 1.4), Sobel L2 magnitude, 4-sector
// non-maximum suppression, 8-connected hysteresis between lo and hi.
inline GrayImage canny_edges(const GrayImage& gray, double lo, double hi, double sigma = 1.4) {
  require(lo < hi, ErrorCode::InvalidArgument, "Canny thresholds need lo < hi");
  const int w = gray.width, h = gray.height;
  const Gradients g = sobel(gaussian_blur(gray, sigma));
  Image<float> mag(w, h);
  for (std::size_t i = 0; i < mag.size(); ++i) mag.px[i] = std::sqrt(g.gx.px[i] * g.gx.px[i] + g.gy.px[i] * g.gy.px[i]);
  const auto m = [&](int x, int y) -> float {
    return (x < 0 || y < 0 || x >= w || y >= h) ? 0.0f : mag.at(x, y);
  };

  constexpr float kTan22 = 0.41421356f, kTan67 = 2.41421356f;
  // 0 none, 1 weak, 2 strong
  GrayImage cls(w, h, 0);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const float v = mag.at(x, y);
      if (v < lo) continue;
      const float ax = std::abs(g.gx.at(x, y)), ay = std::abs(g.gy.at(x, y));
      float before, after;
      if (ay <= kTan22 * ax) {
        before = m(x - 1, y);
        after = m(x + 1, y);
      } else if (ay >= kTan67 * ax) {
        before = m(x, y - 1);
        after = m(x, y + 1);
      } else if ((g.gx.at(x, y) > 0) == (g.gy.at(x, y) > 0)) {
        before = m(x - 1, y - 1);
        after = m(x + 1, y + 1);
      } else {
        before = m(x + 1, y - 1);
        after = m(x - 1, y + 1);
      }
      if (v > before && v >= after) cls.at(x, y) = v >= hi ? 2 : 1;
    }

  GrayImage edges(w, h, 0);
  std::vector<int> stack;
  for (int i = 0; i < static_cast<int>(cls.size()); ++i)
    if (cls.px[i] == 2) {
      edges.px[i] = 1;
      stack.push_back(i);
    }
  while (!stack.empty()) {
    const int i = stack.back();
    stack.pop_back();
    const int x = i % w, y = i / w;
    for (int dy = -1; dy <= 1; ++dy)
      for (int dx = -1; dx <= 1; ++dx) {
        const int nx = x + dx, ny = y + dy;
        if (nx < 0 || ny < 0 || nx >= w || ny >= h) continue;
        const int j = ny * w + nx;
        if (cls.px[j] != 0 && !edges.px[j]) {
          edges.px[j] = 1;
          stack.push_back(j);
        }
      }
  }
  return edges;
}

inline double canny_edge_density(const GrayImage& gray, double lo = 50.0, double hi = 150.0) {
  const GrayImage e = canny_edges(gray, lo, hi);
  const auto count = std::count(e.px.begin(), e.px.end(), std::uint8_t{1});
  return static_cast<double>(count) / static_cast<double>(e.size());
}

// ---------------------------------------------------------------------------

// Shannon entropy of the 256-bin intensity histogram, in bits, divided by 8.
inline double grayscale_entropy(const GrayImage& gray) {
  require(!gray.empty(), ErrorCode::InvalidArgument, "entropy of an empty plane");
  std::array<std::uint64_t, 256> hist{};
  for (auto v : gray.px) ++hist[v];
  const double n = static_cast<double>(gray.size());
  double h = 0.0;
  for (auto c : hist)
    if (c) {
      const double p = static_cast<double>(c) / n;
      h -= p * std::log2(p);
    }
  return h / 8.0;
}

// ---------------------------------------------------------------------------
// 12 (hue) x 6 (saturation) x 6 (value) color histogram, L2-normalized.

inline constexpr int kHueBins = 12;
inline constexpr int kSatBins = 6;
inline constexpr int kValBins = 6;
inline constexpr int kHistDim = kHueBins * kSatBins * kValBins;

using Histogram432 = std::array<float, kHistDim>;

namespace detail {
constexpr int floor_div(int a, int b) { return a >= 0 ? a / b : -((-a + b - 1) / b); }
}  // namespace detail

// Integer-exact bin index; hue bins are 30 degrees wide.
constexpr int hsv_bin(std::uint8_t r, std::uint8_t g, std::uint8_t b) {
  const int mx = std::max({r, g, b}), mn = std::min({r, g, b});
  const int delta = mx - mn;
  int hue = 0;
  if (delta > 0) {
    if (mx == r) hue = detail::floor_div(2 * (g - b), delta);
    else if (mx == g) hue = 4 + detail::floor_div(2 * (b - r), delta);
    else hue = 8 + detail::floor_div(2 * (r - g), delta);
    hue = ((hue % kHueBins) + kHueBins) % kHueBins;
  }
  const int sat = mx == 0 ? 0 : std::min(kSatBins * delta / mx, kSatBins - 1);
  const int val = std::min(kValBins * mx / 255, kValBins - 1);
  return (hue * kSatBins + sat) * kValBins + val;
}

inline Histogram432 hsv_histogram(const FrameBuffer& frame) {
  std::array<std::uint32_t, kHistDim> counts{};
  if (frame.rgb) {
    const auto& rgb = *frame.rgb;
    for (std::size_t i = 0; i + 2 < rgb.size(); i += 3) ++counts[hsv_bin(rgb[i], rgb[i + 1], rgb[i + 2])];
  } else {
    for (auto v : frame.gray.px) ++counts[hsv_bin(v, v, v)];
  }
  double norm2 = 0.0;
  for (auto c : counts) norm2 += static_cast<double>(c) * c;
  require(norm2 > 0.0, ErrorCode::InvalidArgument, "histogram of an empty frame");
  const double norm = std::sqrt(norm2);
  Histogram432 h{};
  for (int i = 0; i < kHistDim; ++i) h[i] = static_cast<float>(counts[i] / norm);
  return h;
}

inline double cosine_similarity(std::span<const float> a, std::span<const float> b) {
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += static_cast<double>(a[i]) * b[i];
    na += static_cast<double>(a[i]) * a[i];
    nb += static_cast<double>(b[i]) * b[i];
  }
  if (na <= 0.0 || nb <= 0.0) return 0.0;
  return dot / std::sqrt(na * nb);
}

}  // namespace psfr
