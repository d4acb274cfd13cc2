#pragma once

// Patchwise sparse-flow retention, first stage: corners are seeded per patch,
// tracked frame to frame, and a frame is flagged as an event when enough
// patches have lost the tracks they held at the last reseed.

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "psfr/error.hpp"
#include "psfr/media_io.hpp"
#include "psfr/vision_kernels.hpp"

namespace psfr {

struct PatchRect {
  double x0 = 0, y0 = 0, x1 = 0, y1 = 0;

  bool contains(Point2 p) const { return p.x >= x0 && p.x < x1 && p.y >= y0 && p.y < y1; }
};

// Base patches tile the frame row-major; centroidal patches (if enabled)
// follow, one per interior grid crossing, each the size of a base patch.
class PatchGrid {
 public:
  PatchGrid() = default;
  PatchGrid(int width, int height, int base_rows, int base_cols, bool centroidal)
      : width_(width), height_(height), rows_(base_rows), cols_(base_cols), centroidal_(centroidal) {
    require(width >= kMinFrameSide && height >= kMinFrameSide, ErrorCode::InvalidArgument,
            "patch grid needs a frame of at least 16x16");
    require(base_rows >= 1 && base_cols >= 1 && base_rows <= height && base_cols <= width, ErrorCode::InvalidConfig,
            "bad patch grid dimensions");
    for (int c = 0; c <= cols_; ++c) xs_.push_back(static_cast<double>(c * width / cols_));
    for (int r = 0; r <= rows_; ++r) ys_.push_back(static_cast<double>(r * height / rows_));
    for (int r = 0; r < rows_; ++r)
      for (int c = 0; c < cols_; ++c) patches_.push_back({xs_[c], ys_[r], xs_[c + 1], ys_[r + 1]});
    if (centroidal_) {
      for (int r = 1; r < rows_; ++r)
        for (int c = 1; c < cols_; ++c)
          patches_.push_back({0.5 * (xs_[c - 1] + xs_[c]), 0.5 * (ys_[r - 1] + ys_[r]), 0.5 * (xs_[c] + xs_[c + 1]),
                              0.5 * (ys_[r] + ys_[r + 1])});
    }
  }

  int width() const { return width_; }
  int height() const { return height_; }
  int base_rows() const { return rows_; }
  int base_cols() const { return cols_; }
  bool centroidal() const { return centroidal_; }
  int size() const { return static_cast<int>(patches_.size()); }
  int base_count() const { return rows_ * cols_; }
  const std::vector<PatchRect>& patches() const { return patches_; }
  const PatchRect& operator[](int j) const { return patches_[j]; }

  // Index of the base patch holding p, or -1 outside the frame.
  int base_index(Point2 p) const {
    if (!(p.x >= 0 && p.y >= 0 && p.x < width_ && p.y < height_)) return -1;
    const int c = static_cast<int>(std::upper_bound(xs_.begin() + 1, xs_.end() - 1, p.x) - xs_.begin()) - 1;
    const int r = static_cast<int>(std::upper_bound(ys_.begin() + 1, ys_.end() - 1, p.y) - ys_.begin()) - 1;
    return r * cols_ + c;
  }

  // Adds one to every patch containing each point.
  std::vector<int> count_points(std::span<const Point2> points) const {
    std::vector<int> counts(patches_.size(), 0);
    for (const Point2& p : points)
      for (std::size_t j = 0; j < patches_.size(); ++j)
        if (patches_[j].contains(p)) ++counts[j];
    return counts;
  }

 private:
  int width_ = 0, height_ = 0, rows_ = 0, cols_ = 0;
  bool centroidal_ = false;
  std::vector<double> xs_, ys_;
  std::vector<PatchRect> patches_;
};

struct PsfrConfig {
  int base_rows = 4;
  int base_cols = 4;
  bool centroidal = true;
  int max_per_patch = 20;        // m
  int max_corners = 400;         // C
  double dedup_radius = 8.0;     // rho
  double retention_thresh = 0.5; // tau_r
  int k_min = 0;                 // 0 selects ceil(0.4 * N_g)
  double corner_quality = 0.01;
  LkParams lk{};

  int patch_count() const {
    return base_rows * base_cols + (centroidal ? (base_rows - 1) * (base_cols - 1) : 0);
  }
  int resolved_k_min() const {
    return k_min > 0 ? k_min : static_cast<int>(std::ceil(0.4 * patch_count() - 1e-9));
  }

  void validate() const {
    require(base_rows >= 1 && base_cols >= 1, ErrorCode::InvalidConfig, "grid must have at least one patch");
    require(max_per_patch >= 1, ErrorCode::InvalidConfig, "m must be >= 1");
    require(max_corners >= max_per_patch, ErrorCode::InvalidConfig, "C must be >= m");
    require(dedup_radius >= 0.0, ErrorCode::InvalidConfig, "rho must be non-negative");
    require(retention_thresh > 0.0 && retention_thresh < 1.0, ErrorCode::InvalidConfig, "tau_r must lie in (0, 1)");
    const int k = resolved_k_min();
    require(k >= 1 && k <= patch_count(), ErrorCode::InvalidConfig, "k_min must lie in [1, N_g]");
    require(corner_quality > 0.0 && corner_quality <= 1.0, ErrorCode::InvalidConfig, "corner quality in (0, 1]");
  }
};

struct TrackerState {
  int tau = 0;                    // frame index of the last reseed
  std::vector<Corner> corners;    // current point set
  std::vector<int> denominators;  // per-patch counts at tau

  int active_patches() const {
    return static_cast<int>(std::count_if(denominators.begin(), denominators.end(), [](int n) { return n > 0; }));
  }
};

struct PsfrFrameOutcome {
  int t = 0;
  std::vector<Point2> survivors;
  std::vector<int> counts;
  std::vector<std::optional<double>> ratios;  // nullopt where the denominator is zero
  int low_retention = 0;
  int active = 0;
  bool is_event = false;
  double motion_mag = 0.0;
};

struct RetentionStats {
  std::vector<int> counts;
  std::vector<std::optional<double>> ratios;
  int low_retention = 0;
  int active = 0;
};

// Survivors outside the frame are dropped before counting.
inline RetentionStats retention_ratios(std::span<const Point2> survivors, const PatchGrid& grid,
                                       std::span<const int> denominators, double tau_r) {
  require(static_cast<int>(denominators.size()) == grid.size(), ErrorCode::InvalidArgument,
          "one denominator per patch is required");
  std::vector<Point2> inside;
  inside.reserve(survivors.size());
  for (const Point2& p : survivors)
    if (p.x >= 0 && p.y >= 0 && p.x < grid.width() && p.y < grid.height()) inside.push_back(p);
  RetentionStats s;
  s.counts = grid.count_points(inside);
  s.ratios.resize(denominators.size());
  for (std::size_t j = 0; j < denominators.size(); ++j) {
    if (denominators[j] <= 0) continue;
    ++s.active;
    const double r = static_cast<double>(s.counts[j]) / denominators[j];
    s.ratios[j] = r;
    if (r < tau_r) ++s.low_retention;
  }
  return s;
}

// L >= min(k_min, active), with at least one active patch.
inline bool is_psfr_event(int low_retention, int active, int k_min) {
  return active >= 1 && low_retention >= std::min(k_min, active);
}

// Per-patch seeding against a precomputed response map. Existing points are
// kept first (best response first), then fresh detections fill each base
// patch up to m; the merged list is cut at C. No two points end up closer
// than rho.
inline std::vector<Corner> seed_corners(const Image<double>& response, const PatchGrid& grid,
                                        std::span<const Corner> existing, const PsfrConfig& cfg) {
  require(response.width == grid.width() && response.height == grid.height(), ErrorCode::DimensionMismatch,
          "frame does not match the patch grid");
  const int w = grid.width(), h = grid.height();

  std::vector<Corner> kept_existing;
  kept_existing.reserve(existing.size());
  for (Corner c : existing) {
    if (!(c.x >= 0 && c.y >= 0 && c.x < w && c.y < h)) continue;
    const int ix = std::clamp(static_cast<int>(std::lround(c.x)), 0, w - 1);
    const int iy = std::clamp(static_cast<int>(std::lround(c.y)), 0, h - 1);
    c.response = response.at(ix, iy);
    kept_existing.push_back(c);
  }
  std::stable_sort(kept_existing.begin(), kept_existing.end(),
                   [](const Corner& a, const Corner& b) { return a.response > b.response; });

  std::vector<int> per_patch(grid.base_count(), 0);
  PointSieve sieve(w, h, cfg.dedup_radius);
  std::vector<Corner> out;
  auto try_add = [&](const Corner& c) {
    const int b = grid.base_index(c.pos());
    if (b < 0 || per_patch[b] >= cfg.max_per_patch || !sieve.admits(c.pos())) return;
    ++per_patch[b];
    sieve.insert(c.pos());
    out.push_back(c);
  };
  for (const Corner& c : kept_existing) try_add(c);
  const int border = std::max(cfg.lk.win / 2, 1);
  for (const Corner& c : corner_candidates(response, cfg.corner_quality, border)) {
    if (static_cast<int>(out.size()) >= cfg.max_corners) break;
    try_add(c);
  }
  if (static_cast<int>(out.size()) > cfg.max_corners) out.resize(cfg.max_corners);
  return out;
}

inline std::vector<Corner> seed_corners(const FrameBuffer& frame, const PatchGrid& grid,
                                        std::span<const Corner> existing, const PsfrConfig& cfg) {
  return seed_corners(min_eigen_response(frame.gray), grid, existing, cfg);
}

inline std::vector<Point2> positions(std::span<const Corner> corners) {
  std::vector<Point2> out;
  out.reserve(corners.size());
  for (const auto& c : corners) out.push_back(c.pos());
  return out;
}

// Sequential tracker that keeps the previous frame's pyramid between steps.
class PsfrTracker {
 public:
  PsfrTracker(const PsfrConfig& cfg, int width, int height)
      : cfg_(cfg), grid_(width, height, cfg.base_rows, cfg.base_cols, cfg.centroidal) {
    cfg_.validate();
  }

  const PsfrConfig& config() const { return cfg_; }
  const PatchGrid& grid() const { return grid_; }
  const TrackerState& state() const { return state_; }
  bool started() const { return started_; }

  // Seeds on the first frame and returns the zeroed sentinel outcome.
  PsfrFrameOutcome start(const FrameBuffer& frame) {
    check_dims(frame);
    state_ = {};
    state_.tau = frame.index;
    state_.corners = seed_corners(frame, grid_, {}, cfg_);
    state_.denominators = grid_.count_points(positions(state_.corners));
    prev_ = build_pyramid(frame.gray, cfg_.lk.levels);
    started_ = true;
    PsfrFrameOutcome o;
    o.t = frame.index;
    o.counts.assign(grid_.size(), 0);
    o.ratios.assign(grid_.size(), std::nullopt);
    return o;
  }

  PsfrFrameOutcome advance(const FrameBuffer& next) {
    require(started_, ErrorCode::InvalidArgument, "tracker advanced before start()");
    check_dims(next);
    ImagePyramid next_pyr = build_pyramid(next.gray, cfg_.lk.levels);
    PsfrFrameOutcome o = step_with(state_, prev_, next, next_pyr, grid_, cfg_);
    prev_ = std::move(next_pyr);
    return o;
  }

  // One transition given both pyramids; updates `state` in place.
  static PsfrFrameOutcome step_with(TrackerState& state, const ImagePyramid& prev_pyr, const FrameBuffer& next,
                                    const ImagePyramid& next_pyr, const PatchGrid& grid, const PsfrConfig& cfg) {
    const auto start_pts = positions(state.corners);
    const TrackResult tr = lk_track(prev_pyr, next_pyr, start_pts, cfg.lk);

    PsfrFrameOutcome o;
    o.t = next.index;
    std::vector<Corner> tracked;
    double motion = 0.0;
    for (std::size_t i = 0; i < start_pts.size(); ++i) {
      if (!tr.status[i]) continue;
      const Point2 q = tr.points_out[i];
      if (!(q.x >= 0 && q.y >= 0 && q.x < grid.width() && q.y < grid.height())) continue;
      o.survivors.push_back(q);
      tracked.push_back({q.x, q.y, state.corners[i].response});
      motion += std::sqrt(squared_distance(q, start_pts[i]));
    }
    o.motion_mag = o.survivors.empty() ? 0.0 : motion / static_cast<double>(o.survivors.size());

    RetentionStats rs = retention_ratios(o.survivors, grid, state.denominators, cfg.retention_thresh);
    o.counts = std::move(rs.counts);
    o.ratios = std::move(rs.ratios);
    o.low_retention = rs.low_retention;
    o.active = rs.active;
    o.is_event = is_psfr_event(o.low_retention, o.active, cfg.resolved_k_min());

    const bool no_reference = o.active == 0;
    state.corners = seed_corners(min_eigen_response(next.gray), grid, tracked, cfg);
    // An empty reference (e.g. after a blank frame) is re-established as soon
    // as corners reappear; otherwise no patch could ever become active again.
    if (o.is_event || no_reference) {
      state.tau = next.index;
      state.denominators = grid.count_points(positions(state.corners));
    }
    return o;
  }

 private:
  void check_dims(const FrameBuffer& f) const {
    require(f.width() == grid_.width() && f.height() == grid_.height(), ErrorCode::DimensionMismatch,
            "frame " + std::to_string(f.index) + " does not match the tracker's frame size");
  }

  PsfrConfig cfg_;
  PatchGrid grid_;
  TrackerState state_;
  ImagePyramid prev_;
  bool started_ = false;
};

// Stateless single transition; rebuilds both pyramids.
inline std::pair<TrackerState, PsfrFrameOutcome> step(TrackerState state, const FrameBuffer& prev,
                                                      const FrameBuffer& next, const PsfrConfig& cfg) {
  cfg.validate();
  require(prev.width() == next.width() && prev.height() == next.height(), ErrorCode::DimensionMismatch,
          "consecutive frames differ in size");
  const PatchGrid grid(prev.width(), prev.height(), cfg.base_rows, cfg.base_cols, cfg.centroidal);
  if (state.denominators.empty()) state.denominators.assign(grid.size(), 0);
  require(static_cast<int>(state.denominators.size()) == grid.size(), ErrorCode::InvalidArgument,
          "state denominators do not match the grid");
  const auto prev_pyr = build_pyramid(prev.gray, cfg.lk.levels);
  const auto next_pyr = build_pyramid(next.gray, cfg.lk.levels);
  auto outcome = PsfrTracker::step_with(state, prev_pyr, next, next_pyr, grid, cfg);
  return {std::move(state), std::move(outcome)};
}

// Initial state for `frame` as produced by the first step of a run.
inline TrackerState initial_state(const FrameBuffer& frame, const PsfrConfig& cfg) {
  PsfrTracker tr(cfg, frame.width(), frame.height());
  tr.start(frame);
  return tr.state();
}

using FrameVisitor = std::function<void(const FrameBuffer&, const PsfrFrameOutcome&, const TrackerState&)>;

// Drives the tracker over every frame; outcome 0 is the seeding sentinel.
inline std::vector<PsfrFrameOutcome> run_video(const VideoSource& src, const PsfrConfig& cfg,
                                               const FrameVisitor& visit = {}) {
  require(src.count() >= 1, ErrorCode::NoFrames, "video has no frames");
  std::vector<PsfrFrameOutcome> out;
  out.reserve(src.count());
  FrameBuffer first = src.load(0);
  PsfrTracker tracker(cfg, first.width(), first.height());
  out.push_back(tracker.start(first));
  if (visit) visit(first, out.back(), tracker.state());
  for (int t = 1; t < src.count(); ++t) {
    FrameBuffer f = src.load(t);
    out.push_back(tracker.advance(f));
    if (visit) visit(f, out.back(), tracker.state());
  }
  return out;
}

}  // namespace psfr
