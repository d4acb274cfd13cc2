#pragma once

// Budgeted keyframe selection over cached signals. The selector maps
// (S, H, A, K) to at most K strictly increasing indices drawn from A.

#include <algorithm>
#include <array>
#include <cmath>
#include <ctime>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "psfr/error.hpp"
#include "psfr/frame_signals.hpp"
#include "psfr/vision_kernels.hpp"

namespace psfr {

struct SelectionRequest {
  int frames = 0;
  std::span<const float> S;    // frames x 5
  std::span<const float> H;    // frames x 432
  std::span<const float> raw;  // frames x 6, may be empty
  std::vector<int> candidates; // sorted, unique, within [0, frames)
  int K = 16;

  std::span<const float> s_row(int t) const { return S.subspan(static_cast<std::size_t>(t) * kSignalDim, kSignalDim); }
  std::span<const float> h_row(int t) const { return H.subspan(static_cast<std::size_t>(t) * kHistDim, kHistDim); }

  void validate() const {
    require(K >= 1, ErrorCode::InvalidArgument, "budget K must be >= 1");
    require(S.size() == static_cast<std::size_t>(frames) * kSignalDim &&
                H.size() == static_cast<std::size_t>(frames) * kHistDim,
            ErrorCode::InvalidArgument, "signal arrays disagree with the frame count");
    require(raw.empty() || raw.size() == static_cast<std::size_t>(frames) * kRawDim, ErrorCode::InvalidArgument,
            "raw block disagrees with the frame count");
    require(!candidates.empty(), ErrorCode::EmptyCandidates, "candidate set is empty");
    for (std::size_t i = 0; i < candidates.size(); ++i) {
      require(candidates[i] >= 0 && candidates[i] < frames, ErrorCode::InvalidArgument,
              "candidate index outside the video");
      require(i == 0 || candidates[i] > candidates[i - 1], ErrorCode::InvalidArgument,
              "candidates must be strictly increasing");
    }
  }
};

inline SelectionRequest make_request(const SignalTrack& track, std::vector<int> candidates, int K) {
  std::sort(candidates.begin(), candidates.end());
  candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());
  return {track.frames, track.S, track.H, track.raw, std::move(candidates), K};
}

inline std::vector<int> all_frames(int frames) {
  std::vector<int> a(frames);
  for (int t = 0; t < frames; ++t) a[t] = t;
  return a;
}

enum class SlotMode { CumulativeChange = 0, UniformTime = 1 };

struct SelectorParams {
  std::array<double, kSignalDim> w{0.25, 0.15, 0.2, 0.2, 0.2};
  double w_motion = 0.0;
  double w_change = 0.5;
  double lambda_div = 0.3;
  int nms_gap = 3;
  SlotMode slot_mode = SlotMode::CumulativeChange;
  bool peak_align = true;
  bool use_motion = false;

  // Zero weights, uniform-time slots: every slot takes its first candidate,
  // which reproduces uniform_select.
  static SelectorParams uniform_equivalent() {
    SelectorParams p;
    p.w = {0, 0, 0, 0, 0};
    p.w_motion = 0;
    p.w_change = 0;
    p.lambda_div = 0;
    p.nms_gap = 0;
    p.slot_mode = SlotMode::UniformTime;
    p.peak_align = false;
    p.use_motion = false;
    return p;
  }

  void validate() const {
    require(nms_gap >= 0, ErrorCode::InvalidConfig, "nms_gap must be >= 0");
    require(lambda_div >= 0 && std::isfinite(lambda_div), ErrorCode::InvalidConfig, "lambda must be finite and >= 0");
    for (double v : w) require(std::isfinite(v), ErrorCode::InvalidConfig, "quality weights must be finite");
    require(std::isfinite(w_change) && std::isfinite(w_motion), ErrorCode::InvalidConfig, "weights must be finite");
  }

  bool operator==(const SelectorParams&) const = default;
};

struct SelectionResult {
  std::vector<int> indices;
  double elapsed = 0.0;  // seconds
};

namespace detail {

// CPU time of the calling thread, so concurrent requests do not inflate each
// other's measurements.
inline double thread_cpu_seconds() {
  timespec ts{};
  clock_gettime(CLOCK_THREAD_CPUTIME_ID, &ts);
  return static_cast<double>(ts.tv_sec) + 1e-9 * static_cast<double>(ts.tv_nsec);
}

class Stopwatch {
 public:
  Stopwatch() : start_(thread_cpu_seconds()) {}
  double seconds() const { return thread_cpu_seconds() - start_; }

 private:
  double start_;
};

}  // namespace detail

// Ranks round(i (n-1) / (K-1)), i = 0..K-1, halves rounded up; requires n > K.
inline std::vector<int> uniform_ranks(int n, int K) {
  std::vector<int> r;
  if (K == 1) return {0};
  r.reserve(K);
  for (long long i = 0; i < K; ++i) {
    const long long num = 2 * i * (n - 1) + (K - 1);
    const int rank = static_cast<int>(num / (2LL * (K - 1)));
    if (r.empty() || r.back() != rank) r.push_back(rank);
  }
  return r;
}

inline SelectionResult uniform_select(const SelectionRequest& req) {
  detail::Stopwatch sw;
  req.validate();
  SelectionResult res;
  const int n = static_cast<int>(req.candidates.size());
  if (n <= req.K) {
    res.indices = req.candidates;
  } else {
    for (int r : uniform_ranks(n, req.K)) res.indices.push_back(req.candidates[r]);
  }
  res.elapsed = sw.seconds();
  return res;
}

inline double quality_score(std::span<const float> s_row, const SelectorParams& p, double motion_norm = 0.0) {
  require(s_row.size() == kSignalDim, ErrorCode::InvalidArgument, "signal row must have 5 entries");
  double q = 0.0;
  for (int k = 0; k < kSignalDim; ++k) q += p.w[k] * s_row[k];
  if (p.use_motion) q += p.w_motion * motion_norm;
  return q;
}

// d_0 = 0, d_t = 1 - cos(h_{t-1}, h_t).
inline std::vector<double> change_signal(std::span<const float> H, int frames) {
  require(frames >= 1 && H.size() == static_cast<std::size_t>(frames) * kHistDim, ErrorCode::InvalidArgument,
          "histogram array must be T x 432 with T >= 1");
  std::vector<double> d(frames, 0.0);
  for (int t = 1; t < frames; ++t) {
    const double c = cosine_similarity(H.subspan(static_cast<std::size_t>(t - 1) * kHistDim, kHistDim),
                                       H.subspan(static_cast<std::size_t>(t) * kHistDim, kHistDim));
    d[t] = std::clamp(1.0 - c, 0.0, 2.0);
  }
  return d;
}

inline std::vector<double> cumulative(std::span<const double> d) {
  std::vector<double> out(d.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < d.size(); ++i) out[i] = (acc += d[i]);
  return out;
}

namespace detail {

// Slot start ranks (size K+1, last = n) for n > K candidates. Every slot is
// left with at least one candidate.
inline std::vector<int> slot_starts(std::span<const double> dA, int K, const SelectorParams& p) {
  const int n = static_cast<int>(dA.size());
  std::vector<int> start(K + 1, 0);
  start[K] = n;
  const auto total = [&] {
    double s = 0.0;
    for (double v : dA) s += v;
    return s;
  }();
  if (p.slot_mode == SlotMode::UniformTime || !(total > 0.0)) {
    const auto r = uniform_ranks(n, K);
    for (int k = 0; k < K; ++k) start[k] = r[k];
  } else {
    const auto D = cumulative(dA);
    int i = 0;
    for (int k = 1; k < K; ++k) {
      while (i < n && D[i] * K < k * total) ++i;
      start[k] = i;
    }
  }
  if (p.peak_align && p.nms_gap > 0) {
    const auto local_max = [&](int j) {
      return dA[j] > 0.0 && dA[j] >= dA[j - 1] && (j + 1 >= n || dA[j] >= dA[j + 1]);
    };
    for (int k = 1; k < K; ++k) {
      int best = -1;
      for (int off = 0; off <= p.nms_gap && best < 0; ++off) {
        for (int j : {start[k] - off, start[k] + off}) {
          if (j >= 1 && j < n && local_max(j)) {
            best = j;
            break;
          }
        }
      }
      if (best >= 0) start[k] = best;
    }
  }
  for (int k = 1; k < K; ++k) start[k] = std::max(start[k], start[k - 1] + 1);
  for (int k = K - 1; k >= 1; --k) start[k] = std::min(start[k], start[k + 1] - 1);
  return start;
}

}  // namespace detail

// Slots over A (equal quantiles of cumulative histogram change, or uniform
// ranks), optional snapping of slot boundaries to change peaks, then per slot
// the argmax of quality + w_change * d - lambda * (max cosine to earlier
// picks), skipping frames within nms_gap of an earlier pick. Ties go to the
// smaller index.
inline SelectionResult psfr_select(const SelectionRequest& req, const SelectorParams& p) {
  detail::Stopwatch sw;
  req.validate();
  p.validate();
  SelectionResult res;
  const auto& A = req.candidates;
  const int n = static_cast<int>(A.size());
  if (n <= req.K) {
    res.indices = A;
    res.elapsed = sw.seconds();
    return res;
  }

  std::vector<double> dA(n, 0.0), normA(n, 0.0);
  for (int i = 0; i < n; ++i) {
    const auto h = req.h_row(A[i]);
    double s = 0.0;
    for (float v : h) s += static_cast<double>(v) * v;
    normA[i] = std::sqrt(s);
  }
  const auto dot = [&](int a, int b) {
    const auto ha = req.h_row(a), hb = req.h_row(b);
    double s = 0.0;
    for (int k = 0; k < kHistDim; ++k) s += static_cast<double>(ha[k]) * hb[k];
    return s;
  };
  for (int i = 1; i < n; ++i) {
    const double den = normA[i - 1] * normA[i];
    const double c = den > 0.0 ? dot(A[i - 1], A[i]) / den : 0.0;
    dA[i] = std::clamp(1.0 - c, 0.0, 2.0);
  }

  std::vector<double> motion;
  if (p.use_motion && !req.raw.empty()) {
    std::vector<double> col(req.frames);
    for (int t = 0; t < req.frames; ++t) col[t] = req.raw[static_cast<std::size_t>(t) * kRawDim + kRawMotion];
    motion = normalize_column(col);
  }

  const auto start = detail::slot_starts(dA, req.K, p);
  std::vector<int> picked_rank;
  for (int k = 0; k < req.K; ++k) {
    int best = -1;
    double best_score = 0.0;
    for (int i = start[k]; i < start[k + 1]; ++i) {
      const int t = A[i];
      bool suppressed = false;
      if (p.nms_gap > 0)
        for (int j : picked_rank)
          if (std::abs(t - A[j]) <= p.nms_gap) {
            suppressed = true;
            break;
          }
      if (suppressed) continue;
      double score = quality_score(req.s_row(t), p, motion.empty() ? 0.0 : motion[t]) + p.w_change * dA[i];
      if (p.lambda_div > 0.0 && !picked_rank.empty()) {
        double worst = -1.0;
        for (int j : picked_rank) {
          const double den = normA[i] * normA[j];
          worst = std::max(worst, den > 0.0 ? dot(t, A[j]) / den : 0.0);
        }
        score -= p.lambda_div * worst;
      }
      if (best < 0 || score > best_score) {
        best = i;
        best_score = score;
      }
    }
    if (best >= 0) picked_rank.push_back(best);
  }
  for (int i : picked_rank) res.indices.push_back(A[i]);
  std::sort(res.indices.begin(), res.indices.end());
  res.elapsed = sw.seconds();
  return res;
}

enum class SelectorKind { Uniform, Psfr };

inline SelectionResult run_selector(SelectorKind kind, const SelectionRequest& req, const SelectorParams& p) {
  return kind == SelectorKind::Uniform ? uniform_select(req) : psfr_select(req, p);
}

// ---------------------------------------------------------------------------

enum class Violation { None, OutOfCandidates, Duplicate, BudgetExceeded, TimeBudgetExceeded };

inline std::string_view to_string(Violation v) {
  switch (v) {
    case Violation::None: return "ok";
    case Violation::OutOfCandidates: return "OutOfCandidates";
    case Violation::Duplicate: return "Duplicate";
    case Violation::BudgetExceeded: return "BudgetExceeded";
    case Violation::TimeBudgetExceeded: return "TimeBudgetExceeded";
  }
  return "unknown";
}

inline constexpr double kDefaultTimeBudget = 15.0;

// `candidates` must be sorted.
inline Violation check_selection(std::span<const int> indices, double elapsed, std::span<const int> candidates, int K,
                                 double time_budget = kDefaultTimeBudget) {
  for (int t : indices)
    if (!std::binary_search(candidates.begin(), candidates.end(), t)) return Violation::OutOfCandidates;
  std::vector<int> sorted(indices.begin(), indices.end());
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) return Violation::Duplicate;
  if (static_cast<int>(indices.size()) > K) return Violation::BudgetExceeded;
  if (!(elapsed <= time_budget)) return Violation::TimeBudgetExceeded;
  return Violation::None;
}

inline Violation validate_selection(const SelectionResult& res, const SelectionRequest& req,
                                    double time_budget = kDefaultTimeBudget) {
  return check_selection(res.indices, res.elapsed, req.candidates, req.K, time_budget);
}

}  // namespace psfr
