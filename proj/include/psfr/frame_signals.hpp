#pragma once

// Per-frame cue extraction, per-video robust normalization, and the PSFC
// signal cache consumed by the selector.

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "psfr/error.hpp"
#include "psfr/media_io.hpp"
#include "psfr/psfr_tracker.hpp"
#include "psfr/vision_kernels.hpp"

namespace psfr {

inline constexpr int kSignalDim = 5;
inline constexpr int kRawDim = 6;

// Raw cue column order in the cache's raw block.
enum RawColumn : int { kRawCorners = 0, kRawCentral, kRawEdges, kRawEntropy, kRawMotion, kRawLowRetention };
// Raw columns that feed the normalized signal vector, in signal order.
inline constexpr std::array<int, kSignalDim> kSignalSources{kRawCorners, kRawCentral, kRawEdges, kRawEntropy,
                                                            kRawLowRetention};

struct RawCues {
  double corners = 0;        // c: tracked corners
  double central = 0;        // z: tracked corners in the central window
  double edge_density = 0;   // e
  double entropy = 0;        // H: normalized grayscale entropy
  double motion = 0;         // m: mean accepted displacement, pixels
  double low_retention = 0;  // L

  std::array<double, kRawDim> as_array() const {
    return {corners, central, edge_density, entropy, motion, low_retention};
  }
};

struct SignalConfig {
  PsfrConfig psfr{};
  double central_frac = 0.5;
  double canny_lo = 50.0;
  double canny_hi = 150.0;

  void validate() const {
    psfr.validate();
    require(central_frac > 0.0 && central_frac <= 1.0, ErrorCode::InvalidConfig, "central_frac must lie in (0, 1]");
    require(canny_lo < canny_hi, ErrorCode::InvalidConfig, "Canny thresholds need lo < hi");
  }
};

struct SignalTrack {
  std::string video_id;
  int frames = 0;
  std::vector<float> S;    // frames x 5
  std::vector<float> H;    // frames x 432
  std::vector<float> raw;  // frames x 6

  std::span<const float> s_row(int t) const { return {S.data() + static_cast<std::size_t>(t) * kSignalDim, kSignalDim}; }
  std::span<const float> h_row(int t) const { return {H.data() + static_cast<std::size_t>(t) * kHistDim, kHistDim}; }
  std::span<const float> raw_row(int t) const { return {raw.data() + static_cast<std::size_t>(t) * kRawDim, kRawDim}; }

  // Arrays only; the id is not part of the cache payload.
  bool same_data(const SignalTrack& o) const { return frames == o.frames && S == o.S && H == o.H && raw == o.raw; }
};

// Square window of side central_frac * min(W, H) centred in the frame.
inline bool in_central_window(Point2 p, int width, int height, double central_frac) {
  const double side = central_frac * std::min(width, height);
  const double cx = 0.5 * width, cy = 0.5 * height;
  return p.x >= cx - 0.5 * side && p.x < cx + 0.5 * side && p.y >= cy - 0.5 * side && p.y < cy + 0.5 * side;
}

inline RawCues compute_raw_cues(const FrameBuffer& frame, const PsfrFrameOutcome& outcome, double central_frac = 0.5,
                                double canny_lo = 50.0, double canny_hi = 150.0) {
  require(outcome.t == frame.index, ErrorCode::InvalidArgument, "outcome belongs to a different frame");
  RawCues c;
  c.corners = static_cast<double>(outcome.survivors.size());
  c.central = static_cast<double>(std::count_if(outcome.survivors.begin(), outcome.survivors.end(), [&](Point2 p) {
    return in_central_window(p, frame.width(), frame.height(), central_frac);
  }));
  c.edge_density = canny_edge_density(frame.gray, canny_lo, canny_hi);
  c.entropy = grayscale_entropy(frame.gray);
  c.motion = outcome.motion_mag;
  c.low_retention = outcome.low_retention;
  return c;
}

// Linear interpolation between order statistics (numpy's default).
inline double percentile_sorted(std::span<const double> sorted, double pct) {
  require(!sorted.empty(), ErrorCode::InvalidArgument, "percentile of an empty column");
  const double pos = pct / 100.0 * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  if (lo + 1 >= sorted.size()) return sorted.back();
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
}

// Maps x to clip((x - p5) / (p95 - p5), 0, 1). When p5 == p95 the column is
// scaled by its min/max instead (sparse spike cues such as L are mostly one
// value); a truly constant column maps to 0.5.
inline std::vector<double> normalize_column(std::span<const double> col) {
  std::vector<double> sorted(col.begin(), col.end());
  std::sort(sorted.begin(), sorted.end());
  double lo = percentile_sorted(sorted, 5.0), hi = percentile_sorted(sorted, 95.0);
  if (!(hi > lo)) {
    lo = sorted.front();
    hi = sorted.back();
  }
  std::vector<double> out(col.size());
  if (!(hi > lo)) {
    std::fill(out.begin(), out.end(), 0.5);
    return out;
  }
  const double span = hi - lo;
  for (std::size_t i = 0; i < col.size(); ++i) out[i] = std::clamp((col[i] - lo) / span, 0.0, 1.0);
  return out;
}

// raw: T x 6 row-major; returns T x 5 in signal order (motion excluded).
inline std::vector<double> robust_normalize(std::span<const double> raw, int frames) {
  require(frames >= 1 && raw.size() == static_cast<std::size_t>(frames) * kRawDim, ErrorCode::InvalidArgument,
          "raw cue array must be T x 6 with T >= 1");
  std::vector<double> out(static_cast<std::size_t>(frames) * kSignalDim);
  std::vector<double> col(frames);
  for (int k = 0; k < kSignalDim; ++k) {
    for (int t = 0; t < frames; ++t) col[t] = raw[static_cast<std::size_t>(t) * kRawDim + kSignalSources[k]];
    const auto norm = normalize_column(col);
    for (int t = 0; t < frames; ++t) out[static_cast<std::size_t>(t) * kSignalDim + k] = norm[t];
  }
  return out;
}

using OutcomeHook = std::function<void(const PsfrFrameOutcome&)>;

inline SignalTrack extract_signals(const VideoSource& src, const SignalConfig& cfg, std::string video_id = {},
                                   const OutcomeHook& on_outcome = {}) {
  cfg.validate();
  SignalTrack track;
  track.video_id = std::move(video_id);
  track.frames = src.count();
  std::vector<double> raw;
  raw.reserve(static_cast<std::size_t>(src.count()) * kRawDim);
  track.H.reserve(static_cast<std::size_t>(src.count()) * kHistDim);
  run_video(src, cfg.psfr, [&](const FrameBuffer& f, const PsfrFrameOutcome& o, const TrackerState&) {
    if (on_outcome) on_outcome(o);
    const auto cues = compute_raw_cues(f, o, cfg.central_frac, cfg.canny_lo, cfg.canny_hi).as_array();
    raw.insert(raw.end(), cues.begin(), cues.end());
    const auto h = hsv_histogram(f);
    track.H.insert(track.H.end(), h.begin(), h.end());
  });
  const auto s = robust_normalize(raw, track.frames);
  track.S.assign(s.begin(), s.end());
  track.raw.assign(raw.begin(), raw.end());
  return track;
}

inline SignalTrack extract_signals(const VideoSource& src, const PsfrConfig& cfg, std::string video_id = {}) {
  SignalConfig sc;
  sc.psfr = cfg;
  return extract_signals(src, sc, std::move(video_id));
}

// ---------------------------------------------------------------------------
// PSFC cache: "PSFC", u32 version, T, 5, 432, 6, then little-endian f32 S, H, raw.

inline constexpr std::size_t kCacheHeaderBytes = 24;

inline std::uintmax_t cache_file_size(int frames) {
  return kCacheHeaderBytes + 4ull * static_cast<std::uintmax_t>(frames) * (kSignalDim + kHistDim + kRawDim);
}

namespace detail {

inline void append_u32(std::vector<char>& buf, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

inline void append_floats(std::vector<char>& buf, std::span<const float> xs) {
  for (float f : xs) append_u32(buf, std::bit_cast<std::uint32_t>(f));
}

}  // namespace detail

inline std::vector<char> encode_cache(const SignalTrack& track) {
  const auto n = static_cast<std::size_t>(track.frames);
  require(track.S.size() == n * kSignalDim && track.H.size() == n * kHistDim && track.raw.size() == n * kRawDim,
          ErrorCode::InvalidArgument, "signal arrays disagree with the frame count");
  std::vector<char> buf;
  buf.reserve(cache_file_size(track.frames));
  buf.insert(buf.end(), {'P', 'S', 'F', 'C'});
  detail::append_u32(buf, 1);
  detail::append_u32(buf, static_cast<std::uint32_t>(track.frames));
  detail::append_u32(buf, kSignalDim);
  detail::append_u32(buf, kHistDim);
  detail::append_u32(buf, kRawDim);
  detail::append_floats(buf, track.S);
  detail::append_floats(buf, track.H);
  detail::append_floats(buf, track.raw);
  return buf;
}

// Writes through a temporary file and renames it into place.
inline void write_cache(const SignalTrack& track, const fs::path& path) {
  const auto buf = encode_cache(track);
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    require(static_cast<bool>(out), ErrorCode::IoError, "cannot write " + tmp.string());
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    require(static_cast<bool>(out), ErrorCode::IoError, "write failed: " + tmp.string());
  }
  fs::rename(tmp, path);
}

inline SignalTrack decode_cache(std::span<const char> bytes, std::string video_id = {}) {
  require(bytes.size() >= kCacheHeaderBytes, ErrorCode::CorruptCache, "cache shorter than its header");
  require(std::memcmp(bytes.data(), "PSFC", 4) == 0, ErrorCode::CorruptCache, "bad cache magic");
  const auto* u = reinterpret_cast<const unsigned char*>(bytes.data());
  require(detail::get_u32(u + 4) == 1, ErrorCode::CorruptCache, "unsupported cache version");
  const auto frames = detail::get_u32(u + 8);
  require(detail::get_u32(u + 12) == kSignalDim && detail::get_u32(u + 16) == kHistDim &&
              detail::get_u32(u + 20) == kRawDim,
          ErrorCode::CorruptCache, "unexpected cache dimensions");
  require(frames >= 1 && frames < (1u << 26), ErrorCode::CorruptCache, "bad frame count in cache");
  require(bytes.size() == cache_file_size(static_cast<int>(frames)), ErrorCode::CorruptCache,
          "cache size does not match its header");
  SignalTrack t;
  t.video_id = std::move(video_id);
  t.frames = static_cast<int>(frames);
  std::size_t off = kCacheHeaderBytes;
  auto read = [&](std::vector<float>& dst, std::size_t count) {
    dst.resize(count);
    for (std::size_t i = 0; i < count; ++i, off += 4) dst[i] = std::bit_cast<float>(detail::get_u32(u + off));
  };
  read(t.S, static_cast<std::size_t>(frames) * kSignalDim);
  read(t.H, static_cast<std::size_t>(frames) * kHistDim);
  read(t.raw, static_cast<std::size_t>(frames) * kRawDim);
  return t;
}

// The video id defaults to the file stem.
inline SignalTrack read_cache(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorCode::IoError, "cannot open cache " + path.string());
  std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_cache(bytes, path.stem().string());
}

}  // namespace psfr
