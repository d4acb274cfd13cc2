#pragma once

// Frame ingestion: ordered image directories, PGRY raw archives and in-memory
// sequences; deterministic Q16 bilinear resizing; BT.601 grayscale.

#include <algorithm>
#include <array>
#include <cctype>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

#include "psfr/error.hpp"
#include "psfr/image.hpp"

namespace psfr {

namespace fs = std::filesystem;

inline constexpr int kMinFrameSide = 16;

struct ResizeSpec {
  int width = 640;
  int height = 480;

  void validate() const {
    require(width >= kMinFrameSide && height >= kMinFrameSide, ErrorCode::InvalidConfig,
            "resize target must be at least 16x16");
  }
  bool operator==(const ResizeSpec&) const = default;
};

struct FrameBuffer {
  GrayImage gray;
  // Interleaved RGB, 3 * width * height bytes, when the source had color.
  std::optional<std::vector<std::uint8_t>> rgb;
  int index = 0;

  int width() const { return gray.width; }
  int height() const { return gray.height; }
  bool has_rgb() const { return rgb.has_value(); }
};

// round(0.299 r + 0.587 g + 0.114 b) with halves rounded up, in exact integer form.
constexpr std::uint8_t luma_bt601(std::uint8_t r, std::uint8_t g, std::uint8_t b) {
  return static_cast<std::uint8_t>((299u * r + 587u * g + 114u * b + 500u) / 1000u);
}

inline GrayImage gray_from_rgb(std::span<const std::uint8_t> rgb, int width, int height) {
  require(rgb.size() == static_cast<std::size_t>(width) * height * 3, ErrorCode::InvalidArgument,
          "rgb plane size does not match dimensions");
  GrayImage g(width, height);
  for (std::size_t i = 0; i < g.px.size(); ++i) g.px[i] = luma_bt601(rgb[3 * i], rgb[3 * i + 1], rgb[3 * i + 2]);
  return g;
}

inline FrameBuffer make_frame_rgb(int width, int height, std::vector<std::uint8_t> rgb, int index = 0) {
  FrameBuffer f;
  f.gray = gray_from_rgb(rgb, width, height);
  f.rgb = std::move(rgb);
  f.index = index;
  return f;
}

inline FrameBuffer make_frame_gray(GrayImage gray, int index = 0) {
  FrameBuffer f;
  f.gray = std::move(gray);
  f.index = index;
  return f;
}

// Bilinear resampling with half-pixel-centre mapping, Q16 source coordinates,
// Q32 accumulation and round-half-up output. Interleaved channels.
inline std::vector<std::uint8_t> resize_bilinear_q16(std::span<const std::uint8_t> src, int sw, int sh,
                                                     int channels, int dw, int dh) {
  require(sw > 0 && sh > 0 && dw > 0 && dh > 0 && channels > 0, ErrorCode::InvalidArgument,
          "resize dimensions must be positive");
  require(src.size() == static_cast<std::size_t>(sw) * sh * channels, ErrorCode::InvalidArgument,
          "source plane size does not match dimensions");
  if (sw == dw && sh == dh) return {src.begin(), src.end()};

  struct Tap {
    int i0, i1;
    std::int64_t frac;  // Q16 weight of i1
  };
  auto taps = [](int s, int d) {
    std::vector<Tap> out(d);
    for (int i = 0; i < d; ++i) {
      std::int64_t q = (static_cast<std::int64_t>(2 * i + 1) * s * 65536) / (2 * static_cast<std::int64_t>(d)) - 32768;
      if (q < 0) q = 0;
      int i0 = static_cast<int>(q >> 16);
      std::int64_t frac = q & 0xFFFF;
      if (i0 >= s - 1) {
        i0 = s - 1;
        frac = 0;
      }
      out[i] = {i0, std::min(i0 + 1, s - 1), frac};
    }
    return out;
  };
  const auto tx = taps(sw, dw);
  const auto ty = taps(sh, dh);

  std::vector<std::uint8_t> dst(static_cast<std::size_t>(dw) * dh * channels);
  const auto px = [&](int x, int y, int c) -> std::int64_t {
    return src[(static_cast<std::size_t>(y) * sw + x) * channels + c];
  };
  for (int y = 0; y < dh; ++y) {
    const Tap& vy = ty[y];
    for (int x = 0; x < dw; ++x) {
      const Tap& vx = tx[x];
      for (int c = 0; c < channels; ++c) {
        const std::int64_t top = px(vx.i0, vy.i0, c) * (65536 - vx.frac) + px(vx.i1, vy.i0, c) * vx.frac;
        const std::int64_t bot = px(vx.i0, vy.i1, c) * (65536 - vx.frac) + px(vx.i1, vy.i1, c) * vx.frac;
        const std::int64_t v = top * (65536 - vy.frac) + bot * vy.frac;
        dst[(static_cast<std::size_t>(y) * dw + x) * channels + c] =
            static_cast<std::uint8_t>((v + (std::int64_t{1} << 31)) >> 32);
      }
    }
  }
  return dst;
}

// Color frames are resized in RGB and re-lumaed so gray stays consistent with rgb.
inline FrameBuffer resize_deterministic(const FrameBuffer& frame, const ResizeSpec& spec) {
  spec.validate();
  if (frame.width() == spec.width && frame.height() == spec.height) return frame;
  FrameBuffer out;
  out.index = frame.index;
  if (frame.rgb) {
    auto rgb = resize_bilinear_q16(*frame.rgb, frame.width(), frame.height(), 3, spec.width, spec.height);
    out.gray = gray_from_rgb(rgb, spec.width, spec.height);
    out.rgb = std::move(rgb);
  } else {
    out.gray = GrayImage(spec.width, spec.height,
                         resize_bilinear_q16(frame.gray.px, frame.width(), frame.height(), 1, spec.width, spec.height));
  }
  return out;
}

// ---------------------------------------------------------------------------
// PGRY raw archive: "PGRY", u32 version=1, u32 T, u32 width, u32 height, then T planes.

namespace detail {

inline void put_u32(std::ostream& os, std::uint32_t v) {
  const std::array<char, 4> b{static_cast<char>(v & 0xFF), static_cast<char>((v >> 8) & 0xFF),
                              static_cast<char>((v >> 16) & 0xFF), static_cast<char>((v >> 24) & 0xFF)};
  os.write(b.data(), 4);
}

inline std::uint32_t get_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

inline std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

inline bool is_image_file(const fs::path& p) {
  const auto ext = lower(p.extension().string());
  return ext == ".png" || ext == ".jpg" || ext == ".jpeg";
}

// Reads width/height from a PNG IHDR or a JPEG SOF marker without decoding.
inline std::optional<std::pair<int, int>> probe_image_size(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return std::nullopt;
  std::array<unsigned char, 24> head{};
  in.read(reinterpret_cast<char*>(head.data()), head.size());
  if (in.gcount() >= 24 && head[0] == 0x89 && head[1] == 'P' && head[2] == 'N' && head[3] == 'G') {
    auto be = [&](int o) {
      return static_cast<int>((head[o] << 24) | (head[o + 1] << 16) | (head[o + 2] << 8) | head[o + 3]);
    };
    return std::pair{be(16), be(20)};
  }
  if (in.gcount() >= 2 && head[0] == 0xFF && head[1] == 0xD8) {
    in.clear();
    in.seekg(2);
    while (in) {
      int c = in.get();
      if (c != 0xFF) continue;
      int marker = in.get();
      while (marker == 0xFF) marker = in.get();
      if (marker == 0xD8 || marker == 0x01 || (marker >= 0xD0 && marker <= 0xD7)) continue;
      const int len = (in.get() << 8) | in.get();
      if (len < 2) return std::nullopt;
      const bool sof = marker >= 0xC0 && marker <= 0xCF && marker != 0xC4 && marker != 0xC8 && marker != 0xCC;
      if (sof) {
        in.get();  // precision
        const int h = (in.get() << 8) | in.get();
        const int w = (in.get() << 8) | in.get();
        if (!in) return std::nullopt;
        return std::pair{w, h};
      }
      in.seekg(len - 2, std::ios::cur);
    }
  }
  return std::nullopt;
}

}  // namespace detail

inline void write_pgry(const fs::path& path, std::span<const GrayImage> frames) {
  require(!frames.empty(), ErrorCode::InvalidArgument, "PGRY archive needs at least one frame");
  const int w = frames.front().width, h = frames.front().height;
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  require(static_cast<bool>(out), ErrorCode::IoError, "cannot open " + path.string());
  out.write("PGRY", 4);
  detail::put_u32(out, 1);
  detail::put_u32(out, static_cast<std::uint32_t>(frames.size()));
  detail::put_u32(out, static_cast<std::uint32_t>(w));
  detail::put_u32(out, static_cast<std::uint32_t>(h));
  for (const auto& f : frames) {
    require(f.width == w && f.height == h, ErrorCode::DimensionMismatch, "PGRY frames must share dimensions");
    out.write(reinterpret_cast<const char*>(f.px.data()), static_cast<std::streamsize>(f.px.size()));
  }
  require(static_cast<bool>(out), ErrorCode::IoError, "write failed: " + path.string());
}

// ---------------------------------------------------------------------------

// Compares digit runs by numeric value so f2.png < f10.png; ties fall back to plain order.
inline bool natural_less(const std::string& a, const std::string& b) {
  std::size_t i = 0, j = 0;
  while (i < a.size() && j < b.size()) {
    const bool da = std::isdigit(static_cast<unsigned char>(a[i])) != 0;
    const bool db = std::isdigit(static_cast<unsigned char>(b[j])) != 0;
    if (da && db) {
      std::size_t ie = i, je = j;
      while (ie < a.size() && std::isdigit(static_cast<unsigned char>(a[ie]))) ++ie;
      while (je < b.size() && std::isdigit(static_cast<unsigned char>(b[je]))) ++je;
      std::size_t is = i, js = j;
      while (is + 1 < ie && a[is] == '0') ++is;
      while (js + 1 < je && b[js] == '0') ++js;
      const std::string_view na(a.data() + is, ie - is), nb(b.data() + js, je - js);
      if (na.size() != nb.size()) return na.size() < nb.size();
      if (na != nb) return na < nb;
      i = ie;
      j = je;
    } else {
      if (a[i] != b[j]) return static_cast<unsigned char>(a[i]) < static_cast<unsigned char>(b[j]);
      ++i;
      ++j;
    }
  }
  if ((a.size() - i) != (b.size() - j)) return (a.size() - i) < (b.size() - j);
  return a < b;
}

class VideoSource {
 public:
  struct FileList {
    std::vector<fs::path> files;
  };
  struct Archive {
    fs::path path;
    int width = 0;
    int height = 0;
  };
  struct Memory {
    std::shared_ptr<const std::vector<FrameBuffer>> frames;
  };

  VideoSource() = default;

  static VideoSource from_files(std::vector<fs::path> files, std::optional<ResizeSpec> resize = std::nullopt) {
    VideoSource v;
    v.count_ = static_cast<int>(files.size());
    v.backend_ = FileList{std::move(files)};
    v.resize_ = resize;
    return v;
  }

  static VideoSource from_frames(std::vector<FrameBuffer> frames, std::optional<ResizeSpec> resize = std::nullopt) {
    require(!frames.empty(), ErrorCode::NoFrames, "in-memory video has no frames");
    if (!resize) {
      for (const auto& f : frames)
        require(f.width() == frames.front().width() && f.height() == frames.front().height(),
                ErrorCode::DimensionMismatch, "in-memory frames differ in size");
    }
    VideoSource v;
    v.count_ = static_cast<int>(frames.size());
    v.backend_ = Memory{std::make_shared<const std::vector<FrameBuffer>>(std::move(frames))};
    v.resize_ = resize;
    return v;
  }

  static VideoSource from_archive(const fs::path& path, std::optional<ResizeSpec> resize = std::nullopt) {
    std::ifstream in(path, std::ios::binary);
    require(static_cast<bool>(in), ErrorCode::IoError, "cannot open " + path.string());
    std::array<unsigned char, 20> head{};
    in.read(reinterpret_cast<char*>(head.data()), head.size());
    require(in.gcount() == 20 && std::memcmp(head.data(), "PGRY", 4) == 0, ErrorCode::CorruptFrame,
            "not a PGRY archive: " + path.string());
    require(detail::get_u32(head.data() + 4) == 1, ErrorCode::CorruptFrame, "unsupported PGRY version");
    const auto t = detail::get_u32(head.data() + 8);
    const auto w = detail::get_u32(head.data() + 12);
    const auto h = detail::get_u32(head.data() + 16);
    require(t > 0, ErrorCode::NoFrames, "PGRY archive is empty: " + path.string());
    require(w > 0 && h > 0 && w < 65536 && h < 65536, ErrorCode::CorruptFrame, "bad PGRY dimensions");
    const auto expected = 20 + static_cast<std::uintmax_t>(t) * w * h;
    require(fs::file_size(path) >= expected, ErrorCode::CorruptFrame, "PGRY archive truncated: " + path.string());
    VideoSource v;
    v.count_ = static_cast<int>(t);
    v.backend_ = Archive{path, static_cast<int>(w), static_cast<int>(h)};
    v.resize_ = resize;
    return v;
  }

  int count() const { return count_; }
  const std::optional<ResizeSpec>& resize() const { return resize_; }
  void set_resize(std::optional<ResizeSpec> r) { resize_ = r; }

  // Locators in frame order, for hashing and diagnostics.
  std::vector<fs::path> frame_refs() const {
    if (const auto* fl = std::get_if<FileList>(&backend_)) return fl->files;
    if (const auto* ar = std::get_if<Archive>(&backend_)) return {ar->path};
    return {};
  }

  FrameBuffer load(int t) const {
    require(t >= 0 && t < count_, ErrorCode::IndexOutOfRange,
            "frame " + std::to_string(t) + " outside [0, " + std::to_string(count_) + ")");
    FrameBuffer f = std::visit([&](const auto& b) { return load_raw(b, t); }, backend_);
    f.index = t;
    if (resize_) f = resize_deterministic(f, *resize_);
    return f;
  }

 private:
  static FrameBuffer load_raw(const FileList& b, int t) {
    const auto& path = b.files[t];
    cv::Mat img = cv::imread(path.string(), cv::IMREAD_ANYCOLOR);
    require(!img.empty() && img.depth() == CV_8U, ErrorCode::CorruptFrame,
            "frame " + std::to_string(t) + " failed to decode: " + path.string());
    if (img.channels() == 1) {
      GrayImage g(img.cols, img.rows);
      for (int y = 0; y < img.rows; ++y) std::memcpy(&g.at(0, y), img.ptr<std::uint8_t>(y), img.cols);
      return make_frame_gray(std::move(g), t);
    }
    const int ch = img.channels();
    require(ch == 3 || ch == 4, ErrorCode::CorruptFrame, "unsupported channel count in " + path.string());
    std::vector<std::uint8_t> rgb(static_cast<std::size_t>(img.cols) * img.rows * 3);
    for (int y = 0; y < img.rows; ++y) {
      const auto* src = img.ptr<std::uint8_t>(y);
      auto* dst = rgb.data() + static_cast<std::size_t>(y) * img.cols * 3;
      for (int x = 0; x < img.cols; ++x) {
        dst[3 * x + 0] = src[ch * x + 2];
        dst[3 * x + 1] = src[ch * x + 1];
        dst[3 * x + 2] = src[ch * x + 0];
      }
    }
    return make_frame_rgb(img.cols, img.rows, std::move(rgb), t);
  }

  static FrameBuffer load_raw(const Archive& b, int t) {
    std::ifstream in(b.path, std::ios::binary);
    require(static_cast<bool>(in), ErrorCode::CorruptFrame, "cannot reopen " + b.path.string());
    GrayImage g(b.width, b.height);
    in.seekg(20 + static_cast<std::streamoff>(t) * b.width * b.height);
    in.read(reinterpret_cast<char*>(g.px.data()), static_cast<std::streamsize>(g.px.size()));
    require(in.gcount() == static_cast<std::streamsize>(g.px.size()), ErrorCode::CorruptFrame,
            "frame " + std::to_string(t) + " truncated in " + b.path.string());
    return make_frame_gray(std::move(g), t);
  }

  static FrameBuffer load_raw(const Memory& b, int t) { return (*b.frames)[t]; }

  std::variant<FileList, Archive, Memory> backend_;
  int count_ = 0;
  std::optional<ResizeSpec> resize_;
};

// Accepts a directory of PNG/JPEG frames, a directory holding one .pgry archive,
// or a .pgry file directly.
inline VideoSource open_frame_dir(const fs::path& path, std::optional<ResizeSpec> resize = std::nullopt) {
  if (resize) resize->validate();
  require(fs::exists(path), ErrorCode::IoError, "no such path: " + path.string());
  if (fs::is_regular_file(path)) {
    require(detail::lower(path.extension().string()) == ".pgry", ErrorCode::InvalidArgument,
            "expected a frame directory or a .pgry archive: " + path.string());
    return VideoSource::from_archive(path, resize);
  }

  std::vector<fs::path> images, archives;
  for (const auto& entry : fs::directory_iterator(path)) {
    if (!entry.is_regular_file()) continue;
    if (detail::is_image_file(entry.path())) images.push_back(entry.path());
    else if (detail::lower(entry.path().extension().string()) == ".pgry") archives.push_back(entry.path());
  }
  if (images.empty()) {
    require(!archives.empty(), ErrorCode::NoFrames, "no frames in " + path.string());
    require(archives.size() == 1, ErrorCode::InvalidArgument, "multiple PGRY archives in " + path.string());
    return VideoSource::from_archive(archives.front(), resize);
  }
  std::sort(images.begin(), images.end(),
            [](const fs::path& a, const fs::path& b) { return natural_less(a.filename().string(), b.filename().string()); });

  if (!resize) {
    std::optional<std::pair<int, int>> first;
    for (std::size_t t = 0; t < images.size(); ++t) {
      const auto dims = detail::probe_image_size(images[t]);
      require(dims.has_value(), ErrorCode::CorruptFrame,
              "frame " + std::to_string(t) + " has an unreadable header: " + images[t].string());
      if (!first) first = dims;
      require(*dims == *first, ErrorCode::DimensionMismatch,
              "frame " + std::to_string(t) + " differs in size and no resize was requested");
    }
  }
  return VideoSource::from_files(std::move(images), resize);
}

inline FrameBuffer load_frame(const VideoSource& src, int t) { return src.load(t); }

inline void write_png(const FrameBuffer& frame, const fs::path& path) {
  cv::Mat img;
  if (frame.rgb) {
    img.create(frame.height(), frame.width(), CV_8UC3);
    for (int y = 0; y < frame.height(); ++y) {
      auto* dst = img.ptr<std::uint8_t>(y);
      const auto* src = frame.rgb->data() + static_cast<std::size_t>(y) * frame.width() * 3;
      for (int x = 0; x < frame.width(); ++x) {
        dst[3 * x + 0] = src[3 * x + 2];
        dst[3 * x + 1] = src[3 * x + 1];
        dst[3 * x + 2] = src[3 * x + 0];
      }
    }
  } else {
    img.create(frame.height(), frame.width(), CV_8UC1);
    for (int y = 0; y < frame.height(); ++y) std::memcpy(img.ptr<std::uint8_t>(y), &frame.gray.at(0, y), frame.width());
  }
  require(cv::imwrite(path.string(), img), ErrorCode::IoError, "failed to write " + path.string());
}

}  // namespace psfr
