#pragma once

// Deterministic synthetic videos: textured scenes joined by hard cuts, each
// scene panning slowly over a larger canvas. Used as a test corpus with known
// cut positions and evidence sets.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include "psfr/error.hpp"
#include "psfr/eval_metrics.hpp"
#include "psfr/json_io.hpp"
#include "psfr/media_io.hpp"

namespace psfr {

// SplitMix64. Used instead of <random> distributions so a corpus is
// byte-identical across standard libraries.
class SynthRng {
 public:
  explicit SynthRng(std::uint64_t seed) : s_(seed) {}
  std::uint64_t next() {
    std::uint64_t z = (s_ += 0x9E3779B97F4A7C15ull);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  int uniform_int(int lo, int hi) {  // inclusive
    return lo + static_cast<int>(next() % static_cast<std::uint64_t>(hi - lo + 1));
  }

 private:
  std::uint64_t s_;
};

inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  SynthRng r(a ^ (b * 0xD6E8FEB86659FD93ull));
  return r.next();
}

inline std::uint64_t hash_string(const std::string& s) {
  std::uint64_t h = 0xCBF29CE484222325ull;  // FNV-1a
  for (unsigned char c : s) h = (h ^ c) * 0x100000001B3ull;
  return h;
}

enum class Texture { Blocks, Discs, Checker };
enum class EvidenceRule { Cuts, Scenes, SceneCenters };

inline Texture parse_texture(const std::string& s) {
  if (s == "blocks") return Texture::Blocks;
  if (s == "discs") return Texture::Discs;
  if (s == "checker") return Texture::Checker;
  fail(ErrorCode::InvalidConfig, "unknown texture: " + s);
}

inline const char* texture_name(Texture t) {
  switch (t) {
    case Texture::Blocks: return "blocks";
    case Texture::Discs: return "discs";
    case Texture::Checker: return "checker";
  }
  return "blocks";
}

inline EvidenceRule parse_evidence_rule(const std::string& s) {
  if (s == "cuts") return EvidenceRule::Cuts;
  if (s == "scenes") return EvidenceRule::Scenes;
  if (s == "scene_centers") return EvidenceRule::SceneCenters;
  fail(ErrorCode::InvalidConfig, "unknown evidence rule: " + s);
}

struct SynthScene {
  Texture texture = Texture::Blocks;
  int frames = 30;
  double pan_x = 0.0;  // pixels per frame
  double pan_y = 0.0;
  double hue = -1.0;   // degrees; negative picks one automatically
};

struct SynthVideoSpec {
  std::string id;
  std::vector<SynthScene> scenes;

  int frames() const {
    int n = 0;
    for (const auto& s : scenes) n += s.frames;
    return n;
  }
  std::vector<int> scene_starts() const {
    std::vector<int> out;
    int t = 0;
    for (const auto& s : scenes) {
      out.push_back(t);
      t += s.frames;
    }
    return out;
  }
  // First frame of every scene after the first.
  std::vector<int> cuts() const {
    auto s = scene_starts();
    s.erase(s.begin());
    return s;
  }
  void validate() const {
    require(!id.empty(), ErrorCode::InvalidConfig, "video id must not be empty");
    require(!scenes.empty(), ErrorCode::InvalidConfig, "video " + id + " has no scenes");
    for (const auto& s : scenes) {
      require(s.frames >= 1, ErrorCode::InvalidConfig, "scene needs at least one frame");
      require(std::abs(s.pan_x) <= 8.0 && std::abs(s.pan_y) <= 8.0, ErrorCode::InvalidConfig, "pan above 8 px/frame");
    }
  }
};

struct RandomVideoParams {
  int min_scenes = 2;
  int max_scenes = 5;
  int min_frames = 20;
  int max_frames = 60;
  double max_pan = 1.0;

  void validate() const {
    require(min_scenes >= 1 && max_scenes >= min_scenes, ErrorCode::InvalidConfig, "bad scene count range");
    require(min_frames >= 1 && max_frames >= min_frames, ErrorCode::InvalidConfig, "bad scene length range");
    require(max_pan >= 0.0 && max_pan <= 8.0, ErrorCode::InvalidConfig, "max_pan must lie in [0, 8]");
  }
};

inline SynthVideoSpec random_video_spec(std::uint64_t seed, std::string id, const RandomVideoParams& p = {}) {
  p.validate();
  SynthRng rng(mix_seed(seed, hash_string(id)));
  SynthVideoSpec v;
  v.id = std::move(id);
  const int n = rng.uniform_int(p.min_scenes, p.max_scenes);
  for (int i = 0; i < n; ++i) {
    SynthScene s;
    s.texture = static_cast<Texture>(rng.uniform_int(0, 2));
    s.frames = rng.uniform_int(p.min_frames, p.max_frames);
    s.pan_x = rng.uniform(-p.max_pan, p.max_pan);
    s.pan_y = rng.uniform(-p.max_pan, p.max_pan);
    v.scenes.push_back(s);
  }
  return v;
}

namespace detail {

struct Rgb {
  std::uint8_t r, g, b;
};

inline Rgb hsv_to_rgb(double h, double s, double v) {
  h = std::fmod(std::fmod(h, 360.0) + 360.0, 360.0);
  const double c = v * s;
  const double hp = h / 60.0;
  const double x = c * (1.0 - std::abs(std::fmod(hp, 2.0) - 1.0));
  double r = 0, g = 0, b = 0;
  switch (static_cast<int>(hp)) {
    case 0: r = c, g = x; break;
    case 1: r = x, g = c; break;
    case 2: g = c, b = x; break;
    case 3: g = x, b = c; break;
    case 4: r = x, b = c; break;
    default: r = c, b = x; break;
  }
  const double m = v - c;
  const auto q = [&](double u) { return static_cast<std::uint8_t>(std::lround(std::clamp(u + m, 0.0, 1.0) * 255.0)); };
  return {q(r), q(g), q(b)};
}

struct Canvas {
  int w = 0, h = 0;
  std::vector<std::uint8_t> rgb;

  void fill_rect(int x0, int y0, int x1, int y1, Rgb c) {
    x0 = std::max(x0, 0), y0 = std::max(y0, 0), x1 = std::min(x1, w), y1 = std::min(y1, h);
    for (int y = y0; y < y1; ++y)
      for (int x = x0; x < x1; ++x) put(x, y, c);
  }
  void fill_disc(int cx, int cy, int r, Rgb c) {
    for (int y = std::max(cy - r, 0); y <= std::min(cy + r, h - 1); ++y)
      for (int x = std::max(cx - r, 0); x <= std::min(cx + r, w - 1); ++x)
        if ((x - cx) * (x - cx) + (y - cy) * (y - cy) <= r * r) put(x, y, c);
  }
  void put(int x, int y, Rgb c) {
    auto* p = &rgb[(static_cast<std::size_t>(y) * w + x) * 3];
    p[0] = c.r, p[1] = c.g, p[2] = c.b;
  }
};

inline Canvas render_texture(Texture tex, int w, int h, double hue, SynthRng& rng) {
  std::vector<Rgb> palette;
  for (int i = 0; i < 6; ++i)
    palette.push_back(hsv_to_rgb(hue + rng.uniform(-20.0, 20.0), rng.uniform(0.55, 1.0), rng.uniform(0.35, 1.0)));
  const auto pick = [&] { return palette[rng.uniform_int(0, static_cast<int>(palette.size()) - 1)]; };
  Canvas cv{w, h, std::vector<std::uint8_t>(static_cast<std::size_t>(w) * h * 3)};
  cv.fill_rect(0, 0, w, h, hsv_to_rgb(hue, 0.6, rng.uniform(0.12, 0.22)));
  const long area = static_cast<long>(w) * h;
  switch (tex) {
    case Texture::Blocks:
      for (long i = 0, n = area / 220; i < n; ++i) {
        const int x = rng.uniform_int(-16, w), y = rng.uniform_int(-16, h);
        cv.fill_rect(x, y, x + rng.uniform_int(6, 32), y + rng.uniform_int(6, 32), pick());
      }
      break;
    case Texture::Discs:
      for (long i = 0, n = area / 260; i < n; ++i)
        cv.fill_disc(rng.uniform_int(0, w - 1), rng.uniform_int(0, h - 1), rng.uniform_int(4, 14), pick());
      break;
    case Texture::Checker: {
      const int cell = rng.uniform_int(12, 22);
      for (int y = 0, row = 0; y < h; y += cell, ++row) {
        const int shift = (row % 2) * (cell / 2);  // brick offset keeps T-junctions
        for (int x = -shift; x < w; x += cell) cv.fill_rect(x, y, x + cell, y + cell, pick());
      }
      break;
    }
  }
  return cv;
}

// Small deterministic per-pixel noise in [-2, 2].
inline int pixel_noise(std::uint64_t seed, int t, int x, int y) {
  std::uint64_t z = seed ^ (static_cast<std::uint64_t>(t) << 40) ^ (static_cast<std::uint64_t>(y) << 20) ^
                    static_cast<std::uint64_t>(x);
  z = (z ^ (z >> 33)) * 0xFF51AFD7ED558CCDull;
  z = (z ^ (z >> 33)) * 0xC4CEB9FE1A85EC53ull;
  z ^= z >> 33;
  return static_cast<int>(z % 5) - 2;
}

}  // namespace detail

// Renders every frame of the video as an RGB FrameBuffer.
inline std::vector<FrameBuffer> render_video(const SynthVideoSpec& v, int width, int height, std::uint64_t seed) {
  v.validate();
  require(width >= kMinFrameSide && height >= kMinFrameSide, ErrorCode::InvalidConfig, "frames must be >= 16x16");
  const std::uint64_t vseed = mix_seed(seed, hash_string(v.id));
  SynthRng vrng(vseed);
  const double base_hue = vrng.uniform(0.0, 360.0);
  std::vector<FrameBuffer> out;
  out.reserve(v.frames());
  int t = 0;
  for (std::size_t si = 0; si < v.scenes.size(); ++si) {
    const auto& s = v.scenes[si];
    SynthRng rng(mix_seed(vseed, si + 1));
    const double hue = s.hue >= 0.0 ? s.hue : base_hue + 137.508 * static_cast<double>(si);
    const int mx = static_cast<int>(std::ceil(std::abs(s.pan_x) * s.frames)) + 2;
    const int my = static_cast<int>(std::ceil(std::abs(s.pan_y) * s.frames)) + 2;
    const auto canvas = detail::render_texture(s.texture, width + 2 * mx, height + 2 * my, hue, rng);
    for (int k = 0; k < s.frames; ++k, ++t) {
      const int ox = mx + static_cast<int>(std::lround(s.pan_x * k));
      const int oy = my + static_cast<int>(std::lround(s.pan_y * k));
      std::vector<std::uint8_t> rgb(static_cast<std::size_t>(width) * height * 3);
      for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
          const int n = detail::pixel_noise(vseed, t, x, y);
          const auto* src = &canvas.rgb[(static_cast<std::size_t>(y + oy) * canvas.w + (x + ox)) * 3];
          auto* dst = &rgb[(static_cast<std::size_t>(y) * width + x) * 3];
          for (int c = 0; c < 3; ++c) dst[c] = static_cast<std::uint8_t>(std::clamp(src[c] + n, 0, 255));
        }
      }
      out.push_back(make_frame_rgb(width, height, std::move(rgb), t));
    }
  }
  return out;
}

inline EvidenceInstance synth_instance(const SynthVideoSpec& v, EvidenceRule rule) {
  EvidenceInstance inst;
  inst.instance_id = v.id + "_q0";
  inst.video_id = v.id;
  inst.candidates = all_frames(v.frames());
  const auto starts = v.scene_starts();
  for (std::size_t i = 0; i < starts.size(); ++i) {
    const int lo = starts[i], len = v.scenes[i].frames;
    switch (rule) {
      case EvidenceRule::Cuts:
        if (i > 0) inst.evidence_sets.push_back({lo});
        break;
      case EvidenceRule::Scenes: {
        std::vector<int> g(len);
        for (int k = 0; k < len; ++k) g[k] = lo + k;
        inst.evidence_sets.push_back(std::move(g));
        break;
      }
      case EvidenceRule::SceneCenters: inst.evidence_sets.push_back({lo + len / 2}); break;
    }
  }
  return inst;
}

// ---------------------------------------------------------------------------
// Corpus spec:
// {"width": 320, "height": 240, "evidence": "cuts",
//  "videos": [{"id": "a", "scenes": [{"texture": "blocks", "frames": 50, "pan": [0.5, 0]}]}],
//  "random_videos": {"count": 10, "min_scenes": 2, "max_scenes": 5, ...}}

struct CorpusSpec {
  int width = 320;
  int height = 240;
  EvidenceRule evidence = EvidenceRule::Cuts;
  std::vector<SynthVideoSpec> videos;
};

inline CorpusSpec corpus_from_json(const json& j, std::uint64_t seed) {
  CorpusSpec c;
  try {
    c.width = j.value("width", c.width);
    c.height = j.value("height", c.height);
    if (j.contains("evidence")) c.evidence = parse_evidence_rule(j.at("evidence").get<std::string>());
    if (j.contains("videos")) {
      for (const auto& jv : j.at("videos")) {
        SynthVideoSpec v;
        v.id = jv.at("id").get<std::string>();
        for (const auto& js : jv.at("scenes")) {
          SynthScene s;
          s.texture = parse_texture(js.value("texture", std::string("blocks")));
          s.frames = js.at("frames").get<int>();
          if (js.contains("pan")) {
            const auto pan = js.at("pan").get<std::vector<double>>();
            require(pan.size() == 2, ErrorCode::InvalidConfig, "pan must be [dx, dy]");
            s.pan_x = pan[0];
            s.pan_y = pan[1];
          }
          s.hue = js.value("hue", -1.0);
          v.scenes.push_back(s);
        }
        c.videos.push_back(std::move(v));
      }
    }
    if (j.contains("random_videos")) {
      const auto& r = j.at("random_videos");
      RandomVideoParams p;
      p.min_scenes = r.value("min_scenes", p.min_scenes);
      p.max_scenes = r.value("max_scenes", p.max_scenes);
      p.min_frames = r.value("min_frames", p.min_frames);
      p.max_frames = r.value("max_frames", p.max_frames);
      p.max_pan = r.value("max_pan", p.max_pan);
      const int count = r.at("count").get<int>();
      require(count >= 0, ErrorCode::InvalidConfig, "random video count must be >= 0");
      const auto prefix = r.value("prefix", std::string("v"));
      for (int i = 0; i < count; ++i) {
        char id[32];
        std::snprintf(id, sizeof id, "%03d", i);
        c.videos.push_back(random_video_spec(seed, prefix + id, p));
      }
    }
  } catch (const json::exception& e) {
    fail(ErrorCode::InvalidConfig, std::string("malformed synth spec: ") + e.what());
  }
  require(c.width >= kMinFrameSide && c.height >= kMinFrameSide, ErrorCode::InvalidConfig, "frames must be >= 16x16");
  require(!c.videos.empty(), ErrorCode::InvalidConfig, "synth spec lists no videos");
  for (std::size_t i = 0; i < c.videos.size(); ++i) {
    c.videos[i].validate();
    for (std::size_t k = 0; k < i; ++k)
      require(c.videos[k].id != c.videos[i].id, ErrorCode::InvalidConfig, "duplicate video id " + c.videos[i].id);
  }
  return c;
}

// Writes <out>/<id>/frame_00000.png ..., <out>/annotations.jsonl and
// <out>/manifest.json.
inline void write_corpus(const CorpusSpec& c, const std::filesystem::path& out, std::uint64_t seed) {
  std::filesystem::create_directories(out);
  std::vector<EvidenceInstance> insts;
  json manifest = json::array();
  for (const auto& v : c.videos) {
    const auto dir = out / v.id;
    std::filesystem::create_directories(dir);
    for (const auto& f : render_video(v, c.width, c.height, seed)) {
      char name[32];
      std::snprintf(name, sizeof name, "frame_%05d.png", f.index);
      write_png(f, dir / name);
    }
    insts.push_back(synth_instance(v, c.evidence));
    json scenes = json::array();
    for (const auto& s : v.scenes)
      scenes.push_back({{"texture", texture_name(s.texture)}, {"frames", s.frames}, {"pan", {s.pan_x, s.pan_y}}});
    manifest.push_back({{"id", v.id}, {"frames", v.frames()}, {"cuts", v.cuts()}, {"scenes", std::move(scenes)}});
  }
  write_annotations(out / "annotations.jsonl", insts);
  write_text_file(out / "manifest.json", json{{"width", c.width}, {"height", c.height}, {"seed", seed}, {"videos", manifest}}.dump(1) + "\n");
}

}  // namespace psfr
