#include "commands.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <mutex>
#include <set>
#include <sstream>

namespace psfr::cli {

namespace fs = std::filesystem;

namespace {

class Log {
 public:
  explicit Log(std::ostream& os) : os_(os) {}
  void line(const std::string& s) {
    std::lock_guard lock(mu_);
    os_ << s << '\n' << std::flush;
  }

 private:
  std::ostream& os_;
  std::mutex mu_;
};

int exit_code_for(const Error& e) { return e.code() == ErrorCode::InvalidConfig ? kExitUsage : kExitFailure; }

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

void emit(const std::optional<fs::path>& path, std::ostream& fallback, const std::string& text) {
  if (path) {
    write_text_file(*path, text);
  } else {
    fallback << text << std::flush;
  }
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::map<std::string, SignalTrack> load_tracks(const fs::path& cache_dir, const std::set<std::string>& ids) {
  std::map<std::string, SignalTrack> out;
  for (const auto& id : ids) {
    const auto path = cache_path_for(cache_dir, id);
    require(fs::exists(path), ErrorCode::MissingSignals, "no signal cache for video " + id);
    out.emplace(id, read_cache(path));
  }
  return out;
}

SelectorParams load_params(const std::optional<fs::path>& file) {
  return file ? read_params_file(*file) : SelectorParams{};
}

json signal_config_json(const SignalsOptions& opt) {
  const auto& c = opt.config;
  const auto& p = c.psfr;
  return {{"format", 1},
          {"resize", opt.resize ? json{opt.resize->width, opt.resize->height} : json(nullptr)},
          {"grid", {p.base_rows, p.base_cols, p.centroidal}},
          {"m", p.max_per_patch},
          {"C", p.max_corners},
          {"rho", p.dedup_radius},
          {"tau_r", p.retention_thresh},
          {"k_min", p.resolved_k_min()},
          {"quality", p.corner_quality},
          {"lk", {p.lk.win, p.lk.levels, p.lk.max_iters, p.lk.eps, p.lk.fb_thresh, p.lk.min_eig}},
          {"central", c.central_frac},
          {"canny", {c.canny_lo, c.canny_hi}}};
}

}  // namespace

std::string mean_pm_std(const std::vector<double>& xs, int precision) {
  double mean = 0.0, var = 0.0;
  for (double x : xs) mean += x;
  if (!xs.empty()) mean /= static_cast<double>(xs.size());
  for (double x : xs) var += (x - mean) * (x - mean);
  if (!xs.empty()) var /= static_cast<double>(xs.size());
  char buf[96];
  std::snprintf(buf, sizeof buf, "%.*f ± %.*f", precision, mean, precision, std::sqrt(var));
  return buf;
}

std::string video_id_for(const fs::path& video) {
  auto p = video;
  if (!p.has_filename()) p = p.parent_path();  // trailing slash
  return fs::is_regular_file(p) ? p.stem().string() : p.filename().string();
}

fs::path cache_path_for(const fs::path& cache_dir, const std::string& video_id) { return cache_dir / (video_id + ".psfc"); }

std::uint64_t content_hash(const fs::path& video, const SignalsOptions& opt) {
  std::uint64_t h = 0xCBF29CE484222325ull;
  const auto feed = [&](const char* data, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) h = (h ^ static_cast<unsigned char>(data[i])) * 0x100000001B3ull;
  };
  const auto cfg = signal_config_json(opt).dump();
  feed(cfg.data(), cfg.size());
  std::vector<fs::path> files;
  if (fs::is_regular_file(video)) {
    files.push_back(video);
  } else {
    for (const auto& e : fs::directory_iterator(video))
      if (e.is_regular_file()) files.push_back(e.path());
    std::sort(files.begin(), files.end());
  }
  std::vector<char> buf(1 << 16);
  for (const auto& f : files) {
    const auto name = f.filename().string();
    feed(name.data(), name.size() + 1);
    std::ifstream in(f, std::ios::binary);
    while (in) {
      in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
      feed(buf.data(), static_cast<std::size_t>(in.gcount()));
    }
  }
  return h;
}

int cmd_signals(const SignalsOptions& opt, std::ostream& log_os, SignalsSummary* summary) {
  Log log(log_os);
  try {
    opt.config.validate();
    if (opt.resize) opt.resize->validate();
  } catch (const Error& e) {
    log.line(std::string("error: ") + e.what());
    return kExitUsage;
  }
  std::set<std::string> seen;
  for (const auto& v : opt.videos) {
    if (!seen.insert(video_id_for(v)).second) {
      log.line("error: two inputs map to video id " + video_id_for(v));
      return kExitUsage;
    }
  }
  std::error_code ec;
  fs::create_directories(opt.cache_dir, ec);
  if (ec) {
    log.line("error: cannot create cache dir " + opt.cache_dir.string() + ": " + ec.message());
    return kExitFailure;
  }

  SignalsSummary sum;
  std::mutex sum_mu;
  parallel_for(opt.videos.size(), opt.threads, [&](std::size_t i) {
    const auto& video = opt.videos[i];
    const auto id = video_id_for(video);
    try {
      require(fs::exists(video), ErrorCode::IoError, "no such path: " + video.string());
      const auto cache = cache_path_for(opt.cache_dir, id);
      auto stamp = cache;
      stamp += ".hash";
      char hex[17];
      std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(content_hash(video, opt)));
      const bool log_ready = !opt.event_log_dir || fs::exists(*opt.event_log_dir / (id + ".events.jsonl"));
      if (!opt.force && log_ready && fs::exists(cache) && fs::exists(stamp)) {
        std::ifstream in(stamp);
        std::string old;
        in >> old;
        if (old == hex) {
          log.line(id + ": up to date");
          std::lock_guard lock(sum_mu);
          ++sum.skipped;
          return;
        }
      }
      const auto t0 = std::chrono::steady_clock::now();
      const auto src = open_frame_dir(video, opt.resize);
      std::string events;
      OutcomeHook hook;
      if (opt.event_log_dir)
        hook = [&](const PsfrFrameOutcome& o) {
          events += json{{"t", o.t}, {"L", o.low_retention}, {"event", o.is_event},
                         {"survivors", o.survivors.size()}, {"motion", o.motion_mag}}.dump() + "\n";
        };
      const auto track = extract_signals(src, opt.config, id, hook);
      write_cache(track, cache);
      if (opt.event_log_dir) {
        fs::create_directories(*opt.event_log_dir);
        write_text_file(*opt.event_log_dir / (id + ".events.jsonl"), events);
      }
      write_text_file(stamp, std::string(hex) + "\n");
      const double dt = seconds_since(t0);
      log.line(id + ": " + std::to_string(track.frames) + " frames in " + fmt("%.3f", dt) + " s (" +
               fmt("%.4f", dt / track.frames) + " s/frame)");
      std::lock_guard lock(sum_mu);
      ++sum.computed;
    } catch (const std::exception& e) {
      log.line("error: " + id + ": " + e.what());
      std::lock_guard lock(sum_mu);
      sum.failures.push_back(id + ": " + e.what());
    }
  });
  std::sort(sum.failures.begin(), sum.failures.end());
  log.line("signals: " + std::to_string(sum.computed) + " computed, " + std::to_string(sum.skipped) + " up to date, " +
           std::to_string(sum.failures.size()) + " failed");
  for (const auto& f : sum.failures) log.line("  failed " + f);
  if (summary) *summary = sum;
  return sum.failures.empty() ? kExitOk : kExitFailure;
}

int cmd_select(const SelectOptions& opt, std::ostream& out, std::ostream& log_os) {
  Log log(log_os);
  try {
    require(opt.K >= 1, ErrorCode::InvalidConfig, "--k must be >= 1");
    require(opt.t_max > 0, ErrorCode::InvalidConfig, "--t-max must be positive");
    const auto params = load_params(opt.params_file);
    const auto insts = read_annotations(opt.annotations);

    std::set<std::string> ids;
    std::vector<std::string> missing;
    for (const auto& inst : insts) {
      if (fs::exists(cache_path_for(opt.cache_dir, inst.video_id))) ids.insert(inst.video_id);
      else missing.push_back(inst.instance_id + " (video " + inst.video_id + ")");
    }
    if (!missing.empty()) {
      log.line("error: missing signal caches for " + std::to_string(missing.size()) + " instance(s):");
      for (const auto& m : missing) log.line("  " + m);
      return kExitFailure;
    }
    const auto tracks = load_tracks(opt.cache_dir, ids);

    std::vector<SelectionLine> lines(insts.size());
    parallel_for(insts.size(), opt.threads, [&](std::size_t i) {
      const auto& inst = insts[i];
      auto& line = lines[i];
      line.instance_id = inst.instance_id;
      try {
        const auto req = make_request(tracks.at(inst.video_id), inst.candidates, opt.K);
        const auto res = run_selector(opt.selector, req, params);
        line.selected = res.indices;
        line.elapsed_s = res.elapsed;
        line.valid = check_selection(res.indices, res.elapsed, req.candidates, opt.K, opt.t_max) == Violation::None;
      } catch (const Error& e) {
        line.valid = false;
        line.error = std::string(to_string(e.code())) + ": " + e.what();
        log.line("warning: " + inst.instance_id + ": " + *line.error);
      }
    });
    std::string text;
    for (const auto& l : lines) text += selection_to_json(l).dump() + "\n";
    emit(opt.out, out, text);
    return kExitOk;
  } catch (const Error& e) {
    log.line(std::string("error: ") + e.what());
    return exit_code_for(e);
  }
}

int cmd_eval(const EvalOptions& opt, std::ostream& out, std::ostream& log_os) {
  Log log(log_os);
  try {
    opt.config.penalty.validate();
    require(opt.config.K >= 1, ErrorCode::InvalidConfig, "--k must be >= 1");
    std::map<std::string, SelectionLine> sel;
    for (const auto& j : read_json_lines(opt.selections)) {
      auto line = selection_from_json(j);
      const auto id = line.instance_id;
      require(sel.emplace(id, std::move(line)).second, ErrorCode::AlignmentError, "duplicate selection for " + id);
    }
    const auto insts = read_annotations(opt.annotations);
    std::vector<InstanceResult> results;
    std::vector<std::string> unmatched;
    std::set<std::string> used;
    for (const auto& inst : insts) {
      const auto it = sel.find(inst.instance_id);
      if (it == sel.end()) {
        unmatched.push_back(inst.instance_id + " (no selection)");
        continue;
      }
      used.insert(inst.instance_id);
      results.push_back({it->second.selected, it->second.elapsed_s, it->second.error.has_value()});
    }
    for (const auto& [id, _] : sel)
      if (!used.count(id)) unmatched.push_back(id + " (no annotation)");
    if (!unmatched.empty()) {
      log.line("error: " + std::to_string(unmatched.size()) + " unmatched instance id(s):");
      for (const auto& u : unmatched) log.line("  " + u);
      return kExitFailure;
    }
    const auto rep = combined_objective(results, insts, opt.config);
    emit(opt.out, out, report_to_json(rep, opt.config).dump(2) + "\n");
    return kExitOk;
  } catch (const Error& e) {
    log.line(std::string("error: ") + e.what());
    return exit_code_for(e);
  }
}

int cmd_evolve(const EvolveOptions& opt, std::ostream& out, std::ostream& log_os) {
  Log log(log_os);
  try {
    opt.config.validate();
    const auto insts = read_annotations(opt.annotations);
    std::set<std::string> ids;
    for (const auto& inst : insts)
      if (inst.has_supervision()) ids.insert(inst.video_id);
    const auto tracks = load_tracks(opt.cache_dir, ids);
    const auto dataset = build_dataset(insts, tracks);
    require(!dataset.empty(), ErrorCode::InvalidArgument, "no supervised instances to evolve on");

    EvolveHooks hooks;
    hooks.checkpoint = opt.checkpoint;
    if (opt.resume) hooks.resume = state_from_checkpoint(read_json_file(*opt.resume));
    hooks.on_generation = [&](const EvolveState& st) {
      log.line("generation " + std::to_string(st.generation) + ": best J " + fmt("%.6f", st.history.back()) + ", " +
               std::to_string(st.evaluations) + " evaluations");
    };
    log.line("evolving on " + std::to_string(dataset.size()) + " instances");
    const auto rep = run_evolution(dataset, opt.config, hooks);
    emit(opt.out, out, evolve_report_to_json(rep, opt.config).dump(2) + "\n");
    return kExitOk;
  } catch (const Error& e) {
    log.line(std::string("error: ") + e.what());
    return exit_code_for(e);
  }
}

int cmd_bench(const BenchOptions& opt, std::ostream& out, std::ostream& log_os) {
  Log log(log_os);
  if (!opt.video && !opt.cache) {
    log.line("error: bench needs --video or --cache");
    return kExitUsage;
  }
  if (opt.reps < 1 || opt.K < 1) {
    log.line("error: --reps and --k must be >= 1");
    return kExitUsage;
  }
  try {
    const auto params = load_params(opt.params_file);
    std::optional<SignalTrack> track;
    if (opt.video) {
      const auto src = open_frame_dir(*opt.video, opt.resize);
      const auto first = src.load(0);
      std::vector<double> per_frame;
      for (int r = 0; r < opt.reps; ++r) {
        const auto t0 = std::chrono::steady_clock::now();
        auto t = extract_signals(src, SignalConfig{}, video_id_for(*opt.video));
        per_frame.push_back(seconds_since(t0) / t.frames);
        if (!track) track = std::move(t);
      }
      out << "extraction: " << mean_pm_std(per_frame) << " s/frame over " << opt.reps << " reps (T=" << track->frames
          << ", " << first.width() << "x" << first.height() << ")\n";
    }
    if (opt.cache) track = read_cache(*opt.cache);
    const auto req = make_request(*track, all_frames(track->frames), opt.K);
    std::vector<double> times;
    for (int r = 0; r < opt.reps; ++r) {
      const auto t0 = std::chrono::steady_clock::now();
      const auto res = run_selector(opt.selector, req, params);
      times.push_back(seconds_since(t0));
      require(validate_selection(res, req) == Violation::None, ErrorCode::InvalidArgument, "selector broke its contract");
    }
    out << "selection: " << mean_pm_std(times) << " s/video over " << opt.reps << " reps (T=" << track->frames
        << ", K=" << opt.K << ", " << (opt.selector == SelectorKind::Uniform ? "uniform" : "psfr") << ")\n";
    return kExitOk;
  } catch (const Error& e) {
    log.line(std::string("error: ") + e.what());
    return exit_code_for(e);
  }
}

int cmd_synth(const SynthOptions& opt, std::ostream& out, std::ostream& log_os) {
  Log log(log_os);
  CorpusSpec spec;
  try {
    spec = corpus_from_json(read_json_file(opt.spec), opt.seed);
  } catch (const Error& e) {
    log.line(std::string("error: invalid synth spec: ") + e.what());
    return kExitUsage;
  }
  try {
    write_corpus(spec, opt.out, opt.seed);
    int frames = 0;
    for (const auto& v : spec.videos) frames += v.frames();
    out << "synth: " << spec.videos.size() << " videos, " << frames << " frames at " << spec.width << "x"
        << spec.height << " -> " << opt.out.string() << "\n";
    return kExitOk;
  } catch (const std::exception& e) {
    log.line(std::string("error: ") + e.what());
    return kExitFailure;
  }
}

}  // namespace psfr::cli
