#pragma once

// Subcommand implementations behind the psfr CLI. Each returns a process exit
// code: 0 success, 1 data or processing failure, 2 usage error.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "psfr/psfr.hpp"

namespace psfr::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

struct SignalsOptions {
  std::vector<std::filesystem::path> videos;
  std::filesystem::path cache_dir;
  std::optional<ResizeSpec> resize;
  SignalConfig config{};
  int threads = 1;
  bool force = false;
  // When set, <dir>/<id>.events.jsonl gets one line per frame:
  // {"t", "L", "event", "survivors", "motion"}.
  std::optional<std::filesystem::path> event_log_dir;
};

struct SignalsSummary {
  int computed = 0;
  int skipped = 0;
  std::vector<std::string> failures;
};

// Cache path for a video: <cache_dir>/<id>.psfc, id = directory or file stem.
std::string video_id_for(const std::filesystem::path& video);
std::filesystem::path cache_path_for(const std::filesystem::path& cache_dir, const std::string& video_id);

// Hash of every frame file's name and bytes plus the extraction settings.
std::uint64_t content_hash(const std::filesystem::path& video, const SignalsOptions& opt);

int cmd_signals(const SignalsOptions& opt, std::ostream& log, SignalsSummary* summary = nullptr);

struct SelectOptions {
  std::filesystem::path cache_dir;
  std::filesystem::path annotations;
  int K = 16;
  SelectorKind selector = SelectorKind::Psfr;
  std::optional<std::filesystem::path> params_file;
  std::optional<std::filesystem::path> out;  // stdout when empty
  double t_max = kDefaultTimeBudget;
  int threads = 1;
};

int cmd_select(const SelectOptions& opt, std::ostream& out, std::ostream& log);

struct EvalOptions {
  std::filesystem::path selections;
  std::filesystem::path annotations;
  EvalConfig config{};
  std::optional<std::filesystem::path> out;
};

int cmd_eval(const EvalOptions& opt, std::ostream& out, std::ostream& log);

struct EvolveOptions {
  std::filesystem::path cache_dir;
  std::filesystem::path annotations;
  EvolveConfig config{};
  std::optional<std::filesystem::path> out;
  std::optional<std::filesystem::path> checkpoint;
  std::optional<std::filesystem::path> resume;
};

int cmd_evolve(const EvolveOptions& opt, std::ostream& out, std::ostream& log);

struct BenchOptions {
  std::optional<std::filesystem::path> video;
  std::optional<std::filesystem::path> cache;
  std::optional<ResizeSpec> resize;
  int reps = 5;
  int K = 16;
  SelectorKind selector = SelectorKind::Psfr;
  std::optional<std::filesystem::path> params_file;
};

int cmd_bench(const BenchOptions& opt, std::ostream& out, std::ostream& log);

struct SynthOptions {
  std::filesystem::path spec;
  std::filesystem::path out;
  std::uint64_t seed = 0;
};

int cmd_synth(const SynthOptions& opt, std::ostream& out, std::ostream& log);

// "mean ± std" with population std.
std::string mean_pm_std(const std::vector<double>& xs, int precision = 4);

}  // namespace psfr::cli
