#include <cstdlib>
#include <iostream>

#include "CLI11.hpp"
#include "commands.hpp"

namespace fs = std::filesystem;
using namespace psfr;
using namespace psfr::cli;

namespace {

struct ResizeFlag {
  std::vector<int> dims;
  std::optional<ResizeSpec> get() const {
    if (dims.empty()) return std::nullopt;
    return ResizeSpec{dims[0], dims[1]};
  }
};

void add_resize(CLI::App* app, ResizeFlag& r) {
  app->add_option("--resize", r.dims, "Resize every frame to W H")->expected(2);
}

void add_threads(CLI::App* app, int& threads) {
  app->add_option("--threads", threads, "Worker threads")->envname("PSFR_THREADS")->check(CLI::PositiveNumber);
}

SelectorKind parse_selector(const std::string& s) { return s == "uniform" ? SelectorKind::Uniform : SelectorKind::Psfr; }

template <typename T>
std::optional<T> opt_if(const CLI::Option* o, const T& v) {
  return o->count() ? std::optional<T>(v) : std::nullopt;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Patch-level sparse feature retention keyframe pipeline"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Show help for every subcommand");

  int threads = 1;
  std::string selector = "psfr";
  std::string timing = "wallclock";
  std::string params_file, out_file;

  // signals
  SignalsOptions sig;
  ResizeFlag sig_resize;
  auto* signals = app.add_subcommand("signals", "Extract and cache per-frame signals for each video");
  signals->set_config("--config", "", "TOML config file (flags override it)");
  signals->add_option("videos", sig.videos, "Frame directories or .pgry archives")->required()->check(CLI::ExistingPath);
  signals->add_option("--cache-dir", sig.cache_dir, "Output directory for .psfc caches")->required();
  add_resize(signals, sig_resize);
  signals->add_flag("--force", sig.force, "Recompute even when the cache is up to date");
  std::string event_log;
  auto* sig_events = signals->add_option("--event-log", event_log, "Directory for per-frame event logs (JSONL)");
  signals->add_option("--k-min", sig.config.psfr.k_min, "Event threshold on low-retention patches (0 = auto)");
  signals->add_option("--tau-r", sig.config.psfr.retention_thresh, "Retention threshold");
  signals->add_option("--max-corners", sig.config.psfr.max_corners, "Global corner cap C");
  signals->add_option("--max-per-patch", sig.config.psfr.max_per_patch, "Per-patch corner cap m");
  add_threads(signals, threads);

  // select
  SelectOptions sel;
  auto* select = app.add_subcommand("select", "Select keyframes for every annotated instance");
  select->set_config("--config", "", "TOML config file (flags override it)");
  select->add_option("--cache-dir", sel.cache_dir, "Directory of .psfc caches")->required()->check(CLI::ExistingDirectory);
  select->add_option("--annotations", sel.annotations, "Annotation JSONL")->required()->check(CLI::ExistingFile);
  select->add_option("--k", sel.K, "Keyframe budget")->check(CLI::PositiveNumber);
  select->add_option("--selector", selector, "Selector")->check(CLI::IsMember({"uniform", "psfr"}));
  auto* sel_params = select->add_option("--params", params_file, "Selector params JSON")->check(CLI::ExistingFile);
  auto* sel_out = select->add_option("--out", out_file, "Output JSONL (default stdout)");
  select->add_option("--t-max", sel.t_max, "Per-instance time budget, seconds");
  add_threads(select, threads);

  // eval
  EvalOptions ev;
  auto* eval = app.add_subcommand("eval", "Score selections against annotations");
  eval->set_config("--config", "", "TOML config file (flags override it)");
  eval->add_option("selections", ev.selections, "Selections JSONL from `select`")->required()->check(CLI::ExistingFile);
  eval->add_option("--annotations", ev.annotations, "Annotation JSONL")->required()->check(CLI::ExistingFile);
  eval->add_option("--alpha", ev.config.penalty.alpha, "Time factor at the budget");
  eval->add_option("--gamma", ev.config.penalty.gamma, "Time factor curvature");
  eval->add_option("--t-max", ev.config.penalty.t_max, "Per-instance time budget, seconds");
  eval->add_option("--k", ev.config.K, "Keyframe budget")->check(CLI::PositiveNumber);
  auto* ev_out = eval->add_option("--out", out_file, "Output JSON (default stdout)");

  // evolve
  EvolveOptions evo;
  std::string checkpoint, resume;
  auto* evolve = app.add_subcommand("evolve", "Evolve selector parameters against the objective J");
  evolve->set_config("--config", "", "TOML config file (flags override it)");
  evolve->add_option("--cache-dir", evo.cache_dir, "Directory of .psfc caches")->required()->check(CLI::ExistingDirectory);
  evolve->add_option("--annotations", evo.annotations, "Annotation JSONL")->required()->check(CLI::ExistingFile);
  evolve->add_option("--islands", evo.config.islands, "Island count");
  evolve->add_option("--pop", evo.config.pop_per_island, "Genomes per island");
  evolve->add_option("--generations", evo.config.generations, "Generations");
  evolve->add_option("--sigma", evo.config.mutation_sigma, "Mutation scale as a fraction of each gene's range");
  evolve->add_option("--migration-interval", evo.config.migration_interval, "Generations between migrations");
  evolve->add_option("--archive", evo.config.archive_size, "Archive size");
  evolve->add_option("--seed", evo.config.seed, "RNG seed");
  evolve->add_option("--timing", timing, "Timing mode")->check(CLI::IsMember({"wallclock", "zero"}));
  evolve->add_option("--k", evo.config.K, "Keyframe budget")->check(CLI::PositiveNumber);
  evolve->add_option("--t-max", evo.config.penalty.t_max, "Per-instance time budget, seconds");
  evolve->add_option("--alpha", evo.config.penalty.alpha, "Time factor at the budget");
  evolve->add_option("--gamma", evo.config.penalty.gamma, "Time factor curvature");
  auto* evo_ckpt = evolve->add_option("--checkpoint", checkpoint, "Checkpoint written every generation");
  auto* evo_resume = evolve->add_option("--resume", resume, "Resume from a checkpoint")->check(CLI::ExistingFile);
  auto* evo_out = evolve->add_option("--out", out_file, "Report JSON (default stdout)");
  add_threads(evolve, threads);

  // bench
  BenchOptions bench_opt;
  ResizeFlag bench_resize;
  std::string bench_video, bench_cache;
  auto* bench = app.add_subcommand("bench", "Time signal extraction and selection");
  bench->set_config("--config", "", "TOML config file (flags override it)");
  auto* b_video = bench->add_option("--video", bench_video, "Frame directory or .pgry archive")->check(CLI::ExistingPath);
  auto* b_cache = bench->add_option("--cache", bench_cache, "A .psfc cache")->check(CLI::ExistingFile);
  add_resize(bench, bench_resize);
  bench->add_option("--reps", bench_opt.reps, "Repetitions")->check(CLI::PositiveNumber);
  bench->add_option("--k", bench_opt.K, "Keyframe budget")->check(CLI::PositiveNumber);
  bench->add_option("--selector", selector, "Selector")->check(CLI::IsMember({"uniform", "psfr"}));
  auto* b_params = bench->add_option("--params", params_file, "Selector params JSON")->check(CLI::ExistingFile);

  // synth
  SynthOptions syn;
  auto* synth = app.add_subcommand("synth", "Generate a synthetic corpus with known cuts and evidence");
  synth->add_option("--spec", syn.spec, "Corpus spec JSON")->required()->check(CLI::ExistingFile);
  synth->add_option("--out", syn.out, "Output directory")->required();
  synth->add_option("--seed", syn.seed, "RNG seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitOk : kExitUsage;
  }

  if (*signals) {
    sig.resize = sig_resize.get();
    sig.threads = threads;
    sig.event_log_dir = opt_if<fs::path>(sig_events, event_log);
    return cmd_signals(sig, std::cerr);
  }
  if (*select) {
    sel.selector = parse_selector(selector);
    sel.params_file = opt_if<fs::path>(sel_params, params_file);
    sel.out = opt_if<fs::path>(sel_out, out_file);
    sel.threads = threads;
    return cmd_select(sel, std::cout, std::cerr);
  }
  if (*eval) {
    ev.out = opt_if<fs::path>(ev_out, out_file);
    return cmd_eval(ev, std::cout, std::cerr);
  }
  if (*evolve) {
    evo.config.timing = timing == "zero" ? TimingMode::DeterministicZero : TimingMode::Wallclock;
    evo.config.threads = threads;
    evo.checkpoint = opt_if<fs::path>(evo_ckpt, checkpoint);
    evo.resume = opt_if<fs::path>(evo_resume, resume);
    evo.out = opt_if<fs::path>(evo_out, out_file);
    return cmd_evolve(evo, std::cout, std::cerr);
  }
  if (*bench) {
    bench_opt.video = opt_if<fs::path>(b_video, bench_video);
    bench_opt.cache = opt_if<fs::path>(b_cache, bench_cache);
    bench_opt.resize = bench_resize.get();
    bench_opt.selector = parse_selector(selector);
    bench_opt.params_file = opt_if<fs::path>(b_params, params_file);
    return cmd_bench(bench_opt, std::cout, std::cerr);
  }
  if (*synth) return cmd_synth(syn, std::cout, std::cerr);
  return kExitUsage;
}
