#pragma once

// Island-model evolutionary search over SelectorParams genomes, scored by the
// combined objective J.

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "psfr/error.hpp"
#include "psfr/eval_metrics.hpp"
#include "psfr/frame_signals.hpp"
#include "psfr/json_io.hpp"
#include "psfr/keyframe_selector.hpp"
#include "psfr/parallel.hpp"

namespace psfr {

enum class GeneKind { Real, Integer, Flag };

struct GeneSpec {
  const char* name;
  double lo;
  double hi;
  GeneKind kind;
};

inline constexpr std::array<GeneSpec, 12> kGenes{{
    {"w_corners", -1, 1, GeneKind::Real},
    {"w_central", -1, 1, GeneKind::Real},
    {"w_edges", -1, 1, GeneKind::Real},
    {"w_entropy", -1, 1, GeneKind::Real},
    {"w_low_retention", -1, 1, GeneKind::Real},
    {"w_motion", -1, 1, GeneKind::Real},
    {"w_change", 0, 2, GeneKind::Real},
    {"lambda", 0, 2, GeneKind::Real},
    {"nms_gap", 0, 30, GeneKind::Integer},
    {"slot_uniform_time", 0, 1, GeneKind::Flag},
    {"peak_align", 0, 1, GeneKind::Flag},
    {"use_motion", 0, 1, GeneKind::Flag},
}};
inline constexpr std::size_t kGeneCount = kGenes.size();

struct Genome {
  std::vector<double> genes;
  long long id = 0;
  long long parent_id = -1;
};

inline void validate_genes(const std::vector<double>& genes) {
  require(genes.size() == kGeneCount, ErrorCode::InvalidGenome,
          "genome needs " + std::to_string(kGeneCount) + " genes, got " + std::to_string(genes.size()));
  for (std::size_t i = 0; i < kGeneCount; ++i) {
    const auto& spec = kGenes[i];
    const double v = genes[i];
    require(std::isfinite(v) && v >= spec.lo && v <= spec.hi, ErrorCode::InvalidGenome,
            std::string("gene ") + spec.name + " out of bounds");
    if (spec.kind == GeneKind::Integer)
      require(v == std::round(v), ErrorCode::InvalidGenome, std::string("gene ") + spec.name + " is not an integer");
    if (spec.kind == GeneKind::Flag)
      require(v == 0.0 || v == 1.0, ErrorCode::InvalidGenome, std::string("flag gene ") + spec.name + " is not 0 or 1");
  }
}

inline SelectorParams genome_to_params(const Genome& g) {
  validate_genes(g.genes);
  const auto& x = g.genes;
  SelectorParams p;
  for (int k = 0; k < kSignalDim; ++k) p.w[k] = x[k];
  p.w_motion = x[5];
  p.w_change = x[6];
  p.lambda_div = x[7];
  p.nms_gap = static_cast<int>(x[8]);
  p.slot_mode = x[9] != 0.0 ? SlotMode::UniformTime : SlotMode::CumulativeChange;
  p.peak_align = x[10] != 0.0;
  p.use_motion = x[11] != 0.0;
  return p;
}

inline Genome params_to_genome(const SelectorParams& p, long long id = 0) {
  Genome g;
  g.id = id;
  g.genes.assign(p.w.begin(), p.w.end());
  g.genes.push_back(p.w_motion);
  g.genes.push_back(p.w_change);
  g.genes.push_back(p.lambda_div);
  g.genes.push_back(p.nms_gap);
  g.genes.push_back(p.slot_mode == SlotMode::UniformTime ? 1.0 : 0.0);
  g.genes.push_back(p.peak_align ? 1.0 : 0.0);
  g.genes.push_back(p.use_motion ? 1.0 : 0.0);
  validate_genes(g.genes);
  return g;
}

// Real genes get N(0, sigma * range) noise, integer genes the same noise
// rounded; both are clamped. Flags flip with probability flip_prob.
inline Genome mutate(const Genome& parent, double sigma, std::mt19937_64& rng, double flip_prob = 0.05) {
  validate_genes(parent.genes);
  Genome child = parent;
  child.parent_id = parent.id;
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (std::size_t i = 0; i < kGeneCount; ++i) {
    const auto& spec = kGenes[i];
    double& v = child.genes[i];
    if (spec.kind == GeneKind::Flag) {
      if (unit(rng) < flip_prob) v = 1.0 - v;
      continue;
    }
    const double step = normal(rng) * sigma * (spec.hi - spec.lo);
    v = std::clamp(v + step, spec.lo, spec.hi);
    if (spec.kind == GeneKind::Integer) v = std::clamp(std::round(v), spec.lo, spec.hi);
  }
  return child;
}

inline Genome random_genome(std::mt19937_64& rng) {
  Genome g;
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (const auto& spec : kGenes) {
    const double u = unit(rng);
    switch (spec.kind) {
      case GeneKind::Real: g.genes.push_back(spec.lo + u * (spec.hi - spec.lo)); break;
      case GeneKind::Integer:
        g.genes.push_back(std::min(spec.hi, std::floor(spec.lo + u * (spec.hi - spec.lo + 1))));
        break;
      case GeneKind::Flag: g.genes.push_back(u < 0.5 ? 0.0 : 1.0); break;
    }
  }
  return g;
}

// ---------------------------------------------------------------------------

enum class TimingMode { Wallclock, DeterministicZero };

struct DatasetItem {
  const SignalTrack* signals = nullptr;
  EvidenceInstance instance;
};

// Pairs each supervised instance with its video's signals.
inline std::vector<DatasetItem> build_dataset(const std::vector<EvidenceInstance>& insts,
                                              const std::map<std::string, SignalTrack>& tracks) {
  std::vector<DatasetItem> out;
  for (const auto& inst : insts) {
    if (!inst.has_supervision()) continue;
    const auto it = tracks.find(inst.video_id);
    require(it != tracks.end(), ErrorCode::MissingSignals, "no signals for video " + inst.video_id);
    out.push_back({&it->second, inst});
  }
  return out;
}

struct EvolveConfig {
  int islands = 4;
  int pop_per_island = 16;
  int generations = 50;
  double mutation_sigma = 0.1;
  int migration_interval = 5;
  int archive_size = 10;
  std::uint64_t seed = 0;
  double flip_prob = 0.05;
  TimePenalty penalty{};
  int K = 16;
  TimingMode timing = TimingMode::Wallclock;
  int threads = 1;

  void validate() const {
    require(islands >= 1, ErrorCode::InvalidConfig, "islands must be >= 1");
    require(pop_per_island >= 2, ErrorCode::InvalidConfig, "population per island must be >= 2");
    require(archive_size >= 1, ErrorCode::InvalidConfig, "archive size must be >= 1");
    require(generations >= 0, ErrorCode::InvalidConfig, "generations must be >= 0");
    require(migration_interval >= 1, ErrorCode::InvalidConfig, "migration interval must be >= 1");
    require(mutation_sigma >= 0.0, ErrorCode::InvalidConfig, "mutation sigma must be >= 0");
    require(flip_prob >= 0.0 && flip_prob <= 1.0, ErrorCode::InvalidConfig, "flip probability must lie in [0, 1]");
    require(K >= 1, ErrorCode::InvalidConfig, "K must be >= 1");
    penalty.validate();
  }

  EvalConfig eval() const { return {penalty, K}; }
};

inline MetricReport evaluate_genome_report(const Genome& g, const std::vector<DatasetItem>& dataset,
                                           const EvolveConfig& cfg) {
  const auto params = genome_to_params(g);
  std::vector<InstanceResult> results;
  std::vector<EvidenceInstance> insts;
  results.reserve(dataset.size());
  insts.reserve(dataset.size());
  for (const auto& item : dataset) {
    require(item.signals != nullptr, ErrorCode::MissingSignals, "no signals for video " + item.instance.video_id);
    InstanceResult r;
    try {
      const auto req = make_request(*item.signals, item.instance.candidates, cfg.K);
      auto sel = psfr_select(req, params);
      r.selected = std::move(sel.indices);
      r.elapsed = cfg.timing == TimingMode::DeterministicZero ? 0.0 : sel.elapsed;
    } catch (const Error&) {
      r.failed = true;
    }
    results.push_back(std::move(r));
    insts.push_back(item.instance);
  }
  return combined_objective(results, insts, cfg.eval());
}

inline double evaluate_genome(const Genome& g, const std::vector<DatasetItem>& dataset, const EvolveConfig& cfg) {
  return evaluate_genome_report(g, dataset, cfg).J;
}

// ---------------------------------------------------------------------------

struct Individual {
  Genome genome;
  double J = 0.0;
};

struct EvolveState {
  int generation = 0;  // last completed generation
  std::vector<std::vector<Individual>> islands;
  std::vector<Individual> archive;
  std::vector<double> history;
  long long evaluations = 0;
  long long next_id = 0;
};

struct EvolveReport {
  Genome best;
  double best_J = 0.0;
  std::vector<double> history;
  long long evaluations = 0;
  double elapsed = 0.0;
  std::vector<Individual> archive;
  EvolveState state;
};

namespace detail {

// Higher J first; ties go to the older genome.
inline bool fitter(const Individual& a, const Individual& b) {
  if (a.J != b.J) return a.J > b.J;
  return a.genome.id < b.genome.id;
}

inline std::mt19937_64 island_rng(std::uint64_t seed, int island, int generation) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(island), static_cast<std::uint32_t>(generation)};
  return std::mt19937_64(seq);
}

inline void update_archive(std::vector<Individual>& archive, const std::vector<Individual>& fresh, int cap) {
  for (const auto& ind : fresh) {
    const auto same = std::find_if(archive.begin(), archive.end(),
                                   [&](const Individual& a) { return a.genome.genes == ind.genome.genes; });
    if (same == archive.end()) {
      archive.push_back(ind);
    } else if (fitter(ind, *same)) {
      *same = ind;
    }
  }
  std::stable_sort(archive.begin(), archive.end(), fitter);
  if (static_cast<int>(archive.size()) > cap) archive.resize(cap);
}

inline void evaluate_batch(std::vector<Individual*>& batch, const std::vector<DatasetItem>& dataset,
                           const EvolveConfig& cfg, EvolveState& st) {
  parallel_for(batch.size(), cfg.threads, [&](std::size_t i) { batch[i]->J = evaluate_genome(batch[i]->genome, dataset, cfg); });
  st.evaluations += static_cast<long long>(batch.size());
}

inline json individual_to_json(const Individual& ind) {
  return {{"id", ind.genome.id}, {"parent_id", ind.genome.parent_id}, {"genes", ind.genome.genes}, {"J", ind.J}};
}

inline Individual individual_from_json(const json& j) {
  Individual ind;
  ind.genome.id = j.at("id").get<long long>();
  ind.genome.parent_id = j.at("parent_id").get<long long>();
  ind.genome.genes = j.at("genes").get<std::vector<double>>();
  ind.J = j.at("J").get<double>();
  validate_genes(ind.genome.genes);
  return ind;
}

}  // namespace detail

inline json evolve_config_to_json(const EvolveConfig& c) {
  return {{"islands", c.islands},
          {"pop_per_island", c.pop_per_island},
          {"generations", c.generations},
          {"mutation_sigma", c.mutation_sigma},
          {"migration_interval", c.migration_interval},
          {"archive_size", c.archive_size},
          {"seed", c.seed},
          {"flip_prob", c.flip_prob},
          {"t_max", c.penalty.t_max},
          {"alpha", c.penalty.alpha},
          {"gamma", c.penalty.gamma},
          {"k", c.K},
          {"timing", c.timing == TimingMode::DeterministicZero ? "zero" : "wallclock"}};
}

// {"best_params", "best_J", "history", "evaluations", "config"}; with
// `with_state` the populations and archive are added for resuming.
inline json evolve_report_to_json(const EvolveReport& rep, const EvolveConfig& cfg, bool with_state = false) {
  json j{{"best_params", params_to_json(genome_to_params(rep.best))},
         {"best_J", rep.best_J},
         {"history", rep.history},
         {"evaluations", rep.evaluations},
         {"elapsed_s", rep.elapsed},
         {"config", evolve_config_to_json(cfg)}};
  json archive = json::array();
  for (const auto& a : rep.archive) archive.push_back(detail::individual_to_json(a));
  j["archive"] = std::move(archive);
  if (with_state) {
    json islands = json::array();
    for (const auto& isl : rep.state.islands) {
      json pop = json::array();
      for (const auto& ind : isl) pop.push_back(detail::individual_to_json(ind));
      islands.push_back(std::move(pop));
    }
    j["state"] = {{"generation", rep.state.generation}, {"islands", std::move(islands)}, {"next_id", rep.state.next_id}};
  }
  return j;
}

inline EvolveState state_from_checkpoint(const json& j) {
  try {
    EvolveState st;
    const auto& s = j.at("state");
    st.generation = s.at("generation").get<int>();
    st.next_id = s.at("next_id").get<long long>();
    for (const auto& isl : s.at("islands")) {
      std::vector<Individual> pop;
      for (const auto& ind : isl) pop.push_back(detail::individual_from_json(ind));
      st.islands.push_back(std::move(pop));
    }
    for (const auto& a : j.at("archive")) st.archive.push_back(detail::individual_from_json(a));
    st.history = j.at("history").get<std::vector<double>>();
    st.evaluations = j.at("evaluations").get<long long>();
    return st;
  } catch (const json::exception& e) {
    fail(ErrorCode::InvalidArgument, std::string("malformed checkpoint: ") + e.what());
  }
}

struct EvolveHooks {
  std::function<void(const EvolveState&)> on_generation;  // after each generation
  std::optional<std::filesystem::path> checkpoint;
  std::optional<EvolveState> resume;
};

inline EvolveReport run_evolution(const std::vector<DatasetItem>& dataset, const EvolveConfig& cfg,
                                  EvolveHooks hooks = {}) {
  cfg.validate();
  require(!dataset.empty(), ErrorCode::InvalidArgument, "evolution needs a non-empty dataset");
  const auto wall0 = std::chrono::steady_clock::now();

  EvolveState st;
  const auto finish_generation = [&](EvolveReport* rep) {
    st.history.push_back(st.archive.front().J);
    if (hooks.on_generation) hooks.on_generation(st);
    if (hooks.checkpoint && rep) {
      rep->best = st.archive.front().genome;
      rep->best_J = st.archive.front().J;
      rep->history = st.history;
      rep->evaluations = st.evaluations;
      rep->archive = st.archive;
      rep->state = st;
      write_text_file(*hooks.checkpoint, evolve_report_to_json(*rep, cfg, true).dump(1));
    }
  };

  EvolveReport rep;
  if (hooks.resume) {
    st = std::move(*hooks.resume);
    require(static_cast<int>(st.islands.size()) == cfg.islands && !st.archive.empty() &&
                static_cast<int>(st.history.size()) == st.generation + 1,
            ErrorCode::InvalidConfig, "checkpoint does not match the evolution config");
    for (const auto& isl : st.islands)
      require(static_cast<int>(isl.size()) == cfg.pop_per_island, ErrorCode::InvalidConfig,
              "checkpoint population size does not match the config");
  } else {
    st.islands.resize(cfg.islands);
    std::vector<Individual*> batch;
    for (int i = 0; i < cfg.islands; ++i) {
      auto rng = detail::island_rng(cfg.seed, i, 0);
      auto& pop = st.islands[i];
      pop.push_back({params_to_genome(SelectorParams::uniform_equivalent(), st.next_id++), 0.0});
      while (static_cast<int>(pop.size()) < cfg.pop_per_island) {
        Genome g = random_genome(rng);
        g.id = st.next_id++;
        pop.push_back({std::move(g), 0.0});
      }
    }
    for (auto& pop : st.islands)
      for (auto& ind : pop) batch.push_back(&ind);
    detail::evaluate_batch(batch, dataset, cfg, st);
    for (auto& pop : st.islands) {
      std::stable_sort(pop.begin(), pop.end(), detail::fitter);
      detail::update_archive(st.archive, pop, cfg.archive_size);
    }
    st.generation = 0;
    finish_generation(&rep);
  }

  for (int gen = st.generation + 1; gen <= cfg.generations; ++gen) {
    std::vector<std::vector<Individual>> children(cfg.islands);
    for (int i = 0; i < cfg.islands; ++i) {
      auto rng = detail::island_rng(cfg.seed, i, gen);
      const auto& pop = st.islands[i];
      std::uniform_int_distribution<int> pick(0, static_cast<int>(pop.size()) - 1);
      for (int c = 0; c < cfg.pop_per_island; ++c) {
        const auto& a = pop[pick(rng)];
        const auto& b = pop[pick(rng)];
        const auto& parent = detail::fitter(a, b) ? a : b;
        Genome child = mutate(parent.genome, cfg.mutation_sigma, rng, cfg.flip_prob);
        children[i].push_back({std::move(child), 0.0});
      }
    }
    // Ids are assigned in island order so they do not depend on scheduling.
    for (auto& kids : children)
      for (auto& k : kids) k.genome.id = st.next_id++;
    std::vector<Individual*> batch;
    for (auto& kids : children)
      for (auto& k : kids) batch.push_back(&k);
    detail::evaluate_batch(batch, dataset, cfg, st);

    // (mu + lambda) truncation keeps the island's best, so elitism holds.
    for (int i = 0; i < cfg.islands; ++i) {
      auto& pop = st.islands[i];
      detail::update_archive(st.archive, children[i], cfg.archive_size);
      pop.insert(pop.end(), children[i].begin(), children[i].end());
      std::stable_sort(pop.begin(), pop.end(), detail::fitter);
      pop.resize(cfg.pop_per_island);
    }
    if (cfg.islands > 1 && gen % cfg.migration_interval == 0) {
      std::vector<Individual> emigrants;
      for (const auto& pop : st.islands) emigrants.push_back(pop.front());
      for (int i = 0; i < cfg.islands; ++i) {
        auto& dest = st.islands[(i + 1) % cfg.islands];
        const auto& m = emigrants[i];
        const bool present = std::any_of(dest.begin(), dest.end(),
                                         [&](const Individual& x) { return x.genome.genes == m.genome.genes; });
        if (present) continue;
        dest.back() = m;
        std::stable_sort(dest.begin(), dest.end(), detail::fitter);
      }
    }
    st.generation = gen;
    finish_generation(&rep);
  }

  rep.best = st.archive.front().genome;
  rep.best_J = st.archive.front().J;
  rep.history = st.history;
  rep.evaluations = st.evaluations;
  rep.archive = st.archive;
  rep.elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - wall0).count();
  rep.state = std::move(st);
  return rep;
}

}  // namespace psfr
