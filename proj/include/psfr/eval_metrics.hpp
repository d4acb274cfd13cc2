#pragma once

// Oracle metrics against frame-level evidence annotations, the runtime
// penalty, and the combined objective J = mean(Incl * phi(t)).

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "psfr/error.hpp"
#include "psfr/keyframe_selector.hpp"

namespace psfr {

struct EvidenceInstance {
  std::string instance_id;
  std::string video_id;
  std::vector<int> candidates;               // A_q, sorted
  std::vector<std::vector<int>> evidence_sets;  // G_{q,m}, each sorted and non-empty
  std::optional<std::map<int, double>> weights;

  bool has_supervision() const { return !evidence_sets.empty(); }
};

namespace detail {

inline std::vector<int> as_set(std::span<const int> xs) {
  std::vector<int> s(xs.begin(), xs.end());
  std::sort(s.begin(), s.end());
  s.erase(std::unique(s.begin(), s.end()), s.end());
  return s;
}

inline long long overlap(std::span<const int> a, std::span<const int> b) {
  long long n = 0;
  std::size_t i = 0, j = 0;
  while (i < a.size() && j < b.size()) {
    if (a[i] < b[j]) ++i;
    else if (b[j] < a[i]) ++j;
    else {
      ++n;
      ++i;
      ++j;
    }
  }
  return n;
}

}  // namespace detail

// Sorts and deduplicates every index list; drops empty evidence sets.
inline void canonicalize(EvidenceInstance& inst) {
  inst.candidates = detail::as_set(inst.candidates);
  std::vector<std::vector<int>> sets;
  for (auto& g : inst.evidence_sets) {
    auto s = detail::as_set(g);
    if (!s.empty()) sets.push_back(std::move(s));
  }
  inst.evidence_sets = std::move(sets);
}

// 1 iff every evidence set is hit at least once.
inline double inclusion(std::span<const int> selected, const EvidenceInstance& inst) {
  const auto S = detail::as_set(selected);
  if (S.empty() || inst.evidence_sets.empty()) return 0.0;
  for (const auto& g : inst.evidence_sets)
    if (detail::overlap(S, g) == 0) return 0.0;
  return 1.0;
}

// Worst-case precision: min over m of |S n G_m| / |S|.
inline double intersection(std::span<const int> selected, const EvidenceInstance& inst) {
  const auto S = detail::as_set(selected);
  if (S.empty() || inst.evidence_sets.empty()) return 0.0;
  double worst = 1.0;
  for (const auto& g : inst.evidence_sets)
    worst = std::min(worst, static_cast<double>(detail::overlap(S, g)) / static_cast<double>(S.size()));
  return worst;
}

// F_beta with beta^2 = 2, min over evidence sets. 3PR/(2P+R) reduces to
// 3|S n G| / (2|G| + |S|), evaluated with a single division.
inline double f_sqrt2(std::span<const int> selected, const EvidenceInstance& inst) {
  const auto S = detail::as_set(selected);
  if (S.empty() || inst.evidence_sets.empty()) return 0.0;
  double worst = 1.0;
  for (const auto& g : inst.evidence_sets) {
    const long long hit = detail::overlap(S, g);
    const double f = hit == 0 ? 0.0
                              : static_cast<double>(3 * hit) /
                                    static_cast<double>(2 * static_cast<long long>(g.size()) +
                                                        static_cast<long long>(S.size()));
    worst = std::min(worst, f);
  }
  return worst;
}

// Recall of relevance mass, min over evidence sets; uniform weights when the
// instance has none. Sums run in ascending frame order.
inline double weighted_intersection(std::span<const int> selected, const EvidenceInstance& inst) {
  const auto S = detail::as_set(selected);
  if (S.empty() || inst.evidence_sets.empty()) return 0.0;
  const auto weight = [&](int t) {
    if (!inst.weights) return 1.0;
    const auto it = inst.weights->find(t);
    require(it != inst.weights->end(), ErrorCode::MissingWeight,
            "instance " + inst.instance_id + " has no weight for frame " + std::to_string(t));
    return it->second;
  };
  double worst = 1.0;
  for (const auto& g : inst.evidence_sets) {
    double hit = 0.0, total = 0.0;
    for (int t : g) {
      const double wt = weight(t);
      total += wt;
      if (std::binary_search(S.begin(), S.end(), t)) hit += wt;
    }
    worst = std::min(worst, total > 0.0 ? hit / total : 0.0);
  }
  return worst;
}

struct TimePenalty {
  double t_max = 15.0;
  double alpha = 0.95;
  double gamma = 1.0;

  void validate() const {
    require(alpha > 0.0 && alpha <= 1.0, ErrorCode::InvalidConfig, "alpha must lie in (0, 1]");
    require(gamma > 0.0, ErrorCode::InvalidConfig, "gamma must be positive");
    require(t_max > 0.0, ErrorCode::InvalidConfig, "T_max must be positive");
  }
};

// exp(log(alpha) * clip(t / T_max, 0, 1)^gamma). The endpoints are returned
// exactly (1 and alpha).
inline double time_factor(double t, double t_max = 15.0, double alpha = 0.95, double gamma = 1.0) {
  TimePenalty{t_max, alpha, gamma}.validate();
  const double x = std::clamp(t / t_max, 0.0, 1.0);
  if (x <= 0.0) return 1.0;
  if (x >= 1.0) return alpha;
  return std::exp(std::log(alpha) * std::pow(x, gamma));
}

struct EvalConfig {
  TimePenalty penalty{};
  int K = 16;
};

// What a selector returned for one instance. `failed` marks a selector
// error (exception, timeout kill) and always scores zero.
struct InstanceResult {
  std::vector<int> selected;
  double elapsed = 0.0;
  bool failed = false;
};

struct MetricRow {
  std::string instance_id;
  double inclusion = 0.0;
  double intersection = 0.0;
  double f_sqrt2 = 0.0;
  double w_intersection = 0.0;
  double time_factor = 0.0;
  double contribution = 0.0;
  Violation violation = Violation::None;
  bool failed = false;

  bool valid() const { return !failed && violation == Violation::None; }
};

struct MetricReport {
  std::vector<MetricRow> rows;
  double J = 0.0;
  double incl = 0.0;
  double inter = 0.0;
  double f_sqrt2 = 0.0;
  double w_inter = 0.0;
  int n = 0;
  int invalid = 0;
  int dropped = 0;
};

// Instances without evidence sets are dropped together with their results.
inline MetricReport combined_objective(std::span<const InstanceResult> results,
                                       std::span<const EvidenceInstance> insts, const EvalConfig& cfg = {}) {
  cfg.penalty.validate();
  require(results.size() == insts.size(), ErrorCode::AlignmentError,
          std::to_string(results.size()) + " results for " + std::to_string(insts.size()) + " instances");
  MetricReport rep;
  double sum_j = 0.0, sum_incl = 0.0, sum_inter = 0.0, sum_f = 0.0, sum_w = 0.0;
  for (std::size_t i = 0; i < insts.size(); ++i) {
    const auto& inst = insts[i];
    if (!inst.has_supervision()) {
      ++rep.dropped;
      continue;
    }
    const auto& r = results[i];
    MetricRow row;
    row.instance_id = inst.instance_id;
    row.failed = r.failed;
    if (!r.failed)
      row.violation = check_selection(r.selected, r.elapsed, inst.candidates, cfg.K, cfg.penalty.t_max);
    if (row.valid()) {
      row.inclusion = inclusion(r.selected, inst);
      row.intersection = intersection(r.selected, inst);
      row.f_sqrt2 = f_sqrt2(r.selected, inst);
      row.w_intersection = weighted_intersection(r.selected, inst);
      row.time_factor = time_factor(r.elapsed, cfg.penalty.t_max, cfg.penalty.alpha, cfg.penalty.gamma);
      row.contribution = row.inclusion * row.time_factor;
    } else {
      ++rep.invalid;
    }
    sum_j += row.contribution;
    sum_incl += row.inclusion;
    sum_inter += row.intersection;
    sum_f += row.f_sqrt2;
    sum_w += row.w_intersection;
    rep.rows.push_back(std::move(row));
  }
  rep.n = static_cast<int>(rep.rows.size());
  if (rep.n > 0) {
    const double n = rep.n;
    rep.J = sum_j / n;
    rep.incl = sum_incl / n;
    rep.inter = sum_inter / n;
    rep.f_sqrt2 = sum_f / n;
    rep.w_inter = sum_w / n;
  }
  return rep;
}

}  // namespace psfr
