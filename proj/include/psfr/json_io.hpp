#pragma once

// JSON surfaces: annotation lines, selection lines, metric reports and
// selector parameter files.

#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "psfr/error.hpp"
#include "psfr/eval_metrics.hpp"
#include "psfr/keyframe_selector.hpp"

namespace psfr {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Annotations

inline EvidenceInstance instance_from_json(const json& j) {
  EvidenceInstance inst;
  try {
    inst.instance_id = j.at("instance_id").get<std::string>();
    inst.video_id = j.at("video_id").get<std::string>();
    inst.candidates = j.at("candidates").get<std::vector<int>>();
    if (j.contains("evidence_sets") && !j.at("evidence_sets").is_null())
      inst.evidence_sets = j.at("evidence_sets").get<std::vector<std::vector<int>>>();
    if (j.contains("weights") && !j.at("weights").is_null()) {
      std::map<int, double> w;
      for (const auto& [k, v] : j.at("weights").items()) {
        std::size_t used = 0;
        const int frame = std::stoi(k, &used);
        require(used == k.size(), ErrorCode::InvalidArgument, "weight key is not a frame index: " + k);
        const double wt = v.get<double>();
        require(wt >= 0.0, ErrorCode::InvalidArgument, "negative weight for frame " + k);
        w[frame] = wt;
      }
      inst.weights = std::move(w);
    }
  } catch (const json::exception& e) {
    fail(ErrorCode::InvalidArgument, std::string("malformed annotation: ") + e.what());
  } catch (const std::logic_error& e) {
    fail(ErrorCode::InvalidArgument, std::string("malformed annotation: ") + e.what());
  }
  canonicalize(inst);
  return inst;
}

inline json instance_to_json(const EvidenceInstance& inst) {
  json j{{"instance_id", inst.instance_id},
         {"video_id", inst.video_id},
         {"candidates", inst.candidates},
         {"evidence_sets", inst.evidence_sets}};
  if (inst.weights) {
    json w = json::object();
    for (const auto& [t, v] : *inst.weights) w[std::to_string(t)] = v;
    j["weights"] = std::move(w);
  }
  return j;
}

inline std::vector<json> read_json_lines(const std::filesystem::path& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorCode::IoError, "cannot open " + path.string());
  std::vector<json> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(json::parse(line));
    } catch (const json::exception& e) {
      fail(ErrorCode::InvalidArgument, path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

inline std::vector<EvidenceInstance> read_annotations(const std::filesystem::path& path) {
  std::vector<EvidenceInstance> out;
  for (const auto& j : read_json_lines(path)) out.push_back(instance_from_json(j));
  return out;
}

// Atomic whole-file write.
inline void write_text_file(const std::filesystem::path& path, const std::string& text) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    require(static_cast<bool>(out), ErrorCode::IoError, "cannot write " + tmp.string());
    out << text;
    require(static_cast<bool>(out), ErrorCode::IoError, "write failed: " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

inline void write_annotations(const std::filesystem::path& path, const std::vector<EvidenceInstance>& insts) {
  std::string text;
  for (const auto& inst : insts) text += instance_to_json(inst).dump() + "\n";
  write_text_file(path, text);
}

// ---------------------------------------------------------------------------
// Selection lines: {"instance_id", "selected", "elapsed_s", "valid"}

struct SelectionLine {
  std::string instance_id;
  std::vector<int> selected;
  double elapsed_s = 0.0;
  bool valid = true;
  std::optional<std::string> error;  // set when the selector itself failed
};

inline json selection_to_json(const SelectionLine& s) {
  json j{{"instance_id", s.instance_id}, {"selected", s.selected}, {"elapsed_s", s.elapsed_s}, {"valid", s.valid}};
  if (s.error) j["error"] = *s.error;
  return j;
}

inline SelectionLine selection_from_json(const json& j) {
  try {
    SelectionLine s;
    s.instance_id = j.at("instance_id").get<std::string>();
    s.selected = j.at("selected").get<std::vector<int>>();
    s.elapsed_s = j.value("elapsed_s", 0.0);
    s.valid = j.value("valid", true);
    if (j.contains("error")) s.error = j.at("error").get<std::string>();
    return s;
  } catch (const json::exception& e) {
    fail(ErrorCode::InvalidArgument, std::string("malformed selection line: ") + e.what());
  }
}

// ---------------------------------------------------------------------------
// Metric report

inline json report_to_json(const MetricReport& rep, const EvalConfig& cfg) {
  json rows = json::array();
  for (const auto& r : rep.rows)
    rows.push_back({{"instance_id", r.instance_id},
                    {"incl", r.inclusion},
                    {"inter", r.intersection},
                    {"f_sqrt2", r.f_sqrt2},
                    {"w_inter", r.w_intersection},
                    {"time_factor", r.time_factor},
                    {"contribution", r.contribution},
                    {"valid", r.valid()},
                    {"violation", r.failed ? std::string("SelectorFailed") : std::string(to_string(r.violation))}});
  return {{"J", rep.J},
          {"incl", rep.incl},
          {"inter", rep.inter},
          {"f_sqrt2", rep.f_sqrt2},
          {"w_inter", rep.w_inter},
          {"n", rep.n},
          {"invalid", rep.invalid},
          {"dropped", rep.dropped},
          {"config", {{"alpha", cfg.penalty.alpha}, {"gamma", cfg.penalty.gamma}, {"t_max", cfg.penalty.t_max}, {"k", cfg.K}}},
          {"instances", std::move(rows)}};
}

// ---------------------------------------------------------------------------
// Selector parameters

inline json params_to_json(const SelectorParams& p) {
  return {{"w", p.w},
          {"w_motion", p.w_motion},
          {"w_change", p.w_change},
          {"lambda", p.lambda_div},
          {"nms_gap", p.nms_gap},
          {"slot_mode", p.slot_mode == SlotMode::UniformTime ? "uniform-time" : "cumulative-change"},
          {"peak_align", p.peak_align},
          {"use_motion", p.use_motion}};
}

// Missing keys keep their values from `base`.
inline SelectorParams params_from_json(const json& j, SelectorParams base = {}) {
  try {
    if (j.contains("w")) {
      const auto w = j.at("w").get<std::vector<double>>();
      require(w.size() == kSignalDim, ErrorCode::InvalidConfig, "\"w\" needs 5 weights");
      std::copy(w.begin(), w.end(), base.w.begin());
    }
    base.w_motion = j.value("w_motion", base.w_motion);
    base.w_change = j.value("w_change", base.w_change);
    base.lambda_div = j.value("lambda", base.lambda_div);
    base.nms_gap = j.value("nms_gap", base.nms_gap);
    if (j.contains("slot_mode")) {
      const auto m = j.at("slot_mode").get<std::string>();
      require(m == "uniform-time" || m == "cumulative-change", ErrorCode::InvalidConfig, "unknown slot_mode " + m);
      base.slot_mode = m == "uniform-time" ? SlotMode::UniformTime : SlotMode::CumulativeChange;
    }
    base.peak_align = j.value("peak_align", base.peak_align);
    base.use_motion = j.value("use_motion", base.use_motion);
  } catch (const json::exception& e) {
    fail(ErrorCode::InvalidConfig, std::string("malformed selector params: ") + e.what());
  }
  base.validate();
  return base;
}

inline json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorCode::IoError, "cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    fail(ErrorCode::InvalidArgument, path.string() + ": " + e.what());
  }
}

// Accepts a bare params object or an evolution report holding "best_params".
inline SelectorParams read_params_file(const std::filesystem::path& path) {
  const json j = read_json_file(path);
  return params_from_json(j.contains("best_params") ? j.at("best_params") : j);
}

}  // namespace psfr
