#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "psfr/psfr.hpp"
#include "test_util.hpp"

using namespace psfr;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run run(const fs::path& scratch, const std::string& args) {
  const auto out = scratch / "stdout.txt", err = scratch / "stderr.txt";
  const std::string cmd = std::string(PSFR_BIN) + " " + args + " >" + out.string() + " 2>" + err.string();
  const int status = std::system(cmd.c_str());
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, testutil::slurp(out), testutil::slurp(err)};
}

std::vector<json> lines_of(const std::string& text) {
  std::vector<json> out;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line))
    if (!line.empty()) out.push_back(json::parse(line));
  return out;
}

class Cli : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = new testutil::TempDir("cli");
    const json spec = json::parse(R"({"width": 64, "height": 48, "evidence": "scene_centers",
      "random_videos": {"count": 10, "min_frames": 8, "max_frames": 14, "min_scenes": 2, "max_scenes": 3}})");
    std::ofstream(root() / "spec.json") << spec.dump();
    ASSERT_EQ(run(root(), "synth --spec " + (root() / "spec.json").string() + " --out " + corpus().string() + " --seed 3").code, 0);
    std::string videos;
    for (int i = 0; i < 10; ++i) videos += " " + (corpus() / ("v00" + std::to_string(i))).string();
    ASSERT_EQ(run(root(), "signals" + videos + " --cache-dir " + cache().string()).code, 0);
  }
  static void TearDownTestSuite() {
    delete dir_;
    dir_ = nullptr;
  }

  static fs::path root() { return dir_->path(); }
  static fs::path corpus() { return root() / "corpus"; }
  static fs::path cache() { return root() / "cache"; }
  static std::string ann() { return (corpus() / "annotations.jsonl").string(); }

  static testutil::TempDir* dir_;
};

testutil::TempDir* Cli::dir_ = nullptr;

}  // namespace

TEST_F(Cli, HelpForEverySubcommand) {
  const std::map<std::string, std::vector<std::string>> flags{
      {"signals", {"--cache-dir", "--resize", "--force", "--threads", "--event-log", "--config"}},
      {"select", {"--cache-dir", "--annotations", "--k", "--selector", "--params", "--out", "--t-max"}},
      {"eval", {"--annotations", "--alpha", "--gamma", "--t-max", "--k", "--out"}},
      {"evolve", {"--islands", "--pop", "--generations", "--sigma", "--migration-interval", "--seed", "--timing",
                  "--checkpoint", "--resume", "--archive"}},
      {"bench", {"--video", "--cache", "--reps", "--k", "--resize"}},
      {"synth", {"--spec", "--out", "--seed"}},
  };
  for (const auto& [cmd, fl] : flags) {
    const auto r = run(root(), cmd + " --help");
    EXPECT_EQ(r.code, 0) << cmd;
    for (const auto& f : fl) EXPECT_NE(r.out.find(f), std::string::npos) << cmd << " " << f;
  }
}

TEST_F(Cli, UsageErrorsExitTwo) {
  EXPECT_EQ(run(root(), "").code, 2);
  EXPECT_EQ(run(root(), "select --bogus").code, 2);
  EXPECT_EQ(run(root(), "select --cache-dir " + cache().string() + " --annotations " + ann() + " --k 0").code, 2);
}

TEST_F(Cli, SignalsIdempotentRerun) {
  std::string videos;
  for (int i = 0; i < 3; ++i) videos += " " + (corpus() / ("v00" + std::to_string(i))).string();
  const auto r = run(root(), "signals" + videos + " --cache-dir " + cache().string());
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.err.find("0 computed, 3 up to date"), std::string::npos) << r.err;
}

TEST_F(Cli, SignalsAggregateFailures) {
  const auto bad = root() / "bad_video";
  fs::create_directories(bad);
  std::ofstream(bad / "frame_00000.png") << "garbage";
  const auto out = root() / "cache_fail";
  const auto r = run(root(), "signals " + (corpus() / "v000").string() + " " + bad.string() + " " +
                                 (corpus() / "v001").string() + " --cache-dir " + out.string());
  EXPECT_EQ(r.code, 1);
  EXPECT_TRUE(fs::exists(out / "v000.psfc"));
  EXPECT_TRUE(fs::exists(out / "v001.psfc"));
  EXPECT_FALSE(fs::exists(out / "bad_video.psfc"));
  EXPECT_NE(r.err.find("failed bad_video"), std::string::npos) << r.err;
}

TEST_F(Cli, SelectOneLinePerInstance) {
  const auto r = run(root(), "select --cache-dir " + cache().string() + " --annotations " + ann() + " --k 8");
  ASSERT_EQ(r.code, 0) << r.err;
  const auto lines = lines_of(r.out);
  ASSERT_EQ(lines.size(), 10u);
  for (const auto& l : lines) {
    EXPECT_LE(l.at("selected").size(), 8u);
    EXPECT_TRUE(l.at("valid").get<bool>());
  }
}

TEST_F(Cli, UniformSelectorDispatch) {
  const auto r = run(root(), "select --selector uniform --k 4 --cache-dir " + cache().string() + " --annotations " + ann());
  ASSERT_EQ(r.code, 0);
  const auto insts = read_annotations(ann());
  const auto lines = lines_of(r.out);
  ASSERT_EQ(lines.size(), insts.size());
  for (std::size_t i = 0; i < insts.size(); ++i) {
    const auto track = read_cache(cache() / (insts[i].video_id + ".psfc"));
    const auto expect = uniform_select(make_request(track, insts[i].candidates, 4)).indices;
    EXPECT_EQ(lines[i].at("selected").get<std::vector<int>>(), expect);
  }
}

TEST_F(Cli, SelectMissingCacheFails) {
  testutil::TempDir empty("cli_empty_cache");
  const auto r = run(root(), "select --cache-dir " + empty.path().string() + " --annotations " + ann());
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("v000_q0"), std::string::npos);
}

TEST_F(Cli, EvalPerfectAndInvalid) {
  const auto insts = read_annotations(ann());
  std::ofstream perfect(root() / "perfect.jsonl"), invalid(root() / "invalid.jsonl");
  for (const auto& q : insts) {
    std::vector<int> pick;
    for (const auto& g : q.evidence_sets) pick.push_back(g.front());
    perfect << selection_to_json({q.instance_id, pick, 0.0, true, std::nullopt}).dump() << "\n";
    invalid << selection_to_json({q.instance_id, {-1}, 0.0, false, std::nullopt}).dump() << "\n";
  }
  perfect.close();
  invalid.close();
  auto r = run(root(), "eval " + (root() / "perfect.jsonl").string() + " --annotations " + ann());
  ASSERT_EQ(r.code, 0) << r.err;
  auto rep = json::parse(r.out);
  EXPECT_EQ(rep.at("J").get<double>(), 1.0);
  EXPECT_EQ(rep.at("config").at("alpha").get<double>(), 0.95);
  EXPECT_EQ(rep.at("config").at("gamma").get<double>(), 1.0);
  EXPECT_EQ(rep.at("config").at("t_max").get<double>(), 15.0);
  r = run(root(), "eval " + (root() / "invalid.jsonl").string() + " --annotations " + ann());
  ASSERT_EQ(r.code, 0);
  EXPECT_EQ(json::parse(r.out).at("J").get<double>(), 0.0);
}

TEST_F(Cli, EvalRejectsUnmatchedIds) {
  std::ofstream(root() / "stray.jsonl") << R"({"instance_id": "nobody", "selected": [1], "elapsed_s": 0})" << "\n";
  EXPECT_EQ(run(root(), "eval " + (root() / "stray.jsonl").string() + " --annotations " + ann()).code, 1);
}

TEST_F(Cli, SelectEvalPipeline) {
  const auto sel = root() / "sel.jsonl";
  ASSERT_EQ(run(root(), "select --cache-dir " + cache().string() + " --annotations " + ann() + " --out " + sel.string()).code, 0);
  const auto r = run(root(), "eval " + sel.string() + " --annotations " + ann());
  ASSERT_EQ(r.code, 0);
  const auto rep = json::parse(r.out);
  EXPECT_EQ(rep.at("n").get<int>(), 10);
  EXPECT_GE(rep.at("J").get<double>(), 0.0);
  EXPECT_LE(rep.at("J").get<double>(), 1.0);
}

TEST_F(Cli, EvolveWritesParamsUsableBySelect) {
  const auto out = root() / "evo.json";
  const auto r = run(root(), "evolve --cache-dir " + cache().string() + " --annotations " + ann() +
                                 " --islands 2 --pop 4 --generations 3 --timing zero --k 4 --out " + out.string());
  ASSERT_EQ(r.code, 0) << r.err;
  const auto rep = read_json_file(out);
  EXPECT_EQ(rep.at("history").size(), 4u);
  EXPECT_EQ(run(root(), "select --cache-dir " + cache().string() + " --annotations " + ann() + " --params " +
                            out.string()).code, 0);
}

TEST_F(Cli, BenchReportsMeanAndStd) {
  const auto r = run(root(), "bench --video " + (corpus() / "v000").string() + " --cache " + (cache() / "v000.psfc").string() +
                                 " --reps 5");
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("s/frame"), std::string::npos);
  EXPECT_NE(r.out.find("over 5 reps"), std::string::npos);
  EXPECT_NE(r.out.find(" \xC2\xB1 "), std::string::npos);
}

TEST_F(Cli, SynthRejectsBadSpec) {
  std::ofstream(root() / "bad_spec.json") << R"({"videos": [{"id": "a", "scenes": [{"texture": "wood", "frames": 3}]}]})";
  EXPECT_EQ(run(root(), "synth --spec " + (root() / "bad_spec.json").string() + " --out " + (root() / "x").string()).code, 2);
}
