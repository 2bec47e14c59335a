#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "hnplan/harness.hpp"
#include "oracles.hpp"

using namespace hnplan;
using namespace hnplan::harness;

namespace {

std::vector<scene::Scene> scene_set(std::uint64_t seed, int count, scene::Difficulty d) {
  return generate_scene_set(seed, 0, count, d);
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream f(p, std::ios::binary);
  REQUIRE(f);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("expert replay scores at least 90 aggregate pdms") {
  auto scenes = scene_set(100, 12, scene::Difficulty::kMedium);
  Report report = evaluate_scenes(scenes, [](const scene::Scene& s) { return s.expert; });
  CHECK(report.aggregate.pdms >= 90.0);
}

TEST_CASE("a stationary policy on empty roads lands on the closed-form pdms") {
  auto all = scene_set(101, 30, scene::Difficulty::kEasy);
  std::vector<scene::Scene> empty;
  for (auto& s : all)
    if (s.agents.empty()) empty.push_back(std::move(s));
  REQUIRE(empty.size() >= 3);
  Report report = evaluate_scenes(empty, [](const scene::Scene&) { return traj::Trajectory{}; });
  // NC = DAC = 1, EP = 0, TTC = Comf = 1: pdms = 7/12 per scene.
  CHECK(report.aggregate.pdms == doctest::Approx(100.0 * 7.0 / 12.0).epsilon(1e-4));
}

TEST_CASE("evaluation output is byte-stable") {
  auto scenes = scene_set(102, 6, scene::Difficulty::kMedium);
  Report a = evaluate_scenes(scenes, [](const scene::Scene& s) { return s.expert; });
  Report b = evaluate_scenes(scenes, [](const scene::Scene& s) { return s.expert; });
  CHECK(a.to_csv() == b.to_csv());
}

TEST_CASE("report aggregates are recomputable from the emitted rows") {
  auto scenes = scene_set(103, 10, scene::Difficulty::kMedium);
  Report report = evaluate_scenes(scenes, [](const scene::Scene& s) { return s.expert; });
  std::istringstream csv(report.to_csv());
  std::string line;
  std::getline(csv, line);  // header
  double sum_pdms = 0.0;
  int n = 0;
  while (std::getline(csv, line)) {
    auto last_comma = line.find_last_of(',');
    sum_pdms += std::strtod(line.substr(last_comma + 1).c_str(), nullptr);
    ++n;
  }
  REQUIRE(n == static_cast<int>(report.rows.size()));
  CHECK(std::abs(report.aggregate.pdms - 100.0 * sum_pdms / n) <= 1e-6);
}

TEST_CASE("degenerate plans score zero rather than crashing the run") {
  auto scenes = scene_set(104, 3, scene::Difficulty::kEasy);
  Report report = evaluate_scenes(scenes, [](const scene::Scene&) -> traj::Trajectory {
    throw DegenerateHeading("synthetic failure");
  });
  for (const EvalRow& r : report.rows) CHECK(r.breakdown.pdms == 0.0);
}

TEST_CASE("closed-loop runs aggregate per-scene rollouts") {
  auto scenes = scene_set(105, 6, scene::Difficulty::kEasy);
  scene::PurePursuitPlanner planner;
  ClosedLoopReport report = run_closed_loop(planner, scenes, 40);
  REQUIRE(report.rows.size() == scenes.size());
  CHECK(report.mean_hd_score >= 80.0);
  for (const auto& row : report.rows) CHECK(row.hd_score <= row.rc + 1e-9);
}

TEST_CASE("config hash tracks every field") {
  ExperimentConfig a;
  ExperimentConfig b = a;
  CHECK(config_hash(a) == config_hash(b));
  b.xi = 0.31;
  CHECK(config_hash(a) != config_hash(b));
  b = a;
  b.sampling.sigma_scale = 1.0;
  CHECK(config_hash(a) != config_hash(b));
  b = a;
  b.seeds = {0};
  CHECK(config_hash(a) != config_hash(b));
}

TEST_CASE("ablate_mining emits one deterministic row per cell") {
  auto scenes = scene_set(106, 5, scene::Difficulty::kMedium);
  flow::FlowModel model;
  rng::Stream init(107, rng::Tag::kTest);
  const int widths[] = {flow::kGenInputDim, 32, flow::kGenOutputDim};
  model.net = learn::Mlp::init(widths, init);

  std::vector<MiningGridCell> grid = {{16, 0.5, 1.0}, {16, 0.5, 1.0}};
  auto rows = ablate_mining(model, scenes, grid, 0.3, 9);
  REQUIRE(rows.size() == 2);
  CHECK(mine::stats_csv_row(16, 0.5, 1.0, rows[0].second) ==
        mine::stats_csv_row(16, 0.5, 1.0, rows[1].second));
}

TEST_SUITE("slow") {
  TEST_CASE("full pipeline produces artifacts, resumes, and stays deterministic") {
    namespace fs = std::filesystem;
    fs::path dir = fs::temp_directory_path() / "hnplan_pipeline_test";
    fs::remove_all(dir);

    ExperimentConfig cfg;
    cfg.seeds = {0};
    cfg.train_count = 100;
    cfg.test_count = 20;
    cfg.epochs = 8;  // enough to exercise every stage
    cfg.closed_loop_ticks = 8;
    cfg.out_dir = dir / "run_a";

    PipelineSummary a = full_pipeline(cfg);
    CHECK(fs::exists(cfg.out_dir / "comparison.csv"));
    CHECK(fs::exists(cfg.out_dir / "comparison.json"));
    CHECK(fs::exists(cfg.out_dir / "seed_0" / "generator.ckpt"));
    CHECK(fs::exists(cfg.out_dir / "seed_0" / "negatives.json"));

    // Resume: re-running over the same directory reuses artifacts and
    // rewrites identical reports.
    std::string comparison_before = slurp(cfg.out_dir / "comparison.csv");
    PipelineSummary resumed = full_pipeline(cfg);
    CHECK(slurp(cfg.out_dir / "comparison.csv") == comparison_before);
    CHECK(resumed.mean_gain == a.mean_gain);

    // A fresh directory reproduces the same bytes.
    ExperimentConfig cfg_b = cfg;
    cfg_b.out_dir = dir / "run_b";
    full_pipeline(cfg_b);
    CHECK(slurp(cfg_b.out_dir / "comparison.csv") == comparison_before);
    CHECK(slurp(cfg_b.out_dir / "seed_0" / "eval_rd.csv") ==
          slurp(cfg.out_dir / "seed_0" / "eval_rd.csv"));

    fs::remove_all(dir);
  }
}
