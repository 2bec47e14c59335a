#pragma once

#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "hnplan/policy.hpp"

namespace hnplan::harness {

struct EvalRow {
  std::uint64_t scene_id = 0;
  score::ScoreBreakdown breakdown;
};

struct Aggregate {
  double nc = 0.0, dac = 0.0, ep = 0.0, ttc = 0.0, comf = 0.0, pdms = 0.0;  // x100
};

struct Report {
  std::vector<EvalRow> rows;
  Aggregate aggregate;  // derived from the emitted (6-decimal) rows
  std::string to_csv() const;
  std::string summary_json(std::uint64_t config_hash, std::span<const std::uint64_t> seeds) const;
};

// Plans every scene with plan_fn and scores the result; degenerate plans
// score zero. Scene-parallel with a deterministic gather.
Report evaluate_scenes(std::span<const scene::Scene> scenes,
                       const std::function<traj::Trajectory(const scene::Scene&)>& plan_fn);
Report evaluate(const policy::Policy& policy, std::span<const scene::Scene> scenes);

struct ClosedLoopRow {
  std::uint64_t scene_id = 0;
  double rc = 0.0;
  double hd_score = 0.0;
  int ticks = 0;
  bool collided = false;
};

struct ClosedLoopReport {
  std::vector<ClosedLoopRow> rows;
  double mean_rc = 0.0;        // x100
  double mean_hd_score = 0.0;  // x100
  std::string to_csv() const;
};

ClosedLoopReport run_closed_loop(const scene::Planner& planner,
                                 std::span<const scene::Scene> scenes, int ticks);

struct MiningGridCell {
  int candidates = 64;
  double guidance = 0.5;
  double sigma_scale = 1.0;
};

std::vector<std::pair<MiningGridCell, mine::MiningStats>> ablate_mining(
    const flow::FlowModel& model, std::span<const scene::Scene> scenes,
    std::span<const MiningGridCell> grid, double xi, std::uint64_t seed);

struct ExperimentConfig {
  std::vector<std::uint64_t> seeds = {0, 1, 2};
  int train_count = 800;
  int test_count = 200;
  scene::Difficulty difficulty = scene::Difficulty::kMedium;
  double xi = 0.3;
  flow::SamplingConfig sampling;    // w = 0.5, 5 steps, 64 candidates, 2 sigma
  policy::LossWeights weights;      // 10 / 1 / 5, clip 5
  mine::ScoreFn score_fn = mine::ScoreFn::kPdms;
  int epochs = 100;
  int closed_loop_ticks = 32;
  std::filesystem::path out_dir;
};

std::uint64_t config_hash(const ExperimentConfig& config);

struct SeedOutcome {
  std::uint64_t seed = 0;
  Aggregate baseline;
  Aggregate rd_trained;
  double baseline_hd = 0.0;
  double rd_hd = 0.0;
  double prop_sample = 0.0;
};

struct PipelineSummary {
  std::vector<SeedOutcome> per_seed;
  double mean_baseline_pdms = 0.0;
  double mean_rd_pdms = 0.0;
  double mean_gain = 0.0;
  std::uint64_t hash = 0;
};

// Stage order: gen-scenes, train-generator, mine-negatives, train-policy
// (baseline then RD), evaluate both, closed-loop both, comparison report.
// Every stage persists its artifact under out_dir and is skipped when the
// artifact already exists, so a re-run resumes from what is on disk.
PipelineSummary full_pipeline(const ExperimentConfig& config);

// Generates [first_id, first_id + count) and skips infeasible draws.
std::vector<scene::Scene> generate_scene_set(std::uint64_t seed, std::uint64_t first_id, int count,
                                             scene::Difficulty difficulty);

void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace hnplan::harness
