#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hnplan/flowgen.hpp"
#include "hnplan/scoring.hpp"

namespace hnplan::mine {

// Pluggable candidate-filtering score; the diversity stats always use PDMS.
enum class ScoreFn { kPdms, kDacOnly, kTtcOnly };
const char* to_string(ScoreFn fn);
ScoreFn score_fn_from_string(const std::string& s);
double selection_value(const score::ScoreBreakdown& b, ScoreFn fn);

struct NegativeRecord {
  std::uint64_t scene_id = 0;
  traj::Trajectory negative;
  score::ScoreBreakdown negative_score;
  double expert_distance = 0.0;  // l2_distance to the scene's expert
  double selection_score = 0.0;  // value that passed the < xi filter
  ScoreFn score_fn = ScoreFn::kPdms;
  // generation config snapshot
  double guidance = 0.0;
  double sigma_scale = 0.0;
  int candidates = 0;
  double xi = 0.0;
};

// Indices whose score is strictly below xi, in input order.
std::vector<std::size_t> filter_unsafe(std::span<const double> scores, double xi);
std::vector<std::size_t> filter_unsafe(std::span<const score::ScoreBreakdown> breakdowns,
                                       double xi, ScoreFn fn);

// The unsafe candidate spatially closest to the expert; ties break to the
// lowest candidate index. Empty filter set -> nullopt (scene contributes no
// repulsion term downstream).
std::optional<NegativeRecord> select_negative(std::span<const flow::Candidate> candidates,
                                              std::span<const score::ScoreBreakdown> breakdowns,
                                              const traj::Trajectory& expert, double xi,
                                              ScoreFn fn);

struct MiningStats {
  double prop_sample = 0.0;  // scenes with a non-empty unsafe set / scenes
  double pdms_max = 0.0;     // x100, mean over scenes of per-scene max PDMS
  double pdms_std = 0.0;     // mean over scenes of per-scene PDMS std
  double dist_nega = 0.0;    // mean expert distance over mined scenes
  double pdms_nega = 0.0;    // x100, mean PDMS of mined negatives
  std::size_t scenes = 0;
  std::size_t with_negative = 0;
};

struct MiningResult {
  std::vector<std::optional<NegativeRecord>> records;  // positionally aligned with scenes
  MiningStats stats;
};

MiningResult mine_dataset(const flow::FlowModel& model, std::span<const scene::Scene> scenes,
                          const flow::SamplingConfig& cfg, double xi, ScoreFn fn,
                          std::uint64_t seed);

// Negative-set file: JSON array aligned with the scene file; skipped scenes
// serialize as null.
std::string negatives_to_json(std::span<const std::optional<NegativeRecord>> records);
void write_negatives(const std::filesystem::path& path,
                     std::span<const std::optional<NegativeRecord>> records);
std::vector<std::optional<NegativeRecord>> read_negatives(const std::filesystem::path& path);

std::string stats_csv_header();
std::string stats_csv_row(int candidates, double guidance, double sigma_scale,
                          const MiningStats& stats);

}  // namespace hnplan::mine
