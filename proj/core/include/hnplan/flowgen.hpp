#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "hnplan/learner.hpp"
#include "hnplan/scene.hpp"

namespace hnplan::flow {

inline constexpr int kVelocityDim = kDiffDim;  // 32
inline constexpr int kGenInputDim =
    kVelocityDim + learn::kTimeEmbedDim + scene::kConditionDim + 1;  // 90; +1 unconditional flag
inline constexpr int kGenOutputDim = kVelocityDim + scene::kRasterCells;  // velocity + raster head
inline constexpr double kMapLossWeight = 1.0;

struct FlowModel {
  learn::Mlp net;  // kGenInputDim -> hidden -> kGenOutputDim
  traj::Standardizer standardizer;
  double prior_sigma = 1.0;    // training prior scale, standardized space
  double cond_dropout = 0.1;   // probability of the unconditional branch per sample
};

struct SamplingConfig {
  double guidance = 0.5;     // CFG scale w
  int steps = 5;             // Euler steps
  int candidates = 64;       // trajectories per scene
  double sigma_scale = 2.0;  // sampling noise = sigma_scale * prior_sigma
};

// Everything a training sample needs, precomputed once per scene.
struct TrainingExample {
  std::vector<double> condition;  // kConditionDim
  std::vector<double> target;     // standardized expert differential, kDiffDim
  std::vector<double> raster;     // kRasterCells
};
std::vector<TrainingExample> prepare_examples(std::span<const scene::Scene> scenes,
                                              const traj::Standardizer& standardizer);

// Per-sample stochastic draws, split out so losses are replayable.
struct FlowDraw {
  std::array<double, kDiffDim> x0{};
  double t = 0.0;
  bool drop_condition = false;
};
FlowDraw make_draw(const FlowModel& model, rng::Stream& stream);

struct FlowLoss {
  double total = 0.0;
  double fm = 0.0;
  double aux = 0.0;
};

// Batch-mean L1 flow-matching loss plus the corridor-raster reconstruction
// term; accumulates parameter gradients when grads is non-null. Throws
// NonFiniteLoss.
FlowLoss fm_loss(const FlowModel& model, std::span<const TrainingExample> batch,
                 std::span<const FlowDraw> draws, learn::Mlp::Gradients* grads);

struct GeneratorTrainResult {
  FlowModel model;
  double first_epoch_loss = 0.0;
  double last_epochs_loss = 0.0;  // mean over the final 10 epochs
  std::optional<int> diverged_epoch;
};

GeneratorTrainResult train_generator(std::span<const scene::Scene> scenes, std::uint64_t seed,
                                     int epochs = 100);

// CFG blend of the conditional and unconditional velocity estimates. w = 1
// and w = 0 return the corresponding branch bitwise.
std::vector<double> guided_velocity(const FlowModel& model, std::span<const double> x, double t,
                                    std::span<const double> condition, double w);

struct Candidate {
  traj::Trajectory trajectory;
  bool degenerate = false;  // heading decode fell back; scores zero downstream
};

// N candidates via Euler integration from t = 0 to 1, velocity evaluated at
// each step's start time. Deterministic per (seed, scene_id, index); safe to
// evaluate candidates in parallel.
std::vector<Candidate> sample_candidates(const FlowModel& model, const scene::Scene& s,
                                         const SamplingConfig& cfg, std::uint64_t seed);

learn::Checkpoint to_checkpoint(const FlowModel& model, std::int32_t epoch, std::uint64_t seed);
FlowModel from_checkpoint(const learn::Checkpoint& ckpt);

}  // namespace hnplan::flow
