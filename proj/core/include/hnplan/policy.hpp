#pragma once

#include <optional>
#include <span>
#include <vector>

#include "hnplan/learner.hpp"
#include "hnplan/mining.hpp"
#include "hnplan/scene.hpp"

namespace hnplan::policy {

inline constexpr int kPolicyOutputDim = kDiffDim + scene::kRasterCells;  // 288

// Regression planner: condition features -> standardized differential
// trajectory, with a corridor-raster head sharing the trunk.
class Policy : public scene::Planner {
 public:
  learn::Mlp net;  // kConditionDim -> hidden -> kPolicyOutputDim
  traj::Standardizer standardizer;

  traj::Trajectory plan(const scene::SceneView& view) const override;
};

traj::Trajectory plan(const Policy& policy, const scene::Scene& s);

struct LossWeights {
  double imitation = 10.0;   // lambda_imi
  double semantic = 1.0;     // lambda_sem
  double repulsion = 5.0;    // lambda_rd
  double clip = 5.0;         // C, standardized l1 units
  bool allow_unstable = false;  // permit repulsion >= imitation (diverges)
};

// Negative clipped L1 distance; in [-clip, 0], zero gradient past the clip.
double rd_loss(const traj::DiffTrajectory& pred, const traj::DiffTrajectory& neg, double clip);

struct PolicyExample {
  std::vector<double> condition;               // kConditionDim
  std::vector<double> target;                  // standardized expert differential
  std::optional<std::vector<double>> negative; // standardized negative differential
  std::vector<double> raster;                  // kRasterCells
};

std::vector<PolicyExample> prepare_examples(
    std::span<const scene::Scene> scenes,
    std::span<const std::optional<mine::NegativeRecord>> negatives,
    const traj::Standardizer& standardizer);

struct PolicyLoss {
  double total = 0.0;
  double imitation = 0.0;
  double repulsion = 0.0;  // mean over samples that carry a negative
  double semantic = 0.0;
};

// Combined objective; absent negatives contribute nothing and do not enter
// the repulsion mean's denominator. Throws NonFiniteLoss.
PolicyLoss total_loss(const Policy& policy, std::span<const PolicyExample> batch,
                      const LossWeights& weights, learn::Mlp::Gradients* grads);

struct PolicyTrainResult {
  Policy policy;
  double first_epoch_loss = 0.0;
  double last_epochs_loss = 0.0;
  std::optional<int> diverged_epoch;
};

// negatives may be empty (imitation-only baseline) or positionally aligned
// with scenes. Rejects repulsion >= imitation unless allow_unstable is set.
PolicyTrainResult train_policy(std::span<const scene::Scene> scenes,
                               std::span<const std::optional<mine::NegativeRecord>> negatives,
                               const LossWeights& weights, std::uint64_t seed, int epochs = 100);

learn::Checkpoint to_checkpoint(const Policy& policy, std::int32_t epoch, std::uint64_t seed);
Policy from_checkpoint(const learn::Checkpoint& ckpt);

}  // namespace hnplan::policy
