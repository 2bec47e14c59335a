#include "hnplan/policy.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>

#include "hnplan/parallel.hpp"

namespace hnplan::policy {

namespace {

constexpr int kHiddenWidth = 256;

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }
inline double bce(double logit, double target) {
  return std::max(logit, 0.0) - logit * target + std::log1p(std::exp(-std::abs(logit)));
}
inline double sign_of(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

}  // namespace

traj::Trajectory Policy::plan(const scene::SceneView& view) const {
  std::vector<double> out = net.forward(scene::encode_condition(view));
  out.resize(static_cast<std::size_t>(kDiffDim));
  traj::DiffTrajectory diff = traj::DiffTrajectory::unflatten(out, true);
  return traj::from_diff(standardizer.destandardize(diff));
}

traj::Trajectory plan(const Policy& policy, const scene::Scene& s) {
  return policy.plan(scene::view_at_start(s));
}

double rd_loss(const traj::DiffTrajectory& pred, const traj::DiffTrajectory& neg, double clip) {
  return -std::min(traj::l1_diff_distance(pred, neg), clip);
}

std::vector<PolicyExample> prepare_examples(
    std::span<const scene::Scene> scenes,
    std::span<const std::optional<mine::NegativeRecord>> negatives,
    const traj::Standardizer& standardizer) {
  if (!negatives.empty() && negatives.size() != scenes.size())
    throw ShapeMismatch("negatives are not aligned with scenes");
  std::vector<PolicyExample> out(scenes.size());
  parallel_for(scenes.size(), [&](std::size_t i) {
    const scene::Scene& s = scenes[i];
    PolicyExample& ex = out[i];
    ex.condition = scene::encode_condition(s);
    auto target = standardizer.standardize(traj::to_diff(s.expert)).flatten();
    ex.target.assign(target.begin(), target.end());
    ex.raster = scene::corridor_raster(s);
    if (!negatives.empty() && negatives[i]) {
      auto neg = standardizer.standardize(traj::to_diff(negatives[i]->negative)).flatten();
      ex.negative.emplace(neg.begin(), neg.end());
    }
  });
  return out;
}

PolicyLoss total_loss(const Policy& policy, std::span<const PolicyExample> batch,
                      const LossWeights& weights, learn::Mlp::Gradients* grads) {
  if (batch.empty()) throw ConfigError("total_loss: empty batch");

  std::size_t with_negative = 0;
  for (const PolicyExample& ex : batch)
    if (ex.negative) ++with_negative;

  PolicyLoss loss;
  double inv_b = 1.0 / static_cast<double>(batch.size());
  double inv_m = with_negative > 0 ? 1.0 / static_cast<double>(with_negative) : 0.0;
  std::vector<double> upstream(static_cast<std::size_t>(kPolicyOutputDim));

  for (const PolicyExample& ex : batch) {
    learn::Mlp::Trace trace = policy.net.forward_trace(ex.condition);

    double imi_term = 0.0;
    for (int i = 0; i < kDiffDim; ++i) {
      std::size_t k = static_cast<std::size_t>(i);
      double r = trace.output[k] - ex.target[k];
      imi_term += std::abs(r);
      upstream[k] = weights.imitation * sign_of(r) * inv_b;
    }
    loss.imitation += imi_term * inv_b;

    if (ex.negative) {
      double dist = 0.0;
      for (int i = 0; i < kDiffDim; ++i)
        dist += std::abs(trace.output[static_cast<std::size_t>(i)] -
                         (*ex.negative)[static_cast<std::size_t>(i)]);
      loss.repulsion += -std::min(dist, weights.clip) * inv_m;
      if (dist <= weights.clip) {  // clipped region has zero gradient
        for (int i = 0; i < kDiffDim; ++i) {
          std::size_t k = static_cast<std::size_t>(i);
          upstream[k] += weights.repulsion * -sign_of(trace.output[k] - (*ex.negative)[k]) * inv_m;
        }
      }
    }

    double sem_term = 0.0;
    for (int c = 0; c < scene::kRasterCells; ++c) {
      std::size_t k = static_cast<std::size_t>(kDiffDim + c);
      double z = trace.output[k];
      double y = ex.raster[static_cast<std::size_t>(c)];
      sem_term += bce(z, y);
      upstream[k] = weights.semantic * (sigmoid(z) - y) / scene::kRasterCells * inv_b;
    }
    loss.semantic += sem_term / scene::kRasterCells * inv_b;

    if (grads) policy.net.backward(trace, upstream, grads);
  }

  loss.total = weights.imitation * loss.imitation + weights.repulsion * loss.repulsion +
               weights.semantic * loss.semantic;
  if (!std::isfinite(loss.total)) throw NonFiniteLoss("policy loss is not finite");
  return loss;
}

PolicyTrainResult train_policy(std::span<const scene::Scene> scenes,
                               std::span<const std::optional<mine::NegativeRecord>> negatives,
                               const LossWeights& weights, std::uint64_t seed, int epochs) {
  if (scenes.empty()) throw ConfigError("train_policy needs a non-empty scene set");
  if (epochs < 1) throw ConfigError("train_policy needs at least one epoch");
  if (!negatives.empty() && negatives.size() != scenes.size())
    throw ConfigError("negatives file is not aligned with the scene file");
  if (weights.repulsion > 0.0 && weights.repulsion >= weights.imitation) {
    if (!weights.allow_unstable)
      throw ConfigError("repulsion weight >= imitation weight is a known-divergent regime; "
                        "pass the unstable override to run it anyway");
    std::cerr << "warning: repulsion weight >= imitation weight; training may not converge\n";
  }

  PolicyTrainResult result;
  Policy& policy = result.policy;

  std::vector<traj::DiffTrajectory> diffs;
  diffs.reserve(scenes.size());
  for (const scene::Scene& s : scenes) diffs.push_back(traj::to_diff(s.expert));
  policy.standardizer = traj::Standardizer::fit(diffs);

  std::vector<PolicyExample> examples = prepare_examples(scenes, negatives, policy.standardizer);

  rng::Stream init_stream(seed, rng::Tag::kPolicyInit);
  const int widths[] = {scene::kConditionDim, kHiddenWidth, kHiddenWidth, kPolicyOutputDim};
  policy.net = learn::Mlp::init(widths, init_stream);

  learn::OptimizerState opt = learn::OptimizerState::create(policy.net);
  opt.total_epochs = static_cast<double>(epochs);
  const std::size_t batch_size = 32;
  std::size_t n = examples.size();
  std::size_t steps_per_epoch = (n + batch_size - 1) / batch_size;

  learn::Mlp::Gradients grads = policy.net.zero_gradients();
  std::vector<double> tail_losses;
  long global_step = 0;

  for (int epoch = 0; epoch < epochs; ++epoch) {
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    rng::Stream shuffle(seed, rng::Tag::kPolicyShuffle, static_cast<std::uint64_t>(epoch));
    for (std::size_t i = n; i > 1; --i)
      std::swap(order[i - 1], order[static_cast<std::size_t>(shuffle.uniform_index(i))]);

    double epoch_loss = 0.0;
    std::size_t batches = 0;
    try {
      for (std::size_t start = 0; start < n; start += batch_size) {
        std::size_t end = std::min(start + batch_size, n);
        std::vector<PolicyExample> batch;
        batch.reserve(end - start);
        for (std::size_t i = start; i < end; ++i) batch.push_back(examples[order[i]]);
        grads.zero();
        PolicyLoss loss = total_loss(policy, batch, weights, &grads);
        double epoch_real = static_cast<double>(global_step) / static_cast<double>(steps_per_epoch);
        learn::step(opt, policy.net, grads, epoch_real);
        ++global_step;
        epoch_loss += loss.total;
        ++batches;
      }
    } catch (const Error&) {
      result.diverged_epoch = epoch;
      break;
    }

    double mean_loss = epoch_loss / static_cast<double>(batches);
    if (epoch == 0) result.first_epoch_loss = mean_loss;
    tail_losses.push_back(mean_loss);
    if (tail_losses.size() > 10) tail_losses.erase(tail_losses.begin());
  }

  if (!tail_losses.empty()) {
    double sum = 0.0;
    for (double v : tail_losses) sum += v;
    result.last_epochs_loss = sum / static_cast<double>(tail_losses.size());
  }
  return result;
}

learn::Checkpoint to_checkpoint(const Policy& policy, std::int32_t epoch, std::uint64_t seed) {
  learn::Checkpoint ckpt;
  ckpt.kind = learn::kCheckpointPolicy;
  ckpt.net = policy.net;
  ckpt.standardizer = policy.standardizer;
  ckpt.epoch = epoch;
  ckpt.seed = seed;
  return ckpt;
}

Policy from_checkpoint(const learn::Checkpoint& ckpt) {
  if (ckpt.kind != learn::kCheckpointPolicy) throw IoError("checkpoint is not a policy model");
  Policy p;
  p.net = ckpt.net;
  p.standardizer = ckpt.standardizer;
  return p;
}

}  // namespace hnplan::policy
