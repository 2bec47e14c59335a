#include "hnplan/flowgen.hpp"

#include <algorithm>
#include <cmath>

#include "hnplan/parallel.hpp"

namespace hnplan::flow {

namespace {

constexpr int kHiddenWidth = 512;

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Numerically stable binary cross-entropy on logits.
inline double bce(double logit, double target) {
  return std::max(logit, 0.0) - logit * target + std::log1p(std::exp(-std::abs(logit)));
}

std::vector<double> build_input(std::span<const double> x, double t,
                                std::span<const double> condition, bool unconditional) {
  std::vector<double> in;
  in.reserve(kGenInputDim);
  in.insert(in.end(), x.begin(), x.end());
  auto emb = learn::time_embedding(t);
  in.insert(in.end(), emb.begin(), emb.end());
  if (unconditional) {
    in.insert(in.end(), scene::kConditionDim, 0.0);
    in.push_back(1.0);
  } else {
    in.insert(in.end(), condition.begin(), condition.end());
    in.push_back(0.0);
  }
  return in;
}

}  // namespace

std::vector<TrainingExample> prepare_examples(std::span<const scene::Scene> scenes,
                                              const traj::Standardizer& standardizer) {
  std::vector<TrainingExample> out(scenes.size());
  parallel_for(scenes.size(), [&](std::size_t i) {
    const scene::Scene& s = scenes[i];
    TrainingExample& ex = out[i];
    ex.condition = scene::encode_condition(s);
    auto flat = standardizer.standardize(traj::to_diff(s.expert)).flatten();
    ex.target.assign(flat.begin(), flat.end());
    ex.raster = scene::corridor_raster(s);
  });
  return out;
}

FlowDraw make_draw(const FlowModel& model, rng::Stream& stream) {
  FlowDraw d;
  for (double& v : d.x0) v = model.prior_sigma * stream.normal();
  d.t = stream.uniform();
  d.drop_condition = stream.uniform() < model.cond_dropout;
  return d;
}

FlowLoss fm_loss(const FlowModel& model, std::span<const TrainingExample> batch,
                 std::span<const FlowDraw> draws, learn::Mlp::Gradients* grads) {
  if (batch.size() != draws.size()) throw ShapeMismatch("fm_loss: batch/draws size mismatch");
  if (batch.empty()) throw ConfigError("fm_loss: empty batch");

  FlowLoss loss;
  double inv_b = 1.0 / static_cast<double>(batch.size());
  std::vector<double> upstream(static_cast<std::size_t>(kGenOutputDim));

  for (std::size_t s = 0; s < batch.size(); ++s) {
    const TrainingExample& ex = batch[s];
    const FlowDraw& d = draws[s];

    std::array<double, kDiffDim> x_t;
    std::array<double, kDiffDim> target_v;
    for (int i = 0; i < kDiffDim; ++i) {
      x_t[i] = (1.0 - d.t) * d.x0[i] + d.t * ex.target[static_cast<std::size_t>(i)];
      target_v[i] = ex.target[static_cast<std::size_t>(i)] - d.x0[i];
    }

    std::vector<double> input = build_input(x_t, d.t, ex.condition, d.drop_condition);
    learn::Mlp::Trace trace = model.net.forward_trace(input);

    double fm_term = 0.0;
    for (int i = 0; i < kDiffDim; ++i) {
      double r = trace.output[static_cast<std::size_t>(i)] - target_v[i];
      fm_term += std::abs(r);
      double sign = r > 0.0 ? 1.0 : (r < 0.0 ? -1.0 : 0.0);
      upstream[static_cast<std::size_t>(i)] = sign * inv_b;
    }

    double aux_term = 0.0;
    for (int c = 0; c < scene::kRasterCells; ++c) {
      double z = trace.output[static_cast<std::size_t>(kVelocityDim + c)];
      double y = ex.raster[static_cast<std::size_t>(c)];
      aux_term += bce(z, y);
      upstream[static_cast<std::size_t>(kVelocityDim + c)] =
          kMapLossWeight * (sigmoid(z) - y) / scene::kRasterCells * inv_b;
    }
    aux_term /= scene::kRasterCells;

    loss.fm += fm_term * inv_b;
    loss.aux += aux_term * inv_b;
    if (grads) model.net.backward(trace, upstream, grads);
  }

  loss.total = loss.fm + kMapLossWeight * loss.aux;
  if (!std::isfinite(loss.total)) throw NonFiniteLoss("flow-matching loss is not finite");
  return loss;
}

GeneratorTrainResult train_generator(std::span<const scene::Scene> scenes, std::uint64_t seed,
                                     int epochs) {
  if (scenes.size() < 100)
    throw ConfigError("train_generator needs at least 100 scenes, got " +
                      std::to_string(scenes.size()));
  if (epochs < 1) throw ConfigError("train_generator needs at least one epoch");

  GeneratorTrainResult result;
  FlowModel& model = result.model;

  std::vector<traj::DiffTrajectory> diffs;
  diffs.reserve(scenes.size());
  for (const scene::Scene& s : scenes) diffs.push_back(traj::to_diff(s.expert));
  model.standardizer = traj::Standardizer::fit(diffs);

  std::vector<TrainingExample> examples = prepare_examples(scenes, model.standardizer);

  rng::Stream init_stream(seed, rng::Tag::kGeneratorInit);
  const int widths[] = {kGenInputDim, kHiddenWidth, kHiddenWidth, kHiddenWidth, kGenOutputDim};
  model.net = learn::Mlp::init(widths, init_stream);

  learn::OptimizerState opt = learn::OptimizerState::create(model.net);
  opt.total_epochs = static_cast<double>(epochs);
  const std::size_t batch_size = 32;
  std::size_t n = examples.size();
  std::size_t steps_per_epoch = (n + batch_size - 1) / batch_size;

  learn::Mlp::Gradients grads = model.net.zero_gradients();
  std::vector<double> tail_losses;
  long global_step = 0;

  for (int epoch = 0; epoch < epochs; ++epoch) {
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    rng::Stream shuffle(seed, rng::Tag::kGeneratorShuffle, static_cast<std::uint64_t>(epoch));
    for (std::size_t i = n; i > 1; --i)
      std::swap(order[i - 1], order[static_cast<std::size_t>(shuffle.uniform_index(i))]);

    double epoch_loss = 0.0;
    std::size_t batches = 0;
    try {
      for (std::size_t start = 0; start < n; start += batch_size) {
        std::size_t end = std::min(start + batch_size, n);
        std::vector<TrainingExample> batch;
        std::vector<FlowDraw> draws;
        batch.reserve(end - start);
        draws.reserve(end - start);
        for (std::size_t i = start; i < end; ++i) {
          batch.push_back(examples[order[i]]);
          rng::Stream draw_stream(seed, rng::Tag::kFlowDraw, static_cast<std::uint64_t>(epoch),
                                  static_cast<std::uint64_t>(i));
          draws.push_back(make_draw(model, draw_stream));
        }
        grads.zero();
        FlowLoss loss = fm_loss(model, batch, draws, &grads);
        double epoch_real = static_cast<double>(global_step) / static_cast<double>(steps_per_epoch);
        learn::step(opt, model.net, grads, epoch_real);
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

std::vector<double> guided_velocity(const FlowModel& model, std::span<const double> x, double t,
                                    std::span<const double> condition, double w) {
  auto eval = [&](bool unconditional) {
    std::vector<double> out = model.net.forward(build_input(x, t, condition, unconditional));
    out.resize(static_cast<std::size_t>(kVelocityDim));  // drop the raster head
    return out;
  };
  if (w == 1.0) return eval(false);
  if (w == 0.0) return eval(true);
  std::vector<double> v_cond = eval(false);
  std::vector<double> v_uncond = eval(true);
  for (int i = 0; i < kVelocityDim; ++i) {
    std::size_t k = static_cast<std::size_t>(i);
    v_uncond[k] = v_uncond[k] + w * (v_cond[k] - v_uncond[k]);
  }
  return v_uncond;
}

std::vector<Candidate> sample_candidates(const FlowModel& model, const scene::Scene& s,
                                         const SamplingConfig& cfg, std::uint64_t seed) {
  if (cfg.candidates < 1 || cfg.steps < 1 || cfg.guidance < 0.0 || cfg.sigma_scale < 0.0)
    throw ConfigError("invalid sampling config");
  std::vector<double> condition = scene::encode_condition(s);
  double sigma_sample = cfg.sigma_scale * model.prior_sigma;

  std::vector<Candidate> out(static_cast<std::size_t>(cfg.candidates));
  parallel_for(out.size(), [&](std::size_t i) {
    rng::Stream stream(seed, rng::Tag::kSample, s.scene_id, static_cast<std::uint64_t>(i));
    std::vector<double> x(static_cast<std::size_t>(kDiffDim));
    for (double& v : x) v = sigma_sample * stream.normal();

    double dt = 1.0 / cfg.steps;
    for (int n = 0; n < cfg.steps; ++n) {
      double t = n * dt;  // velocity at the interval start
      std::vector<double> v = guided_velocity(model, x, t, condition, cfg.guidance);
      for (int d = 0; d < kDiffDim; ++d) x[static_cast<std::size_t>(d)] += v[static_cast<std::size_t>(d)] * dt;
    }

    traj::DiffTrajectory diff = traj::DiffTrajectory::unflatten(x, true);
    traj::Decoded decoded = traj::from_diff_lenient(model.standardizer.destandardize(diff));
    out[i] = {decoded.trajectory, decoded.degenerate_heading};
  });
  return out;
}

learn::Checkpoint to_checkpoint(const FlowModel& model, std::int32_t epoch, std::uint64_t seed) {
  learn::Checkpoint ckpt;
  ckpt.kind = learn::kCheckpointGenerator;
  ckpt.net = model.net;
  ckpt.standardizer = model.standardizer;
  ckpt.epoch = epoch;
  ckpt.seed = seed;
  return ckpt;
}

FlowModel from_checkpoint(const learn::Checkpoint& ckpt) {
  if (ckpt.kind != learn::kCheckpointGenerator)
    throw IoError("checkpoint is not a generator model");
  FlowModel model;
  model.net = ckpt.net;
  model.standardizer = ckpt.standardizer;
  return model;
}

}  // namespace hnplan::flow
