#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "hnplan/common.hpp"
#include "hnplan/rng.hpp"
#include "hnplan/trajectory.hpp"

namespace hnplan::learn {

// Dense stack with x*sigmoid(x) hidden activations and an identity output
// layer. Weights are row-major (out x in), double precision in memory.
class Mlp {
 public:
  Mlp() = default;
  static Mlp init(std::span<const int> widths, rng::Stream& stream);

  int input_dim() const { return widths_.empty() ? 0 : widths_.front(); }
  int output_dim() const { return widths_.empty() ? 0 : widths_.back(); }
  std::size_t layer_count() const { return weights_.size(); }
  const std::vector<int>& widths() const { return widths_; }

  std::vector<double>& weight(std::size_t layer) { return weights_[layer]; }
  std::vector<double>& bias(std::size_t layer) { return biases_[layer]; }
  const std::vector<double>& weight(std::size_t layer) const { return weights_[layer]; }
  const std::vector<double>& bias(std::size_t layer) const { return biases_[layer]; }

  std::vector<double> forward(std::span<const double> input) const;

  // Activations kept from a forward pass for reverse mode.
  struct Trace {
    std::vector<std::vector<double>> inputs;  // per-layer input vectors
    std::vector<std::vector<double>> pre;     // per-layer pre-activations
    std::vector<double> output;
  };
  Trace forward_trace(std::span<const double> input) const;

  struct Gradients {
    std::vector<std::vector<double>> w;
    std::vector<std::vector<double>> b;
    void zero();
    void scale(double f);
    bool is_finite() const;
  };
  Gradients zero_gradients() const;

  // Exact reverse-mode gradients of the forward arithmetic. Accumulates into
  // grads (when non-null) and returns the input gradient.
  std::vector<double> backward(const Trace& trace, std::span<const double> upstream,
                               Gradients* grads) const;

  bool is_finite() const;

  // Flat parameter views used by the optimizer and tests.
  std::size_t parameter_count() const;
  double get_parameter(std::size_t flat_index) const;
  void set_parameter(std::size_t flat_index, double value);

 private:
  std::vector<int> widths_;
  std::vector<std::vector<double>> weights_;
  std::vector<std::vector<double>> biases_;

  friend struct CheckpointCodec;
};

inline constexpr int kTimeEmbedDim = 8;
// Sinusoidal features of t in [0,1] at frequencies {1, 2, 4, 8}.
std::array<double, kTimeEmbedDim> time_embedding(double t);

// Adaptive-moment optimizer with the warmup-then-cosine schedule baked in.
struct OptimizerState {
  double peak_lr = 2e-4;
  double warmup_epochs = 3.0;
  double total_epochs = 100.0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  long step_count = 0;
  Mlp::Gradients m;
  Mlp::Gradients v;

  static OptimizerState create(const Mlp& net);
};

// Linear warmup to the peak over [0, warmup), then cosine decay to zero at
// total_epochs. Continuous on the whole range.
double lr_at(const OptimizerState& state, double epoch);

// One update at lr_at(epoch); throws NonFiniteGradient on bad gradients.
void step(OptimizerState& state, Mlp& net, const Mlp::Gradients& grads, double epoch);

inline constexpr std::uint8_t kCheckpointGenerator = 0x01;
inline constexpr std::uint8_t kCheckpointPolicy = 0x02;

// Binary checkpoint: "HNPL1" magic, model-kind byte, LE int32 layer count and
// widths, row-major LE float32 weights then biases per layer, standardizer
// (32 means + 32 stds as float32), then epoch (int32) and seed (int64).
struct Checkpoint {
  std::uint8_t kind = 0;
  Mlp net;
  traj::Standardizer standardizer;
  std::int32_t epoch = 0;
  std::uint64_t seed = 0;
};

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace hnplan::learn
