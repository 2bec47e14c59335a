#include "hnplan/learner.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

namespace hnplan::learn {

static_assert(std::endian::native == std::endian::little,
              "checkpoint codec assumes a little-endian host");

namespace {

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }
inline double silu(double x) { return x * sigmoid(x); }
inline double silu_grad(double x) {
  double s = sigmoid(x);
  return s * (1.0 + x * (1.0 - s));
}

}  // namespace

Mlp Mlp::init(std::span<const int> widths, rng::Stream& stream) {
  if (widths.size() < 2) throw ShapeMismatch("MLP needs at least one layer");
  Mlp net;
  net.widths_.assign(widths.begin(), widths.end());
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    int fan_in = widths[l];
    int fan_out = widths[l + 1];
    double bound = std::sqrt(6.0 / (fan_in + fan_out));
    std::vector<double> w(static_cast<std::size_t>(fan_in) * fan_out);
    for (double& x : w) x = stream.uniform(-bound, bound);
    net.weights_.push_back(std::move(w));
    net.biases_.push_back(std::vector<double>(static_cast<std::size_t>(fan_out), 0.0));
  }
  return net;
}

std::vector<double> Mlp::forward(std::span<const double> input) const {
  if (static_cast<int>(input.size()) != input_dim())
    throw ShapeMismatch("forward: input width mismatch");
  std::vector<double> x(input.begin(), input.end());
  std::vector<double> next;
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    int n_in = widths_[l];
    int n_out = widths_[l + 1];
    next.assign(static_cast<std::size_t>(n_out), 0.0);
    const double* w = weights_[l].data();
    for (int o = 0; o < n_out; ++o) {
      double acc = biases_[l][static_cast<std::size_t>(o)];
      const double* row = w + static_cast<std::size_t>(o) * n_in;
      for (int i = 0; i < n_in; ++i) acc += row[i] * x[static_cast<std::size_t>(i)];
      next[static_cast<std::size_t>(o)] = acc;
    }
    if (l + 1 < weights_.size())
      for (double& v : next) v = silu(v);
    x.swap(next);
  }
  return x;
}

Mlp::Trace Mlp::forward_trace(std::span<const double> input) const {
  if (static_cast<int>(input.size()) != input_dim())
    throw ShapeMismatch("forward_trace: input width mismatch");
  Trace tr;
  tr.inputs.reserve(weights_.size());
  tr.pre.reserve(weights_.size());
  std::vector<double> x(input.begin(), input.end());
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    tr.inputs.push_back(x);
    int n_in = widths_[l];
    int n_out = widths_[l + 1];
    std::vector<double> pre(static_cast<std::size_t>(n_out), 0.0);
    const double* w = weights_[l].data();
    for (int o = 0; o < n_out; ++o) {
      double acc = biases_[l][static_cast<std::size_t>(o)];
      const double* row = w + static_cast<std::size_t>(o) * n_in;
      for (int i = 0; i < n_in; ++i) acc += row[i] * x[static_cast<std::size_t>(i)];
      pre[static_cast<std::size_t>(o)] = acc;
    }
    tr.pre.push_back(pre);
    if (l + 1 < weights_.size()) {
      x.resize(pre.size());
      for (std::size_t i = 0; i < pre.size(); ++i) x[i] = silu(pre[i]);
    } else {
      x = pre;
    }
  }
  tr.output = x;
  return tr;
}

void Mlp::Gradients::zero() {
  for (auto& layer : w) std::fill(layer.begin(), layer.end(), 0.0);
  for (auto& layer : b) std::fill(layer.begin(), layer.end(), 0.0);
}

void Mlp::Gradients::scale(double f) {
  for (auto& layer : w)
    for (double& v : layer) v *= f;
  for (auto& layer : b)
    for (double& v : layer) v *= f;
}

bool Mlp::Gradients::is_finite() const {
  for (const auto& layer : w)
    for (double v : layer)
      if (!std::isfinite(v)) return false;
  for (const auto& layer : b)
    for (double v : layer)
      if (!std::isfinite(v)) return false;
  return true;
}

Mlp::Gradients Mlp::zero_gradients() const {
  Gradients g;
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    g.w.emplace_back(weights_[l].size(), 0.0);
    g.b.emplace_back(biases_[l].size(), 0.0);
  }
  return g;
}

std::vector<double> Mlp::backward(const Trace& trace, std::span<const double> upstream,
                                  Gradients* grads) const {
  if (static_cast<int>(upstream.size()) != output_dim())
    throw ShapeMismatch("backward: upstream width mismatch");
  if (trace.inputs.size() != weights_.size())
    throw ShapeMismatch("backward: trace does not match network depth");

  std::vector<double> delta(upstream.begin(), upstream.end());
  for (std::size_t li = weights_.size(); li-- > 0;) {
    int n_in = widths_[li];
    int n_out = widths_[li + 1];
    // Output layer is linear; hidden layers carry the silu derivative.
    if (li + 1 < weights_.size())
      for (int o = 0; o < n_out; ++o)
        delta[static_cast<std::size_t>(o)] *= silu_grad(trace.pre[li][static_cast<std::size_t>(o)]);

    const std::vector<double>& layer_in = trace.inputs[li];
    if (grads) {
      double* gw = grads->w[li].data();
      for (int o = 0; o < n_out; ++o) {
        double d = delta[static_cast<std::size_t>(o)];
        grads->b[li][static_cast<std::size_t>(o)] += d;
        double* row = gw + static_cast<std::size_t>(o) * n_in;
        for (int i = 0; i < n_in; ++i) row[i] += d * layer_in[static_cast<std::size_t>(i)];
      }
    }

    std::vector<double> prev(static_cast<std::size_t>(n_in), 0.0);
    const double* w = weights_[li].data();
    for (int o = 0; o < n_out; ++o) {
      double d = delta[static_cast<std::size_t>(o)];
      const double* row = w + static_cast<std::size_t>(o) * n_in;
      for (int i = 0; i < n_in; ++i) prev[static_cast<std::size_t>(i)] += row[i] * d;
    }
    delta.swap(prev);
  }
  return delta;
}

bool Mlp::is_finite() const {
  for (const auto& layer : weights_)
    for (double v : layer)
      if (!std::isfinite(v)) return false;
  for (const auto& layer : biases_)
    for (double v : layer)
      if (!std::isfinite(v)) return false;
  return true;
}

std::size_t Mlp::parameter_count() const {
  std::size_t n = 0;
  for (std::size_t l = 0; l < weights_.size(); ++l) n += weights_[l].size() + biases_[l].size();
  return n;
}

double Mlp::get_parameter(std::size_t flat_index) const {
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    if (flat_index < weights_[l].size()) return weights_[l][flat_index];
    flat_index -= weights_[l].size();
    if (flat_index < biases_[l].size()) return biases_[l][flat_index];
    flat_index -= biases_[l].size();
  }
  throw ShapeMismatch("parameter index out of range");
}

void Mlp::set_parameter(std::size_t flat_index, double value) {
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    if (flat_index < weights_[l].size()) {
      weights_[l][flat_index] = value;
      return;
    }
    flat_index -= weights_[l].size();
    if (flat_index < biases_[l].size()) {
      biases_[l][flat_index] = value;
      return;
    }
    flat_index -= biases_[l].size();
  }
  throw ShapeMismatch("parameter index out of range");
}

std::array<double, kTimeEmbedDim> time_embedding(double t) {
  std::array<double, kTimeEmbedDim> e{};
  int idx = 0;
  for (double f : {1.0, 2.0, 4.0, 8.0}) {
    e[static_cast<std::size_t>(idx++)] = std::sin(2.0 * M_PI * f * t);
    e[static_cast<std::size_t>(idx++)] = std::cos(2.0 * M_PI * f * t);
  }
  return e;
}

OptimizerState OptimizerState::create(const Mlp& net) {
  OptimizerState s;
  s.m = net.zero_gradients();
  s.v = net.zero_gradients();
  return s;
}

double lr_at(const OptimizerState& state, double epoch) {
  if (epoch < 0.0) epoch = 0.0;
  if (epoch < state.warmup_epochs) return state.peak_lr * (epoch / state.warmup_epochs);
  double span = state.total_epochs - state.warmup_epochs;
  double u = std::min((epoch - state.warmup_epochs) / span, 1.0);
  return state.peak_lr * 0.5 * (1.0 + std::cos(M_PI * u));
}

void step(OptimizerState& state, Mlp& net, const Mlp::Gradients& grads, double epoch) {
  if (!grads.is_finite()) throw NonFiniteGradient("non-finite gradient in optimizer step");
  double lr = lr_at(state, epoch);
  state.step_count += 1;
  double t = static_cast<double>(state.step_count);
  double bc1 = 1.0 - std::pow(state.beta1, t);
  double bc2 = 1.0 - std::pow(state.beta2, t);

  for (std::size_t l = 0; l < grads.w.size(); ++l) {
    auto update = [&](std::vector<double>& params, const std::vector<double>& g,
                      std::vector<double>& m, std::vector<double>& v) {
      for (std::size_t i = 0; i < params.size(); ++i) {
        m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g[i];
        v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g[i] * g[i];
        double m_hat = m[i] / bc1;
        double v_hat = v[i] / bc2;
        params[i] -= lr * m_hat / (std::sqrt(v_hat) + state.eps);
      }
    };
    update(net.weight(l), grads.w[l], state.m.w[l], state.v.w[l]);
    update(net.bias(l), grads.b[l], state.m.b[l], state.v.b[l]);
  }
}

// ---------------------------------------------------------------------------
// Checkpoint codec.

namespace {

void put_bytes(std::ofstream& f, const void* p, std::size_t n) {
  f.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
}

void put_i32(std::ofstream& f, std::int32_t v) { put_bytes(f, &v, 4); }
void put_f32(std::ofstream& f, float v) { put_bytes(f, &v, 4); }
void put_u64(std::ofstream& f, std::uint64_t v) { put_bytes(f, &v, 8); }

void get_bytes(std::ifstream& f, void* p, std::size_t n) {
  f.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
  if (!f) throw IoError("checkpoint truncated");
}

std::int32_t get_i32(std::ifstream& f) {
  std::int32_t v;
  get_bytes(f, &v, 4);
  return v;
}
float get_f32(std::ifstream& f) {
  float v;
  get_bytes(f, &v, 4);
  return v;
}
std::uint64_t get_u64(std::ifstream& f) {
  std::uint64_t v;
  get_bytes(f, &v, 8);
  return v;
}

constexpr char kMagic[5] = {'H', 'N', 'P', 'L', '1'};

}  // namespace

struct CheckpointCodec {
  static void save(const std::filesystem::path& path, const Checkpoint& ckpt) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open for writing: " + path.string());
    put_bytes(f, kMagic, sizeof kMagic);
    put_bytes(f, &ckpt.kind, 1);
    const auto& widths = ckpt.net.widths_;
    put_i32(f, static_cast<std::int32_t>(ckpt.net.layer_count()));
    for (int w : widths) put_i32(f, w);
    for (std::size_t l = 0; l < ckpt.net.layer_count(); ++l) {
      for (double v : ckpt.net.weights_[l]) put_f32(f, static_cast<float>(v));
      for (double v : ckpt.net.biases_[l]) put_f32(f, static_cast<float>(v));
    }
    for (double v : ckpt.standardizer.mean) put_f32(f, static_cast<float>(v));
    for (double v : ckpt.standardizer.std) put_f32(f, static_cast<float>(v));
    put_i32(f, ckpt.epoch);
    put_u64(f, ckpt.seed);
    if (!f) throw IoError("write failed: " + path.string());
  }

  static Checkpoint load(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open: " + path.string());
    char magic[5];
    get_bytes(f, magic, 5);
    if (std::memcmp(magic, kMagic, 5) != 0)
      throw IoError("bad checkpoint magic in " + path.string());
    Checkpoint ckpt;
    get_bytes(f, &ckpt.kind, 1);
    std::int32_t layers = get_i32(f);
    if (layers < 1 || layers > 64) throw IoError("implausible layer count");
    ckpt.net.widths_.resize(static_cast<std::size_t>(layers) + 1);
    for (auto& w : ckpt.net.widths_) {
      w = get_i32(f);
      if (w < 1 || w > 1 << 20) throw IoError("implausible layer width");
    }
    for (std::int32_t l = 0; l < layers; ++l) {
      std::size_t n_in = static_cast<std::size_t>(ckpt.net.widths_[static_cast<std::size_t>(l)]);
      std::size_t n_out = static_cast<std::size_t>(ckpt.net.widths_[static_cast<std::size_t>(l) + 1]);
      std::vector<double> w(n_in * n_out);
      for (double& v : w) v = get_f32(f);
      std::vector<double> b(n_out);
      for (double& v : b) v = get_f32(f);
      ckpt.net.weights_.push_back(std::move(w));
      ckpt.net.biases_.push_back(std::move(b));
    }
    for (double& v : ckpt.standardizer.mean) v = get_f32(f);
    for (double& v : ckpt.standardizer.std) v = get_f32(f);
    ckpt.epoch = get_i32(f);
    ckpt.seed = get_u64(f);
    return ckpt;
  }
};

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  CheckpointCodec::save(path, ckpt);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  return CheckpointCodec::load(path);
}

}  // namespace hnplan::learn
