#include <cmath>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "hnplan/learner.hpp"
#include "oracles.hpp"

using namespace hnplan;
using namespace hnplan::learn;

namespace {

Mlp make_net(std::initializer_list<int> widths, std::uint64_t seed) {
  rng::Stream st(seed, rng::Tag::kTest);
  std::vector<int> w(widths);
  return Mlp::init(w, st);
}

std::vector<double> random_input(int n, rng::Stream& st) {
  std::vector<double> x(static_cast<std::size_t>(n));
  for (double& v : x) v = st.normal();
  return x;
}

}  // namespace

TEST_CASE("zeroed network maps everything to zero") {
  Mlp net = make_net({5, 8, 3}, 1);
  for (std::size_t i = 0; i < net.parameter_count(); ++i) net.set_parameter(i, 0.0);
  auto out = net.forward(std::vector<double>{1.0, -2.0, 0.5, 3.0, -1.0});
  for (double v : out) CHECK(v == 0.0);
}

TEST_CASE("identity linear layer") {
  Mlp net = make_net({4, 4}, 2);
  for (std::size_t i = 0; i < net.parameter_count(); ++i) net.set_parameter(i, 0.0);
  for (int i = 0; i < 4; ++i) net.weight(0)[static_cast<std::size_t>(i * 4 + i)] = 1.0;
  std::vector<double> x{0.3, -1.2, 5.0, 0.0};
  auto out = net.forward(x);
  for (int i = 0; i < 4; ++i) CHECK(out[static_cast<std::size_t>(i)] == x[static_cast<std::size_t>(i)]);
}

TEST_CASE("forward matches an independent re-implementation") {
  rng::Stream st(3, rng::Tag::kTest);
  for (int trial = 0; trial < 20; ++trial) {
    Mlp net = make_net({7, 11, 5}, 100 + static_cast<std::uint64_t>(trial));
    auto x = random_input(7, st);
    auto got = net.forward(x);
    auto expected = oracles::naive_mlp_forward(net, x);
    REQUIRE(got.size() == expected.size());
    for (std::size_t i = 0; i < got.size(); ++i)
      CHECK(got[i] == doctest::Approx(expected[i]).epsilon(1e-12));
  }
}

TEST_CASE("shape mismatches are rejected") {
  Mlp net = make_net({4, 4}, 4);
  CHECK_THROWS_AS(net.forward(std::vector<double>{1.0, 2.0}), ShapeMismatch);
}

TEST_CASE("linear layer gradient has the closed form") {
  // loss = 0.5 * ||W x + b||^2  =>  dW = out * x^T, db = out.
  Mlp net = make_net({3, 2}, 5);
  std::vector<double> x{1.0, -0.5, 2.0};
  auto trace = net.forward_trace(x);
  auto grads = net.zero_gradients();
  net.backward(trace, trace.output, &grads);
  for (int o = 0; o < 2; ++o) {
    CHECK(grads.b[0][static_cast<std::size_t>(o)] ==
          doctest::Approx(trace.output[static_cast<std::size_t>(o)]));
    for (int i = 0; i < 3; ++i)
      CHECK(grads.w[0][static_cast<std::size_t>(o * 3 + i)] ==
            doctest::Approx(trace.output[static_cast<std::size_t>(o)] * x[static_cast<std::size_t>(i)]));
  }
}

TEST_CASE("zero upstream gradient produces zero parameter gradients") {
  Mlp net = make_net({6, 9, 4}, 6);
  rng::Stream st(7, rng::Tag::kTest);
  auto trace = net.forward_trace(random_input(6, st));
  auto grads = net.zero_gradients();
  std::vector<double> upstream(4, 0.0);
  net.backward(trace, upstream, &grads);
  for (const auto& layer : grads.w)
    for (double v : layer) CHECK(v == 0.0);
  for (const auto& layer : grads.b)
    for (double v : layer) CHECK(v == 0.0);
}

TEST_CASE("finite differences confirm gradients on the deployed architectures") {
  // Smooth probe loss: 0.5 * ||out||^2.
  rng::Stream st(8, rng::Tag::kTest);
  const std::vector<std::vector<int>> architectures = {
      {90, 256, 256, 288},  // generator
      {49, 256, 256, 288},  // policy
  };
  for (const auto& widths : architectures) {
    for (int trial = 0; trial < 50; ++trial) {
      rng::Stream init(static_cast<std::uint64_t>(trial), rng::Tag::kTest, 77);
      Mlp net = Mlp::init(widths, init);
      auto x = random_input(widths.front(), st);

      auto trace = net.forward_trace(x);
      auto grads = net.zero_gradients();
      net.backward(trace, trace.output, &grads);
      auto flat = oracles::flatten_gradients(grads);

      auto dir = oracles::random_unit_direction(net.parameter_count(), st);
      double analytic = 0.0;
      for (std::size_t i = 0; i < flat.size(); ++i) analytic += flat[i] * dir[i];

      auto loss = [&]() {
        auto out = net.forward(x);
        double acc = 0.0;
        for (double v : out) acc += 0.5 * v * v;
        return acc;
      };
      double fd = oracles::directional_fd(net, dir, 1e-3, loss);
      CHECK(std::abs(fd - analytic) <= 1e-4 * std::max(1.0, std::abs(analytic)));
    }
  }
}

TEST_CASE("input gradients are exact") {
  Mlp net = make_net({5, 7, 2}, 9);
  rng::Stream st(10, rng::Tag::kTest);
  auto x = random_input(5, st);
  auto trace = net.forward_trace(x);
  std::vector<double> upstream{1.0, -2.0};
  auto in_grad = net.backward(trace, upstream, nullptr);

  for (int i = 0; i < 5; ++i) {
    double h = 1e-6;
    auto xp = x;
    xp[static_cast<std::size_t>(i)] += h;
    auto xm = x;
    xm[static_cast<std::size_t>(i)] -= h;
    auto up = net.forward(xp);
    auto dn = net.forward(xm);
    double fd = ((up[0] - dn[0]) * 1.0 + (up[1] - dn[1]) * -2.0) / (2.0 * h);
    CHECK(in_grad[static_cast<std::size_t>(i)] == doctest::Approx(fd).epsilon(1e-5));
  }
}

TEST_CASE("learning-rate schedule") {
  OptimizerState st;
  CHECK(lr_at(st, 0.0) == 0.0);
  CHECK(lr_at(st, 3.0) == doctest::Approx(2e-4).epsilon(1e-15));
  CHECK(std::abs(lr_at(st, 100.0)) <= 1e-12);
  CHECK(lr_at(st, 1.5) == doctest::Approx(1e-4));

  // Continuity probe across the whole range, including the warmup knee.
  double prev = lr_at(st, 0.0);
  for (double e = 0.001; e <= 100.0; e += 0.001) {
    double cur = lr_at(st, e);
    CHECK(std::abs(cur - prev) < 1e-6);
    prev = cur;
  }
}

TEST_CASE("optimizer step basics") {
  Mlp net = make_net({1, 1}, 11);
  OptimizerState opt = OptimizerState::create(net);

  SUBCASE("zero gradients leave parameters unchanged") {
    double before = net.weight(0)[0];
    auto grads = net.zero_gradients();
    step(opt, net, grads, 10.0);
    CHECK(net.weight(0)[0] == before);
  }

  SUBCASE("positive gradient decreases the parameter") {
    double before = net.weight(0)[0];
    auto grads = net.zero_gradients();
    grads.w[0][0] = 1.0;
    step(opt, net, grads, 10.0);
    CHECK(net.weight(0)[0] < before);
  }

  SUBCASE("non-finite gradients are rejected") {
    auto grads = net.zero_gradients();
    grads.w[0][0] = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(step(opt, net, grads, 10.0), NonFiniteGradient);
  }
}

TEST_CASE("descent on a convex quadratic") {
  // Scalar parameter, loss = 0.5 (w - 3)^2, evaluated at a fixed epoch.
  Mlp net = make_net({1, 1}, 12);
  for (std::size_t i = 0; i < net.parameter_count(); ++i) net.set_parameter(i, 0.0);
  OptimizerState opt = OptimizerState::create(net);
  auto loss_of = [&]() {
    double w = net.weight(0)[0];
    return 0.5 * (w - 3.0) * (w - 3.0);
  };
  double prev = loss_of();
  for (int it = 0; it < 100; ++it) {
    auto grads = net.zero_gradients();
    grads.w[0][0] = net.weight(0)[0] - 3.0;
    step(opt, net, grads, 3.0);  // peak learning rate
    double cur = loss_of();
    CHECK(cur < prev);
    prev = cur;
  }
}

TEST_CASE("deterministic initialization and updates") {
  auto run = []() {
    Mlp net = make_net({6, 12, 4}, 13);
    OptimizerState opt = OptimizerState::create(net);
    rng::Stream st(14, rng::Tag::kTest);
    for (int it = 0; it < 25; ++it) {
      auto trace = net.forward_trace(random_input(6, st));
      auto grads = net.zero_gradients();
      net.backward(trace, trace.output, &grads);
      step(opt, net, grads, 5.0);
    }
    return net;
  };
  Mlp a = run();
  Mlp b = run();
  REQUIRE(a.parameter_count() == b.parameter_count());
  for (std::size_t i = 0; i < a.parameter_count(); ++i)
    CHECK(a.get_parameter(i) == b.get_parameter(i));
}

TEST_CASE("time embedding stays bounded") {
  for (double t : {0.0, 0.1, 0.33, 0.5, 0.9, 1.0}) {
    auto e = time_embedding(t);
    for (double v : e) {
      CHECK(v <= 1.0);
      CHECK(v >= -1.0);
    }
  }
}

TEST_CASE("checkpoint round trip") {
  namespace fs = std::filesystem;
  fs::path path = fs::temp_directory_path() / "hnplan_test_ckpt.bin";

  Checkpoint ckpt;
  ckpt.kind = kCheckpointPolicy;
  ckpt.net = make_net({5, 9, 3}, 15);
  rng::Stream st(16, rng::Tag::kTest);
  for (int i = 0; i < kDiffDim; ++i) {
    ckpt.standardizer.mean[static_cast<std::size_t>(i)] = st.normal();
    ckpt.standardizer.std[static_cast<std::size_t>(i)] = std::abs(st.normal()) + 0.1;
  }
  ckpt.epoch = 42;
  ckpt.seed = 0xDEADBEEFull;
  save_checkpoint(path, ckpt);

  Checkpoint back = load_checkpoint(path);
  CHECK(back.kind == ckpt.kind);
  CHECK(back.epoch == 42);
  CHECK(back.seed == 0xDEADBEEFull);
  CHECK(back.net.widths() == ckpt.net.widths());
  for (std::size_t i = 0; i < ckpt.net.parameter_count(); ++i)
    CHECK(back.net.get_parameter(i) == static_cast<double>(static_cast<float>(ckpt.net.get_parameter(i))));
  for (int i = 0; i < kDiffDim; ++i)
    CHECK(back.standardizer.mean[static_cast<std::size_t>(i)] ==
          static_cast<double>(static_cast<float>(ckpt.standardizer.mean[static_cast<std::size_t>(i)])));
  fs::remove(path);
}

TEST_CASE("corrupt checkpoints are rejected") {
  namespace fs = std::filesystem;
  fs::path path = fs::temp_directory_path() / "hnplan_bad_ckpt.bin";
  {
    std::ofstream f(path, std::ios::binary);
    f << "NOTACKPT";
  }
  CHECK_THROWS_AS(load_checkpoint(path), IoError);
  fs::remove(path);
  CHECK_THROWS_AS(load_checkpoint(path), IoError);  // missing file
}
