#include <catch_amalgamated.hpp>

#include <functional>

#include "fundacast/autodiff.hpp"
#include "fundacast/random.hpp"
#include "oracles.hpp"

using namespace fundacast;
namespace ad = fundacast::ad;

namespace {

using Build = std::function<ad::Var(ad::Graph&, const std::vector<ad::Var>&)>;

Tensor random_tensor(Rng& rng, Shape shape, double scale = 1.0) {
  Tensor t(std::move(shape));
  for (auto& v : t.values()) v = rng.uniform(-scale, scale);
  return t;
}

/// Worst finite-difference error of d(build)/d(leaves).
double worst_gradient_error(const Build& build, std::vector<Tensor> leaves) {
  ad::Graph g;
  std::vector<ad::Var> vars;
  for (const auto& t : leaves) vars.push_back(g.leaf(t));
  g.backward(build(g, vars));
  std::vector<Tensor> analytic;
  for (const auto& v : vars) analytic.push_back(g.has_grad(v.id) ? g.grad(v.id) : Tensor(v.shape()));

  auto eval = [&] {
    ad::Graph h;
    std::vector<ad::Var> vs;
    for (const auto& t : leaves) vs.push_back(h.constant(t));
    return build(h, vs).value()[0];
  };
  double worst = 0.0;
  for (std::size_t k = 0; k < leaves.size(); ++k) {
    for (std::size_t i = 0; i < leaves[k].size(); ++i) {
      const double saved = leaves[k][i];
      leaves[k][i] = saved + oracle::kFiniteDifferenceStep;
      const double up = eval();
      leaves[k][i] = saved - oracle::kFiniteDifferenceStep;
      const double down = eval();
      leaves[k][i] = saved;
      worst = std::max(worst, oracle::gradient_error(analytic[k][i], (up - down) / (2 * oracle::kFiniteDifferenceStep)));
    }
  }
  return worst;
}

std::vector<double> random_targets(Rng& rng, std::size_t n) {
  std::vector<double> t(n);
  for (auto& v : t) v = rng.uniform(-1.0, 1.0);
  return t;
}

/// The same LSTM layer written with the generic ops, used to check the
/// fused kernel. Returns every hidden state.
std::vector<ad::Var> composed_lstm(ad::Graph& g, ad::Var x, ad::Var wi, ad::Var wh, ad::Var b) {
  const std::size_t n = x.value().dim(0), len = x.value().dim(1), h = wh.value().dim(0);
  ad::Var hidden = g.constant(Tensor({n, h}));
  ad::Var cell = g.constant(Tensor({n, h}));
  std::vector<ad::Var> out;
  for (std::size_t t = 0; t < len; ++t) {
    ad::Var z = ad::add_bias(ad::add(ad::matmul(ad::sequence_step(x, t), wi), ad::matmul(hidden, wh)), b);
    ad::Var i = ad::sigmoid(ad::slice_cols(z, 0, h));
    ad::Var f = ad::sigmoid(ad::slice_cols(z, h, h));
    ad::Var c = ad::tanh(ad::slice_cols(z, 2 * h, h));
    ad::Var o = ad::sigmoid(ad::slice_cols(z, 3 * h, h));
    cell = ad::add(ad::mul(f, cell), ad::mul(i, c));
    hidden = ad::mul(o, ad::tanh(cell));
    out.push_back(hidden);
  }
  return out;
}

ad::Var sum_of(ad::Var first, const std::vector<ad::Var>& rest) {
  ad::Var acc = first;
  for (const auto& v : rest) acc = ad::weighted_sum(acc, 1.0, v, 1.0);
  return acc;
}

}  // namespace

TEST_CASE("tensor shape contract", "[autodiff]") {
  CHECK_THROWS_AS(Tensor({2, 3}, std::vector<double>(5)), ShapeError);
  const Tensor t({2, 3}, std::vector<double>{1, 2, 3, 4, 5, 6});
  CHECK(t.reshaped({3, 2}).values() == t.values());
  CHECK_THROWS_AS(t.reshaped({4, 2}), ShapeError);
}

TEST_CASE("elementwise and dense op gradients", "[autodiff]") {
  Rng rng(1);
  for (int trial = 0; trial < 5; ++trial) {
    const auto y = random_targets(rng, 6);
    CHECK(worst_gradient_error(
              [&](ad::Graph&, const std::vector<ad::Var>& v) {
                ad::Var a = ad::dense(v[0], v[1], v[2]);
                ad::Var s = ad::add(ad::mul(ad::sigmoid(a), ad::tanh(a)), ad::relu(a));
                return ad::mse(s, y);
              },
              {random_tensor(rng, {3, 4}), random_tensor(rng, {4, 2}), random_tensor(rng, {2})}) <= 1e-6);
    CHECK(worst_gradient_error(
              [&](ad::Graph&, const std::vector<ad::Var>& v) {
                return ad::mse(ad::reshape(ad::slice_cols(v[0], 1, 3), {6}), y);
              },
              {random_tensor(rng, {2, 5})}) <= 1e-6);
  }
}

TEST_CASE("convolution and pooling", "[autodiff]") {
  ad::Graph g;
  SECTION("max pool picks window maxima and drops a trailing partial window") {
    auto x = g.constant(Tensor({1, 1, 5}, std::vector<double>{1, 3, 2, 5, 9}));
    CHECK(ad::max_pool1d(x, 2).value().values() == std::vector<double>{3, 5});
  }
  SECTION("zero kernels leave only the bias pattern") {
    Rng rng(2);
    auto x = g.constant(random_tensor(rng, {2, 1, 8}));
    auto w = g.constant(Tensor({3, 1, 3}));
    auto b = g.constant(Tensor({3}, std::vector<double>{0.5, -1.0, 2.0}));
    const auto out = ad::conv1d_same(x, w, b).value();
    REQUIRE(out.shape() == Shape{2, 3, 8});
    for (std::size_t s = 0; s < 2; ++s)
      for (std::size_t c = 0; c < 3; ++c)
        for (std::size_t t = 0; t < 8; ++t) CHECK(out[(s * 3 + c) * 8 + t] == b.value()[c]);
  }
  SECTION("same padding") {
    auto x = g.constant(Tensor({1, 1, 4}, std::vector<double>{1, 2, 3, 4}));
    auto w = g.constant(Tensor({1, 1, 3}, std::vector<double>{1, 1, 1}));
    auto b = g.constant(Tensor({1}));
    CHECK(ad::conv1d_same(x, w, b).value().values() == std::vector<double>{3, 6, 9, 7});
  }
  SECTION("gradients") {
    Rng rng(3);
    for (int trial = 0; trial < 5; ++trial) {
      const auto y = random_targets(rng, 2 * 3 * 4);
      CHECK(worst_gradient_error(
                [&](ad::Graph&, const std::vector<ad::Var>& v) {
                  return ad::mse(ad::reshape(ad::max_pool1d(ad::conv1d_same(v[0], v[1], v[2]), 2), {24}), y);
                },
                {random_tensor(rng, {2, 2, 8}), random_tensor(rng, {3, 2, 3}), random_tensor(rng, {3})}) <= 1e-6);
    }
  }
}

TEST_CASE("fused LSTM agrees with the composed-op LSTM", "[autodiff]") {
  Rng rng(4);
  for (int trial = 0; trial < 5; ++trial) {
    const std::size_t n = 3, len = 4, in = 2, h = 3;
    std::vector<Tensor> leaves = {random_tensor(rng, {n, len, in}), random_tensor(rng, {in, 4 * h}),
                                  random_tensor(rng, {h, 4 * h}), random_tensor(rng, {4 * h})};
    std::vector<std::vector<double>> targets;
    for (std::size_t t = 0; t < len; ++t) targets.push_back(random_targets(rng, n * h));

    auto run = [&](bool fused, std::vector<Tensor>& grads) {
      ad::Graph g;
      std::vector<ad::Var> v;
      for (const auto& t : leaves) v.push_back(g.leaf(t));
      std::vector<ad::Var> steps;
      if (fused) {
        const auto seq = ad::lstm_sequence(v[0], v[1], v[2], v[3]);
        for (std::size_t t = 0; t < len; ++t) steps.push_back(ad::sequence_step(seq, t));
      } else {
        steps = composed_lstm(g, v[0], v[1], v[2], v[3]);
      }
      std::vector<ad::Var> losses;
      for (std::size_t t = 1; t < len; ++t) losses.push_back(ad::mse(steps[t], targets[t]));
      const auto total = sum_of(ad::mse(steps[0], targets[0]), losses);
      g.backward(total);
      for (const auto& var : v) grads.push_back(g.grad(var.id));
      std::vector<double> hidden;
      for (const auto& s : steps) hidden.insert(hidden.end(), s.value().values().begin(), s.value().values().end());
      return hidden;
    };
    std::vector<Tensor> g_fused, g_composed;
    const auto h_fused = run(true, g_fused);
    const auto h_composed = run(false, g_composed);
    REQUIRE(h_fused.size() == h_composed.size());
    for (std::size_t i = 0; i < h_fused.size(); ++i) CHECK(std::abs(h_fused[i] - h_composed[i]) <= 1e-14);
    for (std::size_t k = 0; k < g_fused.size(); ++k) {
      for (std::size_t i = 0; i < g_fused[k].size(); ++i) {
        CHECK(std::abs(g_fused[k][i] - g_composed[k][i]) <= 1e-12 * std::max(1.0, std::abs(g_composed[k][i])));
      }
    }
  }
}

TEST_CASE("fused LSTM gradient matches finite differences", "[autodiff]") {
  Rng rng(5);
  for (int trial = 0; trial < 5; ++trial) {
    const auto y = random_targets(rng, 2 * 3);
    CHECK(worst_gradient_error(
              [&](ad::Graph&, const std::vector<ad::Var>& v) {
                return ad::mse(ad::sequence_step(ad::lstm_sequence(v[0], v[1], v[2], v[3]), 3), y);
              },
              {random_tensor(rng, {2, 4, 1}), random_tensor(rng, {1, 12}), random_tensor(rng, {3, 12}),
               random_tensor(rng, {12})}) <= oracle::kGradientTolerance);
  }
}

TEST_CASE("losses", "[autodiff]") {
  ad::Graph g;
  const std::vector<double> one = {1.0};
  CHECK(ad::bce(g.constant(Tensor({1}, std::vector<double>{0.5})), one).value()[0] ==
        Catch::Approx(std::log(2.0)).epsilon(1e-15));
  CHECK(ad::bce_with_logits(g.constant(Tensor({1}, std::vector<double>{0.0})), one).value()[0] ==
        Catch::Approx(std::log(2.0)).epsilon(1e-15));
  const std::vector<double> y = {0.3, -2.0};
  CHECK(ad::mse(g.constant(Tensor({2}, y)), y).value()[0] == 0.0);

  // logit-space and probability-space BCE agree in value and gradient
  Rng rng(6);
  for (int trial = 0; trial < 200; ++trial) {
    const Tensor z = random_tensor(rng, {5}, 8.0);
    std::vector<double> labels(5);
    for (auto& l : labels) l = rng.uniform() < 0.5 ? 1.0 : 0.0;
    ad::Graph a, b;
    auto za = a.leaf(z), zb = b.leaf(z);
    auto la = ad::bce_with_logits(za, labels);
    auto lb = ad::bce(ad::sigmoid(zb), labels);
    CHECK(la.value()[0] == Catch::Approx(lb.value()[0]).epsilon(1e-9));
    a.backward(la);
    b.backward(lb);
    for (std::size_t i = 0; i < 5; ++i) CHECK(a.grad(za.id)[i] == Catch::Approx(b.grad(zb.id)[i]).epsilon(1e-7).margin(1e-12));
  }
  // huge logits stay finite
  const std::vector<double> zero = {0.0};
  CHECK(std::isfinite(ad::bce_with_logits(g.constant(Tensor({1}, std::vector<double>{800.0})), zero).value()[0]));
}

TEST_CASE("backward needs a scalar root", "[autodiff]") {
  ad::Graph g;
  auto x = g.leaf(Tensor({2}));
  CHECK_THROWS_AS(g.backward(ad::sigmoid(x)), ShapeError);
  CHECK_THROWS_AS(ad::matmul(g.leaf(Tensor({2, 3})), g.leaf(Tensor({2, 3}))), ShapeError);
}
