#include <doctest.h>

#include <cmath>
#include <random>

#include "plantcast/graph.hpp"
#include "test_util.hpp"

using namespace plantcast;
using namespace plantcast::nn;
using testutil::throws_code;

namespace {

Tensor random_matrix(std::size_t r, std::size_t c, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  Tensor t = Tensor::matrix(r, c);
  for (double& v : t.values()) v = n(rng);
  return t;
}

}  // namespace

TEST_CASE("softmax, layer norm and identity matmul") {
  Graph g;
  const Var s = g.softmax_rows(g.constant(Tensor::vector({0, 0, 0})));
  for (double v : g.value(s).values()) CHECK(v == doctest::Approx(1.0 / 3.0).epsilon(1e-15));

  const Var ln = g.layer_norm(g.constant(Tensor::vector({4, 4, 4, 4})));
  for (double v : g.value(ln).values()) CHECK(v == 0.0);

  std::mt19937_64 rng(2);
  const Tensor x = random_matrix(4, 5, rng);
  Tensor eye = Tensor::matrix(4, 4);
  for (std::size_t i = 0; i < 4; ++i) eye.at(i, i) = 1.0;
  CHECK(g.value(g.matmul(g.constant(eye), g.constant(x))) == x);
}

TEST_CASE("softmax rows are distributions; causal rows ignore the future") {
  std::mt19937_64 rng(3);
  Graph g;
  const Tensor x = random_matrix(6, 6, rng, 30.0);
  const Tensor p = g.value(g.softmax_rows(g.constant(x)));
  const Tensor c = g.value(g.causal_softmax(g.constant(x)));
  for (std::size_t r = 0; r < 6; ++r) {
    double sp = 0.0, sc = 0.0;
    for (std::size_t k = 0; k < 6; ++k) {
      CHECK(p.at(r, k) >= 0.0);
      sp += p.at(r, k);
      sc += c.at(r, k);
      if (k > r) CHECK(c.at(r, k) == 0.0);
    }
    CHECK(std::abs(sp - 1.0) < 1e-12);
    CHECK(std::abs(sc - 1.0) < 1e-12);
  }
}

TEST_CASE("layer norm rows are standardized") {
  std::mt19937_64 rng(4);
  Graph g;
  // Row variance >= 25 keeps the eps-induced shrink v/(v+1e-5) within 1e-6 of 1.
  const Tensor x = random_matrix(8, 32, rng, 10.0);
  const Tensor y = g.value(g.layer_norm(g.constant(x)));
  for (std::size_t r = 0; r < 8; ++r) {
    double mean = 0.0, var = 0.0, in_mean = 0.0, in_var = 0.0;
    for (double v : x.row(r)) in_mean += v / 32.0;
    for (double v : x.row(r)) in_var += (v - in_mean) * (v - in_mean) / 32.0;
    REQUIRE(in_var >= 25.0);
    for (double v : y.row(r)) mean += v / 32.0;
    for (double v : y.row(r)) var += (v - mean) * (v - mean) / 32.0;
    CHECK(std::abs(mean) < 1e-9);
    CHECK(std::abs(var - 1.0) < 1e-6);
  }
}

TEST_CASE("backward on elementary graphs") {
  {
    Graph g;
    const Var w = g.parameter("w", Tensor::scalar(3.0));
    const Var loss = g.sum(g.square(w));
    g.backward(loss);
    CHECK(g.grad(w)[0] == 6.0);
  }
  {
    Graph g;
    const Var x = g.parameter("x", Tensor::vector({0.3, -1.2, 2.0, 0.1}));
    g.backward(g.sum(g.softmax_rows(x)));
    const Tensor gx = g.grad(x);
    for (double v : gx.values()) CHECK(std::abs(v) < 1e-15);
  }
  {
    // gradient of a sum of parameters is exactly 1 per entry
    Graph g;
    const Var a = g.parameter("a", Tensor::vector({1, 2, 3}));
    const Var b = g.parameter("b", Tensor::vector({-4, 5, 6}));
    g.backward(g.sum(g.add(a, b)));
    const Tensor ga = g.grad(a), gb = g.grad(b);
    for (double v : ga.values()) CHECK(v == 1.0);
    for (double v : gb.values()) CHECK(v == 1.0);
  }
  {
    Graph g;
    const Var v = g.parameter("v", Tensor::vector({1, 2}));
    CHECK(throws_code([&] { g.backward(v); }, ErrorCode::NotScalarLoss));
  }
}

TEST_CASE("shape errors name the node") {
  Graph g;
  const Var a = g.constant(Tensor::matrix(2, 3));
  const Var b = g.constant(Tensor::matrix(2, 3));
  try {
    g.matmul(a, b);
    FAIL("expected ShapeMismatch");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::ShapeMismatch);
    CHECK(std::string(e.what()).find("matmul") != std::string::npos);
  }
}

TEST_CASE("dropout is deterministic per seed and reuses its mask backward") {
  const Tensor x = Tensor(std::vector<std::size_t>{200}, 1.0);
  Graph g1(true, 17), g2(true, 17), g3(true, 18);
  const Var p1 = g1.parameter("x", x);
  const Var d1 = g1.dropout(p1, 0.25);
  const Var d2 = g2.dropout(g2.parameter("x", x), 0.25);
  const Var d3 = g3.dropout(g3.parameter("x", x), 0.25);
  CHECK(g1.value(d1) == g2.value(d2));
  CHECK(!(g1.value(d1) == g3.value(d3)));
  g1.backward(g1.sum(d1));
  for (std::size_t i = 0; i < 200; ++i) {
    const double kept = g1.value(d1)[i];
    CHECK((kept == 0.0 || std::abs(kept - 1.0 / 0.75) < 1e-15));
    CHECK(g1.grad(p1)[i] == kept);
  }
  Graph eval(false, 17);
  CHECK(eval.value(eval.dropout(eval.constant(x), 0.25)) == x);
}

TEST_CASE("grad_check on quadratic toy graph and dead parameters") {
  std::mt19937_64 rng(6);
  ParamMap params{{"a", random_matrix(3, 4, rng)}, {"b", random_matrix(4, 2, rng)}, {"dead", random_matrix(2, 2, rng)}};
  const LossBuilder quad = [](Graph& g, const ParamMap& p) {
    const Var a = g.parameter("a", p.at("a"));
    const Var b = g.parameter("b", p.at("b"));
    g.parameter("dead", p.at("dead"));
    return g.sum(g.square(g.matmul(a, b)));
  };
  const GradCheckResult r = grad_check(params, quad, 1e-4);
  CHECK(r.max_rel_error < 1e-8);
  CHECK(r.entries_checked == 12 + 8 + 4);

  Graph g;
  g.backward(quad(g, params));
  const ParamMap grads = g.parameter_gradients();
  for (double v : grads.at("dead").values()) CHECK(v == 0.0);
}

TEST_CASE("grad_check covers every differentiable op") {
  std::mt19937_64 rng(7);
  ParamMap params{{"x", random_matrix(4, 6, rng)}, {"w", random_matrix(6, 6, rng, 0.5)},
                  {"r", random_matrix(1, 6, rng)}, {"h", random_matrix(6, 3, rng, 0.3)}};
  params["r"] = Tensor({6}, std::vector<double>(params["r"].values().begin(), params["r"].values().end()));
  const std::vector<double> targets{0.3, -0.5, 1.1, 0.0};
  const std::vector<double> pos{0, 1, 2, 3};
  const LossBuilder build = [&](Graph& g, const ParamMap& p) {
    const Var x = g.parameter("x", p.at("x"));
    const Var w = g.parameter("w", p.at("w"));
    const Var r = g.parameter("r", p.at("r"));
    Var h = g.layer_norm(g.add_row(g.matmul(x, w), r));
    h = g.mul_row(g.gelu(h), r);
    const Var q = g.rope(g.slice_cols(h, 0, 4), pos, 100.0);
    const Var k = g.rope(g.slice_cols(h, 2, 4), pos, 100.0);
    const Var att = g.causal_softmax(g.scale(g.matmul_nt(q, k), 0.5));
    const Var parts[] = {g.matmul(att, g.slice_cols(h, 1, 3)), g.softplus(g.slice_cols(h, 4, 2)),
                         g.softmax_rows(g.slice_cols(h, 0, 1))};
    const Var cat = g.sub(g.concat_cols(parts), g.mul(x, x));
    const Var raw = g.matmul(cat, g.parameter("h", p.at("h")));
    return g.add(g.student_t_nll(raw, targets), g.mean(g.square(g.mse_on_mean(raw, targets))));
  };
  const GradCheckResult r = grad_check(params, build, 1e-5);
  CAPTURE(r.worst_parameter);
  CHECK(r.max_rel_error < 1e-6);
}

TEST_CASE("graph evaluation is bit deterministic") {
  std::mt19937_64 rng(8);
  ParamMap params{{"x", random_matrix(5, 4, rng)}};
  auto run = [&](std::uint64_t seed) {
    Graph g(true, seed);
    const Var x = g.parameter("x", params["x"]);
    const Var l = g.sum(g.gelu(g.dropout(g.layer_norm(x), 0.3)));
    g.backward(l);
    return std::make_pair(g.value(l)[0], g.grad(x));
  };
  const auto a = run(5), b = run(5);
  CHECK(a.first == b.first);
  CHECK(a.second == b.second);
}
