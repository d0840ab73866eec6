#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "plantcast/model.hpp"
#include "plantcast/student_t.hpp"
#include "plantcast/weights_io.hpp"
#include "test_util.hpp"

using namespace plantcast;
using testutil::throws_code;
using nn::Tensor;

namespace {

using Mat = std::vector<std::vector<double>>;

Mat to_mat(const Tensor& t) {
  Mat m(t.rows(), std::vector<double>(t.cols()));
  for (std::size_t i = 0; i < t.rows(); ++i)
    for (std::size_t j = 0; j < t.cols(); ++j) m[i][j] = t.at(i, j);
  return m;
}

Mat mm(const Mat& a, const Mat& b) {
  Mat c(a.size(), std::vector<double>(b[0].size(), 0.0));
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t k = 0; k < b.size(); ++k)
      for (std::size_t j = 0; j < b[0].size(); ++j) c[i][j] += a[i][k] * b[k][j];
  return c;
}

std::vector<double> vec(const Tensor& t) { return {t.values().begin(), t.values().end()}; }

Mat affine_norm(const Mat& x, const std::vector<double>& gamma, const std::vector<double>& beta) {
  Mat y = x;
  for (auto& row : y) {
    double mean = 0.0, var = 0.0;
    for (double v : row) mean += v;
    mean /= static_cast<double>(row.size());
    for (double v : row) var += (v - mean) * (v - mean);
    var /= static_cast<double>(row.size());
    for (std::size_t c = 0; c < row.size(); ++c) row[c] = (row[c] - mean) / std::sqrt(var + 1e-5) * gamma[c] + beta[c];
  }
  return y;
}

// Straight-line re-implementation of the decoder forward pass.
std::vector<StudentTParams> oracle_forward(const ModelConfig& cfg, const Weights& w, const Tensor& tokens) {
  const std::size_t T = tokens.rows(), d = cfg.d_model, dh = cfg.d_head();
  auto W = [&](const std::string& n) { return to_mat(w.at(n)); };
  auto V = [&](const std::string& n) { return vec(w.at(n)); };
  Mat h = mm(to_mat(tokens), W("proj.weight"));
  const auto pb = V("proj.bias");
  for (auto& row : h)
    for (std::size_t c = 0; c < d; ++c) row[c] += pb[c];

  for (std::size_t l = 0; l < cfg.M; ++l) {
    const std::string p = "layers." + std::to_string(l) + ".";
    const Mat a = affine_norm(h, V(p + "ln1.gamma"), V(p + "ln1.beta"));
    Mat q = mm(a, W(p + "attn.wq")), k = mm(a, W(p + "attn.wk")), v = mm(a, W(p + "attn.wv"));
    // rotary per head
    for (std::size_t t = 0; t < T; ++t)
      for (std::size_t hd = 0; hd < cfg.n_heads; ++hd)
        for (std::size_t i = 0; i < dh / 2; ++i) {
          const double ang = static_cast<double>(t) * std::pow(cfg.rope_base, -2.0 * static_cast<double>(i) / static_cast<double>(dh));
          const std::size_t c0 = hd * dh + 2 * i;
          for (Mat* m : {&q, &k}) {
            const double x0 = (*m)[t][c0], x1 = (*m)[t][c0 + 1];
            (*m)[t][c0] = x0 * std::cos(ang) - x1 * std::sin(ang);
            (*m)[t][c0 + 1] = x0 * std::sin(ang) + x1 * std::cos(ang);
          }
        }
    Mat att(T, std::vector<double>(d, 0.0));
    for (std::size_t hd = 0; hd < cfg.n_heads; ++hd) {
      for (std::size_t t = 0; t < T; ++t) {
        std::vector<double> s(t + 1);
        double mx = -1e300;
        for (std::size_t u = 0; u <= t; ++u) {
          double dot = 0.0;
          for (std::size_t c = 0; c < dh; ++c) dot += q[t][hd * dh + c] * k[u][hd * dh + c];
          s[u] = dot / std::sqrt(static_cast<double>(dh));
          mx = std::max(mx, s[u]);
        }
        double z = 0.0;
        for (double& x : s) z += (x = std::exp(x - mx));
        for (std::size_t u = 0; u <= t; ++u)
          for (std::size_t c = 0; c < dh; ++c) att[t][hd * dh + c] += s[u] / z * v[u][hd * dh + c];
      }
    }
    const Mat o = mm(att, W(p + "attn.wo"));
    for (std::size_t t = 0; t < T; ++t)
      for (std::size_t c = 0; c < d; ++c) h[t][c] += o[t][c];

    const Mat b = affine_norm(h, V(p + "ln2.gamma"), V(p + "ln2.beta"));
    Mat f = mm(b, W(p + "ffn.w1"));
    const auto b1 = V(p + "ffn.b1");
    for (auto& row : f)
      for (std::size_t c = 0; c < row.size(); ++c) {
        const double x = row[c] + b1[c];
        row[c] = 0.5 * x * (1.0 + std::erf(x / std::sqrt(2.0)));
      }
    const Mat f2 = mm(f, W(p + "ffn.w2"));
    const auto b2 = V(p + "ffn.b2");
    for (std::size_t t = 0; t < T; ++t)
      for (std::size_t c = 0; c < d; ++c) h[t][c] += f2[t][c] + b2[c];
  }
  const Mat raw = mm(h, W("head.weight"));
  const auto hb = V("head.bias");
  std::vector<StudentTParams> out;
  for (const auto& r : raw) {
    const double rn = r[0] + hb[0], rm = r[1] + hb[1], rs = r[2] + hb[2];
    out.push_back({2.0 + std::log1p(std::exp(rn)), rm, std::log1p(std::exp(rs)) + 1e-6});
  }
  return out;
}

ModelConfig toy_config(std::size_t n_cov = 2) {
  ModelConfig cfg;
  cfg.lag_set = LagSet{{1, 2, 3}};
  cfg.d_model = 8;
  cfg.n_heads = 2;
  cfg.M = 2;
  cfg.dropout_p = 0.1;
  cfg.n_covariates = n_cov;
  return cfg;
}

Tensor random_tokens(std::size_t T, std::size_t width, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Tensor t = Tensor::matrix(T, width);
  for (double& v : t.values()) v = n(rng);
  return t;
}

// Perturb every weight so biases and norms are not at their trivial init.
Weights jitter(Weights w, std::mt19937_64& rng, double sd = 0.2) {
  std::normal_distribution<double> n(0.0, sd);
  for (auto& [_, t] : w)
    for (double& v : t.values()) v += n(rng);
  return w;
}

}  // namespace

TEST_CASE("lag features") {
  const std::vector<double> s{1, 2, 3, 4, 5};
  CHECK(build_lag_features(s, LagSet{{1, 2, 3}}, 5) == std::vector<double>{4, 3, 2});
  CHECK(build_lag_features(s, LagSet{{1}}, 2) == std::vector<double>{1});
  CHECK(throws_code([&] { build_lag_features(s, LagSet{{1, 2, 3}}, 3); }, ErrorCode::InsufficientHistory));
  CHECK(throws_code([] { LagSet{{2, 1}}.validate(); }, ErrorCode::UsageError));
  CHECK(LagSet::defaults().max() == 48);
}

TEST_CASE("tokens concatenate lags and contemporaneous covariates") {
  SeriesData d;
  d.target = {10, 11, 12, 13, 14, 15};
  d.covariates = {{0, 1, 2, 3, 4, 5}};
  const Tensor t = build_tokens(d, LagSet{{1, 3}}, 3, 3);
  CHECK(t.rows() == 3);
  CHECK(t.cols() == 3);
  CHECK(vec(t) == std::vector<double>{12, 10, 3, 13, 11, 4, 14, 12, 5});
  CHECK(throws_code([&] { build_tokens(d, LagSet{{1, 3}}, 2, 1); }, ErrorCode::InsufficientHistory));
}

TEST_CASE("rope anchors") {
  const Tensor q = Tensor::matrix(1, 2, 0.0);
  Tensor q1 = q;
  q1.at(0, 0) = 1.0;
  const std::vector<double> p1{1.0};
  auto [rq, rk] = apply_rope(q1, q1, p1, 10000.0);
  CHECK(rq.at(0, 0) == doctest::Approx(0.540302305868).epsilon(1e-12));
  CHECK(rq.at(0, 1) == doctest::Approx(0.841470984808).epsilon(1e-12));

  std::mt19937_64 rng(1);
  const Tensor x = random_tokens(5, 8, rng);
  const std::vector<double> zeros(5, 0.0);
  CHECK(apply_rope(x, x, zeros).first == x);

  const std::vector<double> pos{0, 1, 2, 7, 30};
  const Tensor r = apply_rope(x, x, pos).first;
  for (std::size_t t = 0; t < 5; ++t)
    for (std::size_t i = 0; i < 4; ++i) {
      const double a = std::hypot(x.at(t, 2 * i), x.at(t, 2 * i + 1));
      const double b = std::hypot(r.at(t, 2 * i), r.at(t, 2 * i + 1));
      CHECK(std::abs(a - b) < 1e-12);
    }
  CHECK(throws_code([&] { apply_rope(Tensor::matrix(1, 3), Tensor::matrix(1, 3), p1); }, ErrorCode::OddHeadDim));
}

TEST_CASE("rope dot products depend only on position difference") {
  std::mt19937_64 rng(2);
  const Tensor qv = random_tokens(1, 8, rng), kv = random_tokens(1, 8, rng);
  auto score = [&](double pq, double pk) {
    const std::vector<double> a{pq}, b{pk};
    const Tensor rq = apply_rope(qv, qv, a).first;
    const Tensor rk = apply_rope(kv, kv, b).first;
    double s = 0.0;
    for (std::size_t c = 0; c < 8; ++c) s += rq[c] * rk[c];
    return s;
  };
  CHECK(std::abs(score(5, 2) - score(13, 10)) < 1e-9);
  CHECK(std::abs(score(0, 0) - score(21, 21)) < 1e-9);
}

TEST_CASE("raw zero head maps to the documented constants") {
  const StudentTParams p = params_from_raw(0, 0, 0);
  CHECK(p.nu == doctest::Approx(2.0 + std::log(2.0)).epsilon(1e-15));
  CHECK(p.mu == 0.0);
  CHECK(p.sigma == doctest::Approx(std::log(2.0) + 1e-6).epsilon(1e-15));
  for (double r : {-800.0, -30.0, 0.0, 30.0, 800.0}) {
    const StudentTParams q = params_from_raw(r, r, r);
    CHECK(q.nu >= 2.0);
    if (std::abs(r) <= 30.0) CHECK(q.nu > 2.0);
    CHECK(q.sigma > 0.0);
    CHECK(std::isfinite(q.nu));
  }
}

TEST_CASE("forward matches the straight-line oracle") {
  std::mt19937_64 rng(31);
  for (std::size_t trial = 0; trial < 4; ++trial) {
    ModelConfig cfg = toy_config(trial % 3);
    cfg.M = 1 + trial % 2;
    const Weights w = jitter(init_weights(cfg, trial), rng);
    const Tensor tokens = random_tokens(6 + trial, cfg.token_width(), rng);
    const auto got = forward_step(cfg, w, tokens);
    const auto want = oracle_forward(cfg, w, tokens);
    REQUIRE(got.size() == want.size());
    for (std::size_t t = 0; t < got.size(); ++t) {
      CHECK(std::abs(got[t].nu - want[t].nu) < 1e-10);
      CHECK(std::abs(got[t].mu - want[t].mu) < 1e-10);
      CHECK(std::abs(got[t].sigma - want[t].sigma) < 1e-10);
    }
  }
}

TEST_CASE("forward is causal") {
  std::mt19937_64 rng(5);
  const ModelConfig cfg = toy_config();
  const Weights w = jitter(init_weights(cfg, 1), rng);
  const Tensor tokens = random_tokens(10, cfg.token_width(), rng);
  const auto base = forward_step(cfg, w, tokens);
  for (std::size_t j = 0; j < 10; ++j) {
    Tensor p = tokens;
    for (std::size_t r = j; r < 10; ++r)
      for (double& v : p.row(r)) v += 3.0;
    const auto out = forward_step(cfg, w, p);
    for (std::size_t t = 0; t < j; ++t) {
      CHECK(std::abs(out[t].mu - base[t].mu) < 1e-12);
      CHECK(std::abs(out[t].sigma - base[t].sigma) < 1e-12);
      CHECK(std::abs(out[t].nu - base[t].nu) < 1e-12);
    }
    if (j < 10) CHECK(out[j].mu != base[j].mu);
  }
}

TEST_CASE("forward shape errors") {
  const ModelConfig cfg = toy_config();
  const Weights w = init_weights(cfg, 0);
  CHECK(throws_code([&] { forward_step(cfg, w, Tensor::matrix(4, 2)); }, ErrorCode::ShapeMismatch));
  Weights broken = w;
  broken.erase("head.bias");
  CHECK(throws_code([&] { check_weights(cfg, broken); }, ErrorCode::ShapeMismatch));
  ModelConfig odd = cfg;
  odd.d_model = 6;
  odd.n_heads = 2;
  CHECK(throws_code([&] { odd.validate(); }, ErrorCode::OddHeadDim));
}

TEST_CASE("sinusoidal encoding switch keeps causality") {
  std::mt19937_64 rng(12);
  ModelConfig cfg = toy_config();
  cfg.positional_encoding = PositionalEncoding::Sinusoidal;
  const Weights w = jitter(init_weights(cfg, 2), rng);
  const Tensor tokens = random_tokens(6, cfg.token_width(), rng);
  Tensor p = tokens;
  for (double& v : p.row(5)) v -= 1.0;
  const auto a = forward_step(cfg, w, tokens), b = forward_step(cfg, w, p);
  for (std::size_t t = 0; t < 5; ++t) CHECK(std::abs(a[t].mu - b[t].mu) < 1e-12);
}

TEST_CASE("full model gradients match finite differences") {
  std::mt19937_64 rng(44);
  ModelConfig cfg = toy_config(1);
  cfg.M = 1;
  const Weights w = jitter(init_weights(cfg, 3), rng, 0.1);
  const Tensor tokens = random_tokens(6, cfg.token_width(), rng);
  const std::vector<double> targets{0.1, -0.4, 0.8, 0.0, 1.3, -0.2};
  for (LossMode mode : {LossMode::StudentTNll, LossMode::MseOnMean}) {
    const nn::LossBuilder build = [&](nn::Graph& g, const nn::ParamMap& p) {
      return sequence_loss(g, cfg, p, tokens, targets, mode);
    };
    const auto fine = nn::grad_check(w, build, 1e-4, true, 9);
    CAPTURE(fine.worst_parameter);
    CHECK(fine.max_rel_error < 1e-5);
    const auto coarse = nn::grad_check(w, build, 1e-3, true, 9);
    CAPTURE(coarse.worst_tensor);
    CHECK(coarse.max_tensor_rel_error < 1e-4);
  }
}

TEST_CASE("student-t nll closed forms") {
  CHECK(std::abs(student_t_nll(0.0, {1.0, 0.0, 1.0}) - std::log(std::numbers::pi)) < 1e-9);
  CHECK(std::abs(student_t_nll(0.0, {1e6, 0.0, 1.0}) - 0.5 * std::log(2.0 * std::numbers::pi)) < 1e-3);
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-3.0, 3.0), s(0.05, 4.0), n(2.1, 40.0);
  for (int i = 0; i < 200; ++i) {
    const double y = u(rng), mu = u(rng), sigma = s(rng), nu = n(rng);
    const double full = student_t_nll(y, {nu, mu, sigma});
    const double std_ = student_t_nll((y - mu) / sigma, {nu, 0.0, 1.0});
    CHECK(std::abs(full - std_ - std::log(sigma)) < 1e-12);
    const double shift = u(rng);
    CHECK(std::abs(student_t_nll(y + shift, {nu, mu + shift, sigma}) - full) < 1e-12);
  }
  CHECK(throws_code([] { student_t_nll(0.0, {3.0, 0.0, 0.0}); }, ErrorCode::NonPositiveSigma));
  const std::vector<StudentTParams> ps{{3, 0, 1}};
  const std::vector<double> ys{0.0, 1.0};
  CHECK(throws_code([&] { nll_loss(ps, ys); }, ErrorCode::LengthMismatch));
}

TEST_CASE("student-t analytic gradient matches differences") {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(-3.0, 3.0), s(0.2, 3.0), n(2.1, 30.0);
  for (int i = 0; i < 100; ++i) {
    const StudentTParams p{n(rng), u(rng), s(rng)};
    const double y = u(rng);
    const StudentTGrad g = student_t_nll_grad(y, p);
    const double h = 1e-6;
    auto f = [&](StudentTParams q) { return student_t_nll(y, q); };
    const double dn = (f({p.nu + h, p.mu, p.sigma}) - f({p.nu - h, p.mu, p.sigma})) / (2 * h);
    const double dm = (f({p.nu, p.mu + h, p.sigma}) - f({p.nu, p.mu - h, p.sigma})) / (2 * h);
    const double ds = (f({p.nu, p.mu, p.sigma + h}) - f({p.nu, p.mu, p.sigma - h})) / (2 * h);
    CHECK(g.d_nu == doctest::Approx(dn).epsilon(1e-6).scale(1e-2));
    CHECK(g.d_mu == doctest::Approx(dm).epsilon(1e-6).scale(1e-2));
    CHECK(g.d_sigma == doctest::Approx(ds).epsilon(1e-6).scale(1e-2));
  }
}

TEST_CASE("student-t sampling") {
  Rng rng = make_rng(3);
  for (double v : sample_student_t({3.0, 5.0, kSigmaFloor}, 1000, rng)) CHECK(std::abs(v - 5.0) < 1e-4);

  Rng big = make_rng(4);
  const auto xs = sample_student_t({5.0, 0.0, 1.0}, 1'000'000, big);
  double mean = 0.0, var = 0.0;
  for (double x : xs) mean += x;
  mean /= static_cast<double>(xs.size());
  for (double x : xs) var += (x - mean) * (x - mean);
  var /= static_cast<double>(xs.size() - 1);
  CHECK(std::abs(var - 5.0 / 3.0) / (5.0 / 3.0) < 0.03);

  Rng a = make_rng(9), b = make_rng(9);
  CHECK(sample_student_t({4.0, 1.0, 2.0}, 50, a) == sample_student_t({4.0, 1.0, 2.0}, 50, b));
}

TEST_CASE("forecast with persistence weights") {
  // Head emits mu = lag-1 value (token column 0) and sigma at the floor; all
  // layers contribute nothing because their output projections are zero.
  ModelConfig cfg = toy_config(1);
  cfg.M = 1;
  cfg.d_model = 4;
  cfg.n_heads = 2;
  Weights w = init_weights(cfg, 0);
  for (auto& [name, t] : w) t.fill(0.0);
  w["layers.0.ln1.gamma"].fill(1.0);
  w["layers.0.ln2.gamma"].fill(1.0);
  w["proj.weight"].at(0, 0) = 1.0;  // h[0] = lag-1 value
  w["head.weight"].at(0, 1) = 1.0;  // mu = h[0]
  w["head.bias"][2] = -50.0;        // sigma = softplus(-50) + 1e-6
  SeriesData hist;
  hist.target = {0.1, 0.4, -0.3, 0.7, 1.25};
  hist.covariates = {{1, 2, 3, 4, 5}};
  const ForecastDistribution fd = forecast_autoregressive(cfg, w, hist, 4, CovariatePolicy::HoldLast, 6, 5, 11);
  REQUIRE(fd.sample_paths.size() == 5);
  for (const auto& path : fd.sample_paths)
    for (double v : path) CHECK(std::abs(v - 1.25) < 1e-4);
  REQUIRE(fd.params_per_step.size() == 6);
  CHECK(fd.params_per_step[0].mu == 1.25);

  // Round trip through the weights file keeps the persistence behaviour.
  testutil::TempDir dir("persist");
  save_model(cfg, w, dir / "m.llw");
  const auto [cfg2, w2] = load_model(dir / "m.llw");
  const ForecastDistribution fd2 = forecast_autoregressive(cfg2, w2, hist, 4, CovariatePolicy::HoldLast, 6, 5, 11);
  CHECK(fd2.sample_paths == fd.sample_paths);
}

TEST_CASE("single-step forecast equals one seeded draw") {
  std::mt19937_64 rng(8);
  const ModelConfig cfg = toy_config(0);
  const Weights w = jitter(init_weights(cfg, 5), rng);
  SeriesData hist;
  for (int i = 0; i < 12; ++i) hist.target.push_back(std::sin(i * 0.7));
  const ForecastDistribution fd = forecast_autoregressive(cfg, w, hist, 8, CovariatePolicy::HoldLast, 1, 1, 77);
  const Tensor tokens = build_tokens(
      [&] {
        SeriesData ext = hist;
        ext.target.push_back(0.0);
        return ext;
      }(),
      cfg.lag_set, 5, 8);
  const StudentTParams p = forward_step(cfg, w, tokens).back();
  Rng draw = make_rng(77, 0);
  const double expect = p.mu + p.sigma * draw_standard_t(p.nu, draw);
  REQUIRE(fd.sample_paths.size() == 1);
  CHECK(fd.sample_paths[0][0] == expect);

  SeriesData tiny;
  tiny.target = {1, 2, 3};
  CHECK(throws_code([&] { forecast_autoregressive(cfg, w, tiny, 8, CovariatePolicy::HoldLast, 1, 1, 0); },
                    ErrorCode::InsufficientHistory));
}
