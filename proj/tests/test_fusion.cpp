#include <doctest.h>

#include <cmath>
#include <random>

#include "plantcast/fusion.hpp"
#include "plantcast/spline.hpp"
#include "test_util.hpp"

using namespace plantcast;
using testutil::throws_code;

namespace {

// Dense oracle for the not-a-knot spline: solve for all 4(n-1) piece
// coefficients at once with Gaussian elimination, then evaluate.
struct DenseSpline {
  std::vector<double> x, coef;  // coef[4i..4i+3] = a,b,c,d of a + b·s + c·s² + d·s³, s = t - x_i

  DenseSpline(const std::vector<double>& xs, const std::vector<double>& ys) : x(xs) {
    const std::size_t p = xs.size() - 1, N = 4 * p;
    std::vector<std::vector<double>> A(N, std::vector<double>(N + 1, 0.0));
    std::size_t row = 0;
    for (std::size_t i = 0; i < p; ++i) {
      const double h = xs[i + 1] - xs[i];
      A[row][4 * i] = 1.0;
      A[row++][N] = ys[i];
      A[row][4 * i] = 1.0;
      A[row][4 * i + 1] = h;
      A[row][4 * i + 2] = h * h;
      A[row][4 * i + 3] = h * h * h;
      A[row++][N] = ys[i + 1];
    }
    for (std::size_t i = 0; i + 1 < p; ++i) {
      const double h = xs[i + 1] - xs[i];
      // first derivative continuity
      A[row][4 * i + 1] = 1.0;
      A[row][4 * i + 2] = 2.0 * h;
      A[row][4 * i + 3] = 3.0 * h * h;
      A[row++][4 * (i + 1) + 1] = -1.0;
      // second derivative continuity
      A[row][4 * i + 2] = 2.0;
      A[row][4 * i + 3] = 6.0 * h;
      A[row++][4 * (i + 1) + 2] = -2.0;
    }
    // not-a-knot: third derivative continuous at x_1 and x_{n-2}
    A[row][3] = 1.0;
    A[row++][7] = -1.0;
    A[row][4 * (p - 2) + 3] = 1.0;
    A[row++][4 * (p - 1) + 3] = -1.0;
    for (std::size_t c = 0; c < N; ++c) {
      std::size_t piv = c;
      for (std::size_t r = c + 1; r < N; ++r)
        if (std::abs(A[r][c]) > std::abs(A[piv][c])) piv = r;
      std::swap(A[c], A[piv]);
      for (std::size_t r = 0; r < N; ++r) {
        if (r == c) continue;
        const double f = A[r][c] / A[c][c];
        for (std::size_t k = c; k <= N; ++k) A[r][k] -= f * A[c][k];
      }
    }
    coef.resize(N);
    for (std::size_t c = 0; c < N; ++c) coef[c] = A[c][N] / A[c][c];
  }

  double operator()(double t) const {
    std::size_t i = 0;
    while (i + 2 < x.size() && t > x[i + 1]) ++i;
    const double s = t - x[i];
    return coef[4 * i] + s * (coef[4 * i + 1] + s * (coef[4 * i + 2] + s * coef[4 * i + 3]));
  }
};

FusedSeries one_channel(std::vector<double> values, std::vector<std::uint8_t> missing) {
  FusedSeries s;
  s.start = from_seconds(0);
  s.step_seconds = 60;
  s.channels.push_back(Channel{"c", std::move(values), std::move(missing)});
  return s;
}

FusedSeries full_series(std::size_t n) {
  FusedSeries s;
  s.start = from_seconds(1704067200);
  s.step_seconds = 60;
  for (std::size_t c = 0; c < std::size(kFusedChannelOrder); ++c) {
    std::vector<double> v(n);
    for (std::size_t i = 0; i < n; ++i) v[i] = static_cast<double>(c * 100 + i) + std::sin(static_cast<double>(i + c));
    s.channels.push_back(Channel{std::string(kFusedChannelOrder[c]), v, std::vector<std::uint8_t>(n, 0)});
  }
  return s;
}

EnvRecord env_at(std::int64_t sec, double temp) {
  EnvRecord e;
  e.timestamp = from_seconds(sec);
  e.temp_c = temp;
  e.rh_pct = 50.0;
  e.light = 100.0;
  e.voc_ppb = 10.0;
  e.co2_ppm = 400.0;
  e.pm25_ugm3 = 5.0;
  return e;
}

PhenotypeRecord pheno_at(std::int64_t sec, double g) {
  PhenotypeRecord p;
  p.timestamp = from_seconds(sec);
  p.mean_r = 10.0;
  p.mean_g = g;
  p.mean_b = 20.0;
  p.mask_area = 6;
  p.mask_height = 2;
  p.mask_width = 3;
  p.area_to_height = 3.0;
  p.height_to_width = 2.0 / 3.0;
  return p;
}

}  // namespace

TEST_CASE("spline matches dense not-a-knot oracle on random knots") {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(0.2, 2.0), v(-5.0, 5.0);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 4 + static_cast<std::size_t>(trial % 9);
    std::vector<double> xs{v(rng)}, ys;
    for (std::size_t i = 1; i < n; ++i) xs.push_back(xs.back() + u(rng));
    for (std::size_t i = 0; i < n; ++i) ys.push_back(v(rng));
    const CubicSpline s(xs, ys);
    const DenseSpline o(xs, ys);
    for (std::size_t i = 0; i + 1 < n; ++i) {
      for (double f : {0.0, 0.25, 0.5, 0.9}) {
        const double t = xs[i] + f * (xs[i + 1] - xs[i]);
        CHECK(s(t) == doctest::Approx(o(t)).epsilon(1e-9).scale(1.0));
      }
    }
  }
}

TEST_CASE("spline reproduces cubics and handles few knots") {
  const std::vector<double> xs{0, 1, 2.5, 3, 4.5, 6};
  std::vector<double> ys;
  auto f = [](double t) { return 0.5 * t * t * t - 2.0 * t * t + t - 3.0; };
  for (double x : xs) ys.push_back(f(x));
  const CubicSpline s(xs, ys);
  for (double t = 0.0; t <= 6.0; t += 0.1) CHECK(std::abs(s(t) - f(t)) < 1e-9);

  const std::vector<double> x2{0, 2}, y2{1, 5};
  CHECK(CubicSpline(x2, y2)(1.0) == doctest::Approx(3.0));
  const std::vector<double> x3{0, 1, 3}, y3{0, 1, 9};
  CHECK(CubicSpline(x3, y3)(2.0) == doctest::Approx(4.0));
  const std::vector<double> x1{0}, y1{1};
  CHECK(throws_code([&] { CubicSpline(x1, y1); }, ErrorCode::TooFewPoints));
}

TEST_CASE("impute_spline fills gaps exactly on linear and cubic data") {
  std::vector<double> lin(10);
  for (std::size_t i = 0; i < 10; ++i) lin[i] = 2.0 * static_cast<double>(i) + 1.0;
  std::vector<std::uint8_t> miss(10, 0);
  miss[4] = 1;
  auto in = one_channel(lin, miss);
  in.channels[0].values[4] = -999.0;
  const FusedSeries out = impute_spline(in);
  CHECK(out.channels[0].values[4] == doctest::Approx(9.0).epsilon(1e-14));
  CHECK(out.channels[0].missing[4] == 0);

  std::vector<double> cube(12);
  for (std::size_t i = 0; i < 12; ++i) cube[i] = std::pow(static_cast<double>(i) - 5.0, 3);
  std::vector<std::uint8_t> m2(12, 0);
  m2[3] = m2[7] = m2[8] = 1;
  auto in2 = one_channel(cube, m2);
  in2.channels[0].values[3] = in2.channels[0].values[7] = in2.channels[0].values[8] = 0.0;
  const FusedSeries out2 = impute_spline(in2);
  for (std::size_t i = 0; i < 12; ++i) {
    if (m2[i]) {
      CHECK(std::abs(out2.channels[0].values[i] - cube[i]) < 1e-9);
    } else {
      CHECK(out2.channels[0].values[i] == cube[i]);  // observed knots untouched
    }
  }
}

TEST_CASE("impute_spline edges, identity and errors") {
  auto s = one_channel({0, 0, 3, 4, 5, 0}, {1, 1, 0, 0, 0, 1});
  const FusedSeries out = impute_spline(s);
  CHECK(out.channels[0].values == std::vector<double>{3, 3, 3, 4, 5, 5});

  auto full = full_series(20);
  const FusedSeries same = impute_spline(full);
  for (std::size_t c = 0; c < full.channels.size(); ++c) CHECK(same.channels[c].values == full.channels[c].values);

  auto sparse = one_channel({1, 0, 0}, {0, 1, 1});
  CHECK(throws_code([&] { impute_spline(sparse); }, ErrorCode::TooFewPoints));
}

TEST_CASE("align_streams bucket means and env tolerance") {
  const std::int64_t t0 = 1704067200;
  std::vector<PhenotypeRecord> pheno;
  for (int i = 0; i < 24; ++i) pheno.push_back(pheno_at(t0 + 10 * i, 1.0 + (i % 6) + 6.0 * (i / 6)));
  std::vector<EnvRecord> env;
  for (int k = 0; k <= 3; ++k) env.push_back(env_at(t0 + 60 * k, 20.0 + k));
  const FusedSeries f = align_streams(env, pheno, 60);
  REQUIRE(f.channels.size() == 14);
  for (std::size_t c = 0; c < 14; ++c) CHECK(f.channels[c].name == kFusedChannelOrder[c]);
  CHECK(f.length() == 4);
  CHECK(f.channel("mean_g").values[0] == 3.5);
  CHECK(f.channel("temp_c").values[2] == 22.0);
  CHECK(f.channel("temp_c").missing[2] == 0);
  CHECK(f.start == from_seconds(t0));
}

TEST_CASE("align_streams marks env gaps beyond 1.5 steps") {
  const std::int64_t t0 = 1704067200;
  std::vector<EnvRecord> env;
  for (int k = 0; k <= 5; ++k) env.push_back(env_at(t0 + 60 * k, 20.0));
  // next sample 13 minutes later: grid points more than 90 s from any sample
  for (int k = 0; k <= 5; ++k) env.push_back(env_at(t0 + 60 * 5 + 780 + 60 * k, 21.0));
  std::vector<PhenotypeRecord> pheno;
  for (std::int64_t s = t0; s <= t0 + 60 * 5 + 780 + 300; s += 10) pheno.push_back(pheno_at(s, 100.0));
  const FusedSeries f = align_streams(env, pheno, 60);
  std::size_t missing = 0, run = 0, best_run = 0;
  for (std::uint8_t m : f.channel("rh_pct").missing) {
    missing += m;
    run = m ? run + 1 : 0;
    best_run = std::max(best_run, run);
  }
  CHECK(missing == 10);
  CHECK(best_run == 10);
  for (std::uint8_t m : f.channel("mean_g").missing) CHECK(m == 0);

  const FusedSeries filled = impute_spline(f);
  for (std::uint8_t m : filled.channel("rh_pct").missing) CHECK(m == 0);
}

TEST_CASE("align_streams rejects disjoint ranges") {
  std::vector<EnvRecord> env{env_at(0, 20.0), env_at(60, 20.0)};
  std::vector<PhenotypeRecord> pheno{pheno_at(1000, 1.0)};
  CHECK(throws_code([&] { align_streams(env, pheno, 60); }, ErrorCode::NoOverlap));
  CHECK(throws_code([&] { align_streams({}, pheno, 60); }, ErrorCode::NoOverlap));
}

TEST_CASE("engineer_features channel selection") {
  const FusedSeries s = full_series(5);
  CHECK(engineer_features(s, FeatureCombo::Rgb).channels.size() == 3);
  CHECK(engineer_features(s, FeatureCombo::RgbRatios).channels.size() == 5);
  CHECK(engineer_features(s, FeatureCombo::RgbEnv).channels.size() == 9);
  const FusedSeries all = engineer_features(s, FeatureCombo::RgbRatiosEnv);
  CHECK(all.channels.size() == 11);
  for (const Channel& c : all.channels) {
    CHECK(c.name != "mask_area");
    CHECK(c.name != "mask_height");
    CHECK(c.name != "mask_width");
  }
  for (const Channel& c : engineer_features(s, FeatureCombo::Rgb).channels) CHECK(all.index_of(c.name) >= 0);

  FusedSeries lacking = s;
  lacking.channels.erase(lacking.channels.begin() + lacking.index_of("voc_ppb"));
  CHECK(throws_code([&] { engineer_features(lacking, FeatureCombo::RgbEnv); }, ErrorCode::MissingChannel));
  CHECK(engineer_features(lacking, FeatureCombo::RgbRatios).channels.size() == 5);
  CHECK(parse_combo("RGB_RATIOS_ENV") == FeatureCombo::RgbRatiosEnv);
  CHECK(throws_code([] { parse_combo("rgb"); }, ErrorCode::UsageError));
}

TEST_CASE("normalize z-scores with population std") {
  auto s = one_channel({1, 2, 3}, {0, 0, 0});
  s.channels.push_back(Channel{"k", {5, 5, 5}, {0, 0, 0}});
  const FusedSeries n = normalize(s);
  CHECK(n.channels[0].values[0] == doctest::Approx(-1.224744871391589));
  CHECK(n.channels[0].values[1] == 0.0);
  CHECK(n.channels[0].values[2] == doctest::Approx(1.224744871391589));
  CHECK(n.channels[1].values == std::vector<double>{0, 0, 0});
  REQUIRE(n.norm_stats);
  CHECK((*n.norm_stats)[0].mean == 2.0);
  CHECK((*n.norm_stats)[0].std == doctest::Approx(std::sqrt(2.0 / 3.0)));
  CHECK((*n.norm_stats)[1].std == 1.0);
}

TEST_CASE("normalize properties and round trip") {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g(40.0, 7.0);
  std::vector<double> v(500);
  for (double& x : v) x = g(rng);
  const auto s = one_channel(v, std::vector<std::uint8_t>(500, 0));
  const FusedSeries n = normalize(s);
  double mean = 0.0, var = 0.0;
  for (double x : n.channels[0].values) mean += x;
  mean /= 500.0;
  for (double x : n.channels[0].values) var += (x - mean) * (x - mean);
  var /= 500.0;
  CHECK(std::abs(mean) < 1e-9);
  CHECK(std::abs(std::sqrt(var) - 1.0) < 1e-9);

  std::vector<double> other(50);
  for (double& x : other) x = g(rng);
  const FusedSeries applied = normalize(one_channel(other, std::vector<std::uint8_t>(50, 0)), n.norm_stats);
  for (std::size_t i = 0; i < other.size(); ++i) {
    CHECK(std::abs(denormalize(applied.channels[0].values[i], (*n.norm_stats)[0]) - other[i]) < 1e-12);
  }
}

TEST_CASE("make_windows counting") {
  const WindowSet w = make_windows(10, 4, 2, 2, 0);
  CHECK(w.starts == std::vector<std::size_t>{0, 2, 4});
  CHECK(make_windows(9, 4, 2, 1, 3).size() == 1);
  CHECK(make_windows(8, 4, 2, 1, 3).size() == 0);

  std::mt19937_64 rng(1000);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = rng() % 200, ctx = 1 + rng() % 20, hor = 1 + rng() % 10, stride = 1 + rng() % 15,
                      lag = rng() % 12;
    const WindowSet ws = make_windows(n, ctx, hor, stride, lag);
    std::vector<std::size_t> expect;
    for (std::size_t s = 0; s + lag + ctx + hor <= n; s += stride) expect.push_back(s);
    REQUIRE(ws.starts == expect);
    for (std::size_t i = 0; i < ws.size(); ++i) {
      CHECK(ws.input_begin(i) + ws.input_len() - 1 < ws.target_begin(i));
      CHECK(ws.target_begin(i) + hor <= n);
    }
  }
}

TEST_CASE("split_series is contiguous 70/15/15") {
  const FusedSeries s = full_series(100);
  const SeriesSplit sp = split_series(s);
  CHECK(sp.train.length() == 70);
  CHECK(sp.val.length() == 15);
  CHECK(sp.test.length() == 15);
  CHECK(sp.val.start == s.time_at(70));
  CHECK(sp.test.channels[1].values.front() == s.channels[1].values[85]);
}

TEST_CASE("fused csv round trip and load errors") {
  testutil::TempDir dir("fused");
  FusedSeries s = full_series(6);
  s.channels[9].missing[2] = 1;
  write_fused_csv(s, dir / "f.csv");
  const FusedSeries back = read_fused_csv(dir / "f.csv");
  CHECK(back.length() == 6);
  CHECK(back.start == s.start);
  CHECK(back.channels[3].values == s.channels[3].values);
  CHECK(back.channels[9].missing[2] == 1);

  testutil::spit(dir / "env.csv", std::string(kEnvCsvHeader) + "\n2024-01-01T00:00:00Z,20,150,1,1,1,1\n");
  testutil::spit(dir / "pheno.csv", std::string(kPhenoCsvHeader) + "\n");
  CHECK(throws_code([&] { load_streams(dir / "env.csv", dir / "pheno.csv"); }, ErrorCode::ParseError));
  testutil::spit(dir / "env2.csv", "timestamp,temp\n");
  CHECK(throws_code([&] { load_streams(dir / "env2.csv", dir / "pheno.csv"); }, ErrorCode::SchemaMismatch));
  testutil::spit(dir / "env3.csv", std::string(kEnvCsvHeader) +
                                       "\n2024-01-01T00:00:00Z,20,50,1,1,1,1\n2024-01-01T00:00:00Z,20,50,1,1,1,1\n");
  CHECK(throws_code([&] { load_streams(dir / "env3.csv", dir / "pheno.csv"); }, ErrorCode::NonMonotonic));
  testutil::spit(dir / "env4.csv", std::string(kEnvCsvHeader) + "\n");
  const Streams empty = load_streams(dir / "env4.csv", dir / "pheno.csv");
  CHECK(empty.env.empty());
  CHECK(empty.pheno.empty());
}
