#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "plantcast/error.hpp"
#include "plantcast/kernels.hpp"

using namespace plantcast;

namespace {

std::vector<double> random_vec(std::size_t n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  std::vector<double> v(n);
  for (double& x : v) x = u(rng);
  return v;
}

struct BackendGuard {
  kernels::Backend saved = kernels::active_backend();
  ~BackendGuard() { kernels::set_backend(saved); }
};

}  // namespace

TEST_CASE("scalar backend always available") {
  CHECK(kernels::backend_available(kernels::Backend::Scalar));
  CHECK(kernels::backend_name(kernels::Backend::Scalar) == "scalar");
}

TEST_CASE("avx2 kernels agree with scalar reference") {
  if (!kernels::backend_available(kernels::Backend::Avx2)) {
    MESSAGE("AVX2 not available on this CPU; skipping");
    return;
  }
  std::mt19937_64 rng(11);
  // Lengths around the 4-lane width and its tails.
  for (std::size_t n : {0u, 1u, 3u, 4u, 5u, 7u, 8u, 15u, 16u, 17u, 63u, 64u, 257u, 1000u}) {
    CAPTURE(n);
    const auto a = random_vec(n, rng), b = random_vec(n, rng);
    const double ds = kernels::scalar::dot(a.data(), b.data(), n);
    const double dv = kernels::avx2::dot(a.data(), b.data(), n);
    double mag = 0.0;
    for (std::size_t i = 0; i < n; ++i) mag += std::abs(a[i] * b[i]);
    CHECK(std::abs(ds - dv) <= 1e-14 * (mag + 1.0));

    const double ss = kernels::scalar::sum(a.data(), n);
    const double sv = kernels::avx2::sum(a.data(), n);
    CHECK(std::abs(ss - sv) <= 1e-14 * (static_cast<double>(n) * 2.0 + 1.0));

    auto y1 = random_vec(n, rng);
    auto y2 = y1;
    kernels::scalar::axpy(0.37, a.data(), y1.data(), n);
    kernels::avx2::axpy(0.37, a.data(), y2.data(), n);
    CHECK(y1 == y2);

    kernels::scalar::mul_acc(a.data(), b.data(), y1.data(), n);
    kernels::avx2::mul_acc(a.data(), b.data(), y2.data(), n);
    CHECK(y1 == y2);
  }
}

TEST_CASE("gemm variants match a triple loop on both backends") {
  BackendGuard guard;
  std::mt19937_64 rng(5);
  const std::size_t m = 7, k = 9, n = 6;
  const auto a = random_vec(m * k, rng);
  const auto b = random_vec(k * n, rng);
  const auto bt = random_vec(n * k, rng);
  const auto c2 = random_vec(m * n, rng);

  for (auto be : {kernels::Backend::Scalar, kernels::Backend::Avx2}) {
    if (!kernels::backend_available(be)) continue;
    kernels::set_backend(be);
    CAPTURE(kernels::backend_name(be));

    std::vector<double> c(m * n, 1.0);
    kernels::gemm_nn(a.data(), b.data(), c.data(), m, k, n, false);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        double r = 0.0;
        for (std::size_t p = 0; p < k; ++p) r += a[i * k + p] * b[p * n + j];
        CHECK(c[i * n + j] == doctest::Approx(r).epsilon(1e-13));
      }

    std::fill(c.begin(), c.end(), 0.5);
    kernels::gemm_nt(a.data(), bt.data(), c.data(), m, k, n, true);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        double r = 0.5;
        for (std::size_t p = 0; p < k; ++p) r += a[i * k + p] * bt[j * k + p];
        CHECK(c[i * n + j] == doctest::Approx(r).epsilon(1e-13));
      }

    std::vector<double> ct(k * n, 0.0);
    kernels::gemm_tn(a.data(), c2.data(), ct.data(), m, k, n, false);
    for (std::size_t p = 0; p < k; ++p)
      for (std::size_t j = 0; j < n; ++j) {
        double r = 0.0;
        for (std::size_t i = 0; i < m; ++i) r += a[i * k + p] * c2[i * n + j];
        CHECK(ct[p * n + j] == doctest::Approx(r).epsilon(1e-13));
      }
  }
}

TEST_CASE("requesting an unavailable backend throws") {
  if (kernels::backend_available(kernels::Backend::Avx2)) return;
  CHECK_THROWS_AS(kernels::set_backend(kernels::Backend::Avx2), Error);
}
