#include "plantcast/kernels.hpp"

#include <cstring>

#include "plantcast/error.hpp"

namespace plantcast::kernels {

namespace {

struct Table {
  double (*dot)(const double*, const double*, std::size_t) noexcept;
  void (*axpy)(double, const double*, double*, std::size_t) noexcept;
  void (*mul_acc)(const double*, const double*, double*, std::size_t) noexcept;
  double (*sum)(const double*, std::size_t) noexcept;
};

constexpr Table kScalar{&scalar::dot, &scalar::axpy, &scalar::mul_acc, &scalar::sum};
#if defined(PLANTCAST_HAVE_AVX2)
constexpr Table kAvx2{&avx2::dot, &avx2::axpy, &avx2::mul_acc, &avx2::sum};
#endif

bool cpu_has_avx2() noexcept {
#if defined(PLANTCAST_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

struct State {
  Backend backend;
  const Table* table;
};

State detect() noexcept {
#if defined(PLANTCAST_HAVE_AVX2)
  if (cpu_has_avx2()) return {Backend::Avx2, &kAvx2};
#endif
  return {Backend::Scalar, &kScalar};
}

State& state() noexcept {
  static State s = detect();
  return s;
}

}  // namespace

std::string_view backend_name(Backend b) noexcept {
  return b == Backend::Avx2 ? "avx2" : "scalar";
}

bool backend_available(Backend b) noexcept {
  return b == Backend::Scalar || cpu_has_avx2();
}

Backend active_backend() noexcept { return state().backend; }

void set_backend(Backend b) {
  if (!backend_available(b)) {
    throw Error(ErrorCode::UsageError,
                "kernel backend '" + std::string(backend_name(b)) + "' not supported on this CPU");
  }
#if defined(PLANTCAST_HAVE_AVX2)
  state() = b == Backend::Avx2 ? State{b, &kAvx2} : State{b, &kScalar};
#else
  state() = State{b, &kScalar};
#endif
}

double dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw Error(ErrorCode::ShapeMismatch, "dot: length mismatch");
  return state().table->dot(a.data(), b.data(), a.size());
}

void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  if (x.size() != y.size()) throw Error(ErrorCode::ShapeMismatch, "axpy: length mismatch");
  state().table->axpy(alpha, x.data(), y.data(), x.size());
}

void mul_acc(std::span<const double> a, std::span<const double> b, std::span<double> y) {
  if (a.size() != b.size() || a.size() != y.size()) {
    throw Error(ErrorCode::ShapeMismatch, "mul_acc: length mismatch");
  }
  state().table->mul_acc(a.data(), b.data(), y.data(), a.size());
}

double sum(std::span<const double> x) { return state().table->sum(x.data(), x.size()); }

void gemm_nn(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
             std::size_t n, bool accumulate) {
  const Table& t = *state().table;
  if (!accumulate) std::memset(c, 0, m * n * sizeof(double));
  for (std::size_t i = 0; i < m; ++i) {
    double* crow = c + i * n;
    const double* arow = a + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = arow[p];
      if (av != 0.0) t.axpy(av, b + p * n, crow, n);
    }
  }
}

void gemm_nt(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
             std::size_t n, bool accumulate) {
  const Table& t = *state().table;
  for (std::size_t i = 0; i < m; ++i) {
    const double* arow = a + i * k;
    double* crow = c + i * n;
    for (std::size_t j = 0; j < n; ++j) {
      const double v = t.dot(arow, b + j * k, k);
      crow[j] = accumulate ? crow[j] + v : v;
    }
  }
}

void gemm_tn(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
             std::size_t n, bool accumulate) {
  const Table& t = *state().table;
  if (!accumulate) std::memset(c, 0, k * n * sizeof(double));
  for (std::size_t i = 0; i < m; ++i) {
    const double* arow = a + i * k;
    const double* brow = b + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = arow[p];
      if (av != 0.0) t.axpy(av, brow, c + p * n, n);
    }
  }
}

}  // namespace plantcast::kernels
