#pragma once
// Dense double-precision inner loops used by the tensor graph.
//
// Every kernel has a portable scalar reference implementation and, on x86-64,
// an AVX2 variant. The variant is picked once at startup from CPUID and can be
// overridden (tests pin each backend in turn and compare them).
//
// axpy is bit-identical across backends (same operation order, no FMA).
// dot reorders the summation under AVX2, so results agree to rounding only.

#include <cstddef>
#include <span>
#include <string_view>

namespace plantcast::kernels {

enum class Backend { Scalar, Avx2 };

std::string_view backend_name(Backend b) noexcept;
bool backend_available(Backend b) noexcept;
Backend active_backend() noexcept;
// Throws plantcast::Error(UsageError) if the CPU lacks the backend.
void set_backend(Backend b);

double dot(std::span<const double> a, std::span<const double> b);
// y += alpha * x
void axpy(double alpha, std::span<const double> x, std::span<double> y);
// sum of elementwise products a[i]*b[i] accumulated into y[i]: y += a ⊙ b
void mul_acc(std::span<const double> a, std::span<const double> b, std::span<double> y);
double sum(std::span<const double> x);

// Row-major matrix products. `accumulate` adds into c instead of overwriting.
// c[m×n] = a[m×k] · b[k×n]
void gemm_nn(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
             std::size_t n, bool accumulate);
// c[m×n] = a[m×k] · b[n×k]ᵀ
void gemm_nt(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
             std::size_t n, bool accumulate);
// c[k×n] = a[m×k]ᵀ · b[m×n]
void gemm_tn(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
             std::size_t n, bool accumulate);

namespace scalar {
double dot(const double* a, const double* b, std::size_t n) noexcept;
void axpy(double alpha, const double* x, double* y, std::size_t n) noexcept;
void mul_acc(const double* a, const double* b, double* y, std::size_t n) noexcept;
double sum(const double* x, std::size_t n) noexcept;
}  // namespace scalar

namespace avx2 {
double dot(const double* a, const double* b, std::size_t n) noexcept;
void axpy(double alpha, const double* x, double* y, std::size_t n) noexcept;
void mul_acc(const double* a, const double* b, double* y, std::size_t n) noexcept;
double sum(const double* x, std::size_t n) noexcept;
}  // namespace avx2

}  // namespace plantcast::kernels
