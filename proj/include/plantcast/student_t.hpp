#pragma once
// Location-scale Student-t distribution head: parameter constraints, negative
// log-likelihood with analytic gradients, and sampling.

#include <cstddef>
#include <span>
#include <vector>

#include "plantcast/rng.hpp"

namespace plantcast {

inline constexpr double kSigmaFloor = 1e-6;

struct StudentTParams {
  double nu = 3.0;
  double mu = 0.0;
  double sigma = 1.0;
};

struct StudentTGrad {
  double d_nu = 0.0;
  double d_mu = 0.0;
  double d_sigma = 0.0;
};

double softplus(double x) noexcept;
double sigmoid(double x) noexcept;

// nu = 2 + softplus(raw_nu), mu = raw_mu, sigma = softplus(raw_sigma) + 1e-6
StudentTParams params_from_raw(double raw_nu, double raw_mu, double raw_sigma) noexcept;

// -log p(y) for the location-scale t. Throws NonPositiveSigma.
double student_t_nll(double y, const StudentTParams& p);
StudentTGrad student_t_nll_grad(double y, const StudentTParams& p);

// Mean NLL over positions. Throws LengthMismatch.
double nll_loss(std::span<const StudentTParams> params, std::span<const double> targets);

// Standard t variate Z * sqrt(nu / chi2_nu).
double draw_standard_t(double nu, Rng& rng);
std::vector<double> sample_student_t(const StudentTParams& p, std::size_t n, Rng& rng);

}  // namespace plantcast
