#include "plantcast/student_t.hpp"

#include <boost/math/special_functions/digamma.hpp>
#include <cmath>
#include <numbers>
#include <random>

#include "plantcast/error.hpp"

namespace plantcast {

double softplus(double x) noexcept {
  return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

double sigmoid(double x) noexcept {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

StudentTParams params_from_raw(double raw_nu, double raw_mu, double raw_sigma) noexcept {
  return {2.0 + softplus(raw_nu), raw_mu, softplus(raw_sigma) + kSigmaFloor};
}

double student_t_nll(double y, const StudentTParams& p) {
  if (!(p.sigma > 0.0)) throw Error(ErrorCode::NonPositiveSigma, "Student-t scale must be positive");
  const double z = (y - p.mu) / p.sigma;
  const double nu = p.nu;
  return -std::lgamma(0.5 * (nu + 1.0)) + std::lgamma(0.5 * nu) + 0.5 * std::log(nu * std::numbers::pi) +
         std::log(p.sigma) + 0.5 * (nu + 1.0) * std::log1p(z * z / nu);
}

StudentTGrad student_t_nll_grad(double y, const StudentTParams& p) {
  if (!(p.sigma > 0.0)) throw Error(ErrorCode::NonPositiveSigma, "Student-t scale must be positive");
  const double nu = p.nu;
  const double z = (y - p.mu) / p.sigma;
  const double z2 = z * z;
  const double denom = nu + z2;
  StudentTGrad g;
  g.d_mu = -(nu + 1.0) * z / (p.sigma * denom);
  g.d_sigma = 1.0 / p.sigma - (nu + 1.0) * z2 / (p.sigma * denom);
  g.d_nu = -0.5 * boost::math::digamma(0.5 * (nu + 1.0)) + 0.5 * boost::math::digamma(0.5 * nu) + 0.5 / nu +
           0.5 * std::log1p(z2 / nu) - 0.5 * (nu + 1.0) * z2 / (nu * denom);
  return g;
}

double nll_loss(std::span<const StudentTParams> params, std::span<const double> targets) {
  if (params.size() != targets.size() || params.empty()) {
    throw Error(ErrorCode::LengthMismatch, "nll_loss needs one target per position");
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < params.size(); ++i) acc += student_t_nll(targets[i], params[i]);
  return acc / static_cast<double>(params.size());
}

double draw_standard_t(double nu, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::chi_squared_distribution<double> chi2(nu);
  const double z = normal(rng);
  const double c = chi2(rng);
  return z * std::sqrt(nu / c);
}

std::vector<double> sample_student_t(const StudentTParams& p, std::size_t n, Rng& rng) {
  std::vector<double> out(n);
  for (double& v : out) v = p.mu + p.sigma * draw_standard_t(p.nu, rng);
  return out;
}

}  // namespace plantcast
