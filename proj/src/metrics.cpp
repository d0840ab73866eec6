#include "plantcast/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "plantcast/error.hpp"

namespace plantcast {

double crps_samples(std::span<const double> samples, double y) {
  const std::size_t n = samples.size();
  if (n < 2) throw Error(ErrorCode::TooFewSamples, "CRPS needs at least 2 samples, got " + std::to_string(n));
  std::vector<double> x(samples.begin(), samples.end());
  std::sort(x.begin(), x.end());
  double abs_err = 0.0;
  for (double v : x) abs_err += std::abs(v - y);
  // Σ_{i≠j}|x_i - x_j| = 2 Σ_i (2i - n + 1) x_(i) over the sorted sample.
  double spread = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    spread += (2.0 * static_cast<double>(i) - static_cast<double>(n) + 1.0) * x[i];
  }
  spread *= 2.0;
  const double dn = static_cast<double>(n);
  return abs_err / dn - spread / (2.0 * dn * (dn - 1.0));
}

double crps_point(double x, double y) noexcept { return std::abs(x - y); }

PointMetrics point_metrics(std::span<const double> pred, std::span<const double> actual) {
  if (pred.size() != actual.size()) {
    throw Error(ErrorCode::LengthMismatch, "point metrics: " + std::to_string(pred.size()) + " predictions vs " +
                                               std::to_string(actual.size()) + " actuals");
  }
  PointMetrics out;
  const std::size_t n = pred.size();
  if (n == 0) {
    out.pearson_defined = false;
    return out;
  }
  double se = 0.0, ae = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = pred[i] - actual[i];
    se += d * d;
    ae += std::abs(d);
  }
  out.mse = se / static_cast<double>(n);
  out.mae = ae / static_cast<double>(n);
  out.rmse = std::sqrt(out.mse);

  const double mp = std::accumulate(pred.begin(), pred.end(), 0.0) / static_cast<double>(n);
  const double ma = std::accumulate(actual.begin(), actual.end(), 0.0) / static_cast<double>(n);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double a = pred[i] - mp, b = actual[i] - ma;
    sxy += a * b;
    sxx += a * a;
    syy += b * b;
  }
  if (n < 2 || sxx == 0.0 || syy == 0.0) {
    out.pearson_r = 0.0;
    out.pearson_defined = false;
  } else {
    out.pearson_r = std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
  }
  return out;
}

void MetricAccumulator::add(std::span<const double> samples, double actual) {
  crps_sum_ += crps_samples(samples, actual);
  abs_actual_sum_ += std::abs(actual);
  mean_.push_back(std::accumulate(samples.begin(), samples.end(), 0.0) / static_cast<double>(samples.size()));
  actual_.push_back(actual);
}

MetricReport MetricAccumulator::report() const {
  MetricReport r;
  r.n_points = actual_.size();
  if (actual_.empty()) return r;
  const PointMetrics pm = point_metrics(mean_, actual_);
  r.crps_mean = crps_sum_ / static_cast<double>(actual_.size());
  r.crps_normalized = abs_actual_sum_ > 0.0 ? crps_sum_ / abs_actual_sum_ : 0.0;
  r.mse = pm.mse;
  r.mae = pm.mae;
  r.rmse = pm.rmse;
  r.pearson_r = pm.pearson_r;
  r.pearson_defined = pm.pearson_defined;
  return r;
}

}  // namespace plantcast
