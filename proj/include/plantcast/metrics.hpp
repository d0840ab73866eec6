#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace plantcast {

// Unbiased sample CRPS: mean|x_i - y| - Σ_{i≠j}|x_i - x_j| / (2n(n-1)).
// Throws TooFewSamples for n < 2.
double crps_samples(std::span<const double> samples, double y);
double crps_point(double x, double y) noexcept;

struct PointMetrics {
  double mse = 0.0;
  double mae = 0.0;
  double rmse = 0.0;
  double pearson_r = 0.0;
  bool pearson_defined = true;  // false when either side is constant
};

// Throws LengthMismatch; Pearson needs n >= 2 (else reported as 0, undefined).
PointMetrics point_metrics(std::span<const double> pred, std::span<const double> actual);

struct MetricReport {
  double crps_mean = 0.0;
  double crps_normalized = 0.0;
  double mse = 0.0;
  double mae = 0.0;
  double rmse = 0.0;
  double pearson_r = 0.0;
  bool pearson_defined = true;
  std::size_t n_points = 0;
};

// Pools (forecast step, actual) pairs from any number of windows.
class MetricAccumulator {
 public:
  void add(std::span<const double> samples, double actual);
  MetricReport report() const;
  std::size_t size() const noexcept { return actual_.size(); }

 private:
  std::vector<double> mean_;
  std::vector<double> actual_;
  double crps_sum_ = 0.0;
  double abs_actual_sum_ = 0.0;
};

}  // namespace plantcast
