#pragma once

#include <span>
#include <vector>

namespace plantcast {

// Interpolating cubic spline with not-a-knot end conditions: the third
// derivative is continuous at the second and second-to-last knots, so any
// cubic polynomial is reproduced exactly. With 3 knots this is the parabola
// through them, with 2 knots the straight line.
class CubicSpline {
 public:
  // x strictly increasing, x.size() == y.size() >= 2. Throws TooFewPoints / ShapeMismatch.
  CubicSpline(std::span<const double> x, std::span<const double> y);

  double operator()(double t) const;
  // Second derivatives at the knots.
  const std::vector<double>& moments() const { return m_; }

 private:
  std::vector<double> x_;
  std::vector<double> y_;
  std::vector<double> m_;
};

}  // namespace plantcast
