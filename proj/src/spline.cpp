#include "plantcast/spline.hpp"

#include <algorithm>

#include "plantcast/error.hpp"

namespace plantcast {

namespace {

// Thomas algorithm; sub[0] and sup[n-1] are ignored.
std::vector<double> solve_tridiagonal(std::vector<double> sub, std::vector<double> diag,
                                      std::vector<double> sup, std::vector<double> rhs) {
  const std::size_t n = diag.size();
  for (std::size_t i = 1; i < n; ++i) {
    const double w = sub[i] / diag[i - 1];
    diag[i] -= w * sup[i - 1];
    rhs[i] -= w * rhs[i - 1];
  }
  std::vector<double> x(n);
  x[n - 1] = rhs[n - 1] / diag[n - 1];
  for (std::size_t i = n - 1; i-- > 0;) x[i] = (rhs[i] - sup[i] * x[i + 1]) / diag[i];
  return x;
}

}  // namespace

CubicSpline::CubicSpline(std::span<const double> x, std::span<const double> y)
    : x_(x.begin(), x.end()), y_(y.begin(), y.end()), m_(x.size(), 0.0) {
  if (x.size() != y.size()) throw Error(ErrorCode::ShapeMismatch, "spline: x and y lengths differ");
  const std::size_t n = x.size();
  if (n < 2) throw Error(ErrorCode::TooFewPoints, "spline needs at least 2 knots");
  for (std::size_t i = 1; i < n; ++i) {
    if (!(x_[i] > x_[i - 1])) throw Error(ErrorCode::ParseError, "spline knots must increase strictly");
  }
  if (n == 2) return;  // straight line, zero moments

  std::vector<double> h(n - 1), d(n - 1);
  for (std::size_t i = 0; i + 1 < n; ++i) {
    h[i] = x_[i + 1] - x_[i];
    d[i] = (y_[i + 1] - y_[i]) / h[i];
  }

  if (n == 3) {
    // single parabola: constant second derivative
    const double m = 2.0 * (d[1] - d[0]) / (h[0] + h[1]);
    m_.assign(3, m);
    return;
  }

  // Unknowns M1..M_{n-2}. Interior rows:
  //   h[i-1] M[i-1] + 2 (h[i-1]+h[i]) M[i] + h[i] M[i+1] = 6 (d[i] - d[i-1])
  // Not-a-knot eliminates M0 and M_{n-1}:
  //   M0      = ((h0+h1) M1 - h0 M2) / h1
  //   M_{n-1} = ((h_{n-3}+h_{n-2}) M_{n-2} - h_{n-2} M_{n-3}) / h_{n-3}
  const std::size_t k = n - 2;
  std::vector<double> sub(k, 0.0), diag(k, 0.0), sup(k, 0.0), rhs(k, 0.0);
  for (std::size_t j = 0; j < k; ++j) {
    const std::size_t i = j + 1;
    sub[j] = h[i - 1];
    diag[j] = 2.0 * (h[i - 1] + h[i]);
    sup[j] = h[i];
    rhs[j] = 6.0 * (d[i] - d[i - 1]);
  }
  {
    const double h0 = h[0], h1 = h[1];
    // row for i=1, multiplied through by h1
    diag[0] = (h0 + h1) * (h0 + 2.0 * h1);
    sup[0] = h1 * h1 - h0 * h0;
    rhs[0] *= h1;
  }
  {
    const double ha = h[n - 3], hb = h[n - 2];
    // row for i=n-2, multiplied through by ha
    sub[k - 1] = ha * ha - hb * hb;
    diag[k - 1] = (ha + hb) * (hb + 2.0 * ha);
    rhs[k - 1] = 6.0 * (d[n - 2] - d[n - 3]) * ha;
  }
  const std::vector<double> inner = solve_tridiagonal(std::move(sub), std::move(diag), std::move(sup), std::move(rhs));
  std::copy(inner.begin(), inner.end(), m_.begin() + 1);
  m_[0] = ((h[0] + h[1]) * m_[1] - h[0] * m_[2]) / h[1];
  m_[n - 1] = ((h[n - 3] + h[n - 2]) * m_[n - 2] - h[n - 2] * m_[n - 3]) / h[n - 3];
}

double CubicSpline::operator()(double t) const {
  const std::size_t n = x_.size();
  std::size_t i = 0;
  if (t >= x_[n - 1]) {
    i = n - 2;
  } else if (t > x_[0]) {
    i = static_cast<std::size_t>(std::upper_bound(x_.begin(), x_.end(), t) - x_.begin()) - 1;
  }
  const double h = x_[i + 1] - x_[i];
  const double a = x_[i + 1] - t;
  const double b = t - x_[i];
  return m_[i] * a * a * a / (6.0 * h) + m_[i + 1] * b * b * b / (6.0 * h) +
         (y_[i] / h - m_[i] * h / 6.0) * a + (y_[i + 1] / h - m_[i + 1] * h / 6.0) * b;
}

}  // namespace plantcast
