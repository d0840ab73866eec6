#include "plantcast/graph.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "plantcast/error.hpp"
#include "plantcast/kernels.hpp"
#include "plantcast/student_t.hpp"

namespace plantcast::nn {

Graph::Graph(bool training, std::uint64_t seed) : training_(training), rng_(derive_seed(seed, 0xd209)) {}

Var Graph::push(std::string op, Tensor value, std::vector<std::size_t> inputs,
                std::function<void(Graph&, std::size_t)> back) {
  nodes_.push_back(Node{std::move(op), std::move(value), Tensor{}, std::move(inputs), std::move(back)});
  return Var{nodes_.size() - 1};
}

void Graph::shape_error(const std::string& op, const std::string& detail) const {
  throw Error(ErrorCode::ShapeMismatch, "node #" + std::to_string(nodes_.size()) + " (" + op + "): " + detail);
}

Tensor& Graph::grad_ref(std::size_t id) {
  Node& n = nodes_[id];
  if (n.grad.size() != n.value.size() || n.grad.shape() != n.value.shape()) n.grad = Tensor(n.value.shape(), 0.0);
  return n.grad;
}

Tensor Graph::grad(Var v) const {
  const Node& n = nodes_.at(v.id);
  if (n.grad.shape() == n.value.shape() && n.grad.size() == n.value.size()) return n.grad;
  return Tensor(n.value.shape(), 0.0);
}

Var Graph::constant(Tensor value) { return push("constant", std::move(value), {}, nullptr); }

Var Graph::parameter(const std::string& name, const Tensor& value) {
  if (auto it = params_.find(name); it != params_.end()) return Var{it->second};
  Var v = push("param:" + name, value, {}, nullptr);
  params_.emplace(name, v.id);
  return v;
}

// ---------------------------------------------------------------------------
// Linear algebra

Var Graph::matmul(Var a, Var b) {
  const Tensor& A = value(a);
  const Tensor& B = value(b);
  if (B.rank() != 2 || A.cols() != B.rows()) {
    shape_error("matmul", shape_string(A.shape()) + " · " + shape_string(B.shape()));
  }
  const std::size_t m = A.rows(), k = A.cols(), n = B.cols();
  Tensor C = Tensor::matrix(m, n);
  kernels::gemm_nn(A.data(), B.data(), C.data(), m, k, n, false);
  return push("matmul", std::move(C), {a.id, b.id}, [m, k, n](Graph& g, std::size_t self) {
    const std::size_t ia = g.nodes_[self].inputs[0], ib = g.nodes_[self].inputs[1];
    const Tensor& dC = g.nodes_[self].grad;
    kernels::gemm_nt(dC.data(), g.nodes_[ib].value.data(), g.grad_ref(ia).data(), m, n, k, true);
    kernels::gemm_tn(g.nodes_[ia].value.data(), dC.data(), g.grad_ref(ib).data(), m, k, n, true);
  });
}

Var Graph::matmul_nt(Var a, Var b) {
  const Tensor& A = value(a);
  const Tensor& B = value(b);
  if (A.cols() != B.cols()) shape_error("matmul_nt", shape_string(A.shape()) + " · " + shape_string(B.shape()) + "ᵀ");
  const std::size_t m = A.rows(), k = A.cols(), n = B.rows();
  Tensor C = Tensor::matrix(m, n);
  kernels::gemm_nt(A.data(), B.data(), C.data(), m, k, n, false);
  return push("matmul_nt", std::move(C), {a.id, b.id}, [m, k, n](Graph& g, std::size_t self) {
    const std::size_t ia = g.nodes_[self].inputs[0], ib = g.nodes_[self].inputs[1];
    const Tensor& dC = g.nodes_[self].grad;
    kernels::gemm_nn(dC.data(), g.nodes_[ib].value.data(), g.grad_ref(ia).data(), m, n, k, true);
    kernels::gemm_tn(dC.data(), g.nodes_[ia].value.data(), g.grad_ref(ib).data(), m, n, k, true);
  });
}

// ---------------------------------------------------------------------------
// Elementwise

Var Graph::add(Var a, Var b) {
  const Tensor& A = value(a);
  const Tensor& B = value(b);
  if (!A.same_shape(B)) shape_error("add", shape_string(A.shape()) + " + " + shape_string(B.shape()));
  Tensor C = A;
  kernels::axpy(1.0, B.values(), C.values());
  return push("add", std::move(C), {a.id, b.id}, [](Graph& g, std::size_t self) {
    const Tensor& d = g.nodes_[self].grad;
    for (std::size_t in : g.nodes_[self].inputs) kernels::axpy(1.0, d.values(), g.grad_ref(in).values());
  });
}

Var Graph::sub(Var a, Var b) {
  const Tensor& A = value(a);
  const Tensor& B = value(b);
  if (!A.same_shape(B)) shape_error("sub", shape_string(A.shape()) + " - " + shape_string(B.shape()));
  Tensor C = A;
  kernels::axpy(-1.0, B.values(), C.values());
  return push("sub", std::move(C), {a.id, b.id}, [](Graph& g, std::size_t self) {
    const Tensor& d = g.nodes_[self].grad;
    kernels::axpy(1.0, d.values(), g.grad_ref(g.nodes_[self].inputs[0]).values());
    kernels::axpy(-1.0, d.values(), g.grad_ref(g.nodes_[self].inputs[1]).values());
  });
}

Var Graph::mul(Var a, Var b) {
  const Tensor& A = value(a);
  const Tensor& B = value(b);
  if (!A.same_shape(B)) shape_error("mul", shape_string(A.shape()) + " * " + shape_string(B.shape()));
  Tensor C(A.shape(), 0.0);
  kernels::mul_acc(A.values(), B.values(), C.values());
  return push("mul", std::move(C), {a.id, b.id}, [](Graph& g, std::size_t self) {
    const std::size_t ia = g.nodes_[self].inputs[0], ib = g.nodes_[self].inputs[1];
    const Tensor& d = g.nodes_[self].grad;
    kernels::mul_acc(d.values(), g.nodes_[ib].value.values(), g.grad_ref(ia).values());
    kernels::mul_acc(d.values(), g.nodes_[ia].value.values(), g.grad_ref(ib).values());
  });
}

Var Graph::add_row(Var a, Var row) {
  const Tensor& A = value(a);
  const Tensor& R = value(row);
  if (R.size() != A.cols()) shape_error("add_row", shape_string(A.shape()) + " + row " + shape_string(R.shape()));
  Tensor C = A;
  for (std::size_t r = 0; r < C.rows(); ++r) kernels::axpy(1.0, R.values(), C.row(r));
  return push("add_row", std::move(C), {a.id, row.id}, [](Graph& g, std::size_t self) {
    const Tensor& d = g.nodes_[self].grad;
    kernels::axpy(1.0, d.values(), g.grad_ref(g.nodes_[self].inputs[0]).values());
    Tensor& dr = g.grad_ref(g.nodes_[self].inputs[1]);
    for (std::size_t r = 0; r < d.rows(); ++r) kernels::axpy(1.0, d.row(r), dr.values());
  });
}

Var Graph::mul_row(Var a, Var row) {
  const Tensor& A = value(a);
  const Tensor& R = value(row);
  if (R.size() != A.cols()) shape_error("mul_row", shape_string(A.shape()) + " * row " + shape_string(R.shape()));
  Tensor C(A.shape(), 0.0);
  for (std::size_t r = 0; r < C.rows(); ++r) kernels::mul_acc(A.row(r), R.values(), C.row(r));
  return push("mul_row", std::move(C), {a.id, row.id}, [](Graph& g, std::size_t self) {
    const std::size_t ia = g.nodes_[self].inputs[0], ir = g.nodes_[self].inputs[1];
    const Tensor& d = g.nodes_[self].grad;
    const Tensor& Av = g.nodes_[ia].value;
    const Tensor& Rv = g.nodes_[ir].value;
    Tensor& da = g.grad_ref(ia);
    Tensor& dr = g.grad_ref(ir);
    for (std::size_t r = 0; r < d.rows(); ++r) {
      kernels::mul_acc(d.row(r), Rv.values(), da.row(r));
      kernels::mul_acc(d.row(r), Av.row(r), dr.values());
    }
  });
}

Var Graph::scale(Var a, double s) {
  Tensor C(value(a).shape(), 0.0);
  kernels::axpy(s, value(a).values(), C.values());
  return push("scale", std::move(C), {a.id}, [s](Graph& g, std::size_t self) {
    kernels::axpy(s, g.nodes_[self].grad.values(), g.grad_ref(g.nodes_[self].inputs[0]).values());
  });
}

Var Graph::square(Var a) { return mul(a, a); }

Var Graph::gelu(Var a) {
  constexpr double inv_sqrt2 = 0.70710678118654752440;
  constexpr double inv_sqrt2pi = 0.39894228040143267794;
  const Tensor& X = value(a);
  Tensor Y(X.shape(), 0.0);
  for (std::size_t i = 0; i < X.size(); ++i) Y[i] = 0.5 * X[i] * (1.0 + std::erf(X[i] * inv_sqrt2));
  return push("gelu", std::move(Y), {a.id}, [](Graph& g, std::size_t self) {
    const std::size_t ia = g.nodes_[self].inputs[0];
    const Tensor& d = g.nodes_[self].grad;
    const Tensor& x = g.nodes_[ia].value;
    Tensor& dx = g.grad_ref(ia);
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double cdf = 0.5 * (1.0 + std::erf(x[i] * inv_sqrt2));
      const double pdf = inv_sqrt2pi * std::exp(-0.5 * x[i] * x[i]);
      dx[i] += d[i] * (cdf + x[i] * pdf);
    }
  });
}

Var Graph::softplus(Var a) {
  const Tensor& X = value(a);
  Tensor Y(X.shape(), 0.0);
  for (std::size_t i = 0; i < X.size(); ++i) Y[i] = plantcast::softplus(X[i]);
  return push("softplus", std::move(Y), {a.id}, [](Graph& g, std::size_t self) {
    const std::size_t ia = g.nodes_[self].inputs[0];
    const Tensor& d = g.nodes_[self].grad;
    const Tensor& x = g.nodes_[ia].value;
    Tensor& dx = g.grad_ref(ia);
    for (std::size_t i = 0; i < x.size(); ++i) dx[i] += d[i] * sigmoid(x[i]);
  });
}

// ---------------------------------------------------------------------------
// Softmax and normalization

namespace {

// Row-wise softmax over the first `limit(r)` columns; remaining columns are 0.
template <class Limit>
Tensor softmax_impl(const Tensor& X, Limit limit) {
  Tensor Y(X.shape(), 0.0);
  for (std::size_t r = 0; r < X.rows(); ++r) {
    const auto x = X.row(r);
    auto y = Y.row(r);
    const std::size_t n = limit(r);
    const double mx = *std::max_element(x.begin(), x.begin() + static_cast<std::ptrdiff_t>(n));
    double total = 0.0;
    for (std::size_t c = 0; c < n; ++c) {
      y[c] = std::exp(x[c] - mx);
      total += y[c];
    }
    for (std::size_t c = 0; c < n; ++c) y[c] /= total;
  }
  return Y;
}

void softmax_backward(const Tensor& Y, const Tensor& dY, Tensor& dX) {
  for (std::size_t r = 0; r < Y.rows(); ++r) {
    const auto y = Y.row(r);
    const auto dy = dY.row(r);
    auto dx = dX.row(r);
    double dotp = 0.0;
    for (std::size_t c = 0; c < y.size(); ++c) dotp += y[c] * dy[c];
    for (std::size_t c = 0; c < y.size(); ++c) dx[c] += y[c] * (dy[c] - dotp);
  }
}

}  // namespace

Var Graph::softmax_rows(Var a) {
  const Tensor& X = value(a);
  const std::size_t cols = X.cols();
  Tensor Y = softmax_impl(X, [cols](std::size_t) { return cols; });
  return push("softmax", std::move(Y), {a.id}, [](Graph& g, std::size_t self) {
    softmax_backward(g.nodes_[self].value, g.nodes_[self].grad, g.grad_ref(g.nodes_[self].inputs[0]));
  });
}

Var Graph::causal_softmax(Var a) {
  const Tensor& X = value(a);
  if (X.rank() != 2 || X.rows() != X.cols()) shape_error("causal_softmax", "needs square scores, got " + shape_string(X.shape()));
  Tensor Y = softmax_impl(X, [](std::size_t r) { return r + 1; });
  return push("causal_softmax", std::move(Y), {a.id}, [](Graph& g, std::size_t self) {
    softmax_backward(g.nodes_[self].value, g.nodes_[self].grad, g.grad_ref(g.nodes_[self].inputs[0]));
  });
}

Var Graph::layer_norm(Var a) {
  const Tensor& X = value(a);
  const std::size_t cols = X.cols();
  Tensor Y(X.shape(), 0.0);
  std::vector<double> inv_std(X.rows());
  for (std::size_t r = 0; r < X.rows(); ++r) {
    const auto x = X.row(r);
    double mean = 0.0;
    for (double v : x) mean += v;
    mean /= static_cast<double>(cols);
    double var = 0.0;
    for (double v : x) var += (v - mean) * (v - mean);
    var /= static_cast<double>(cols);
    inv_std[r] = 1.0 / std::sqrt(var + kLayerNormEps);
    auto y = Y.row(r);
    for (std::size_t c = 0; c < cols; ++c) y[c] = (x[c] - mean) * inv_std[r];
  }
  return push("layer_norm", std::move(Y), {a.id}, [inv_std = std::move(inv_std)](Graph& g, std::size_t self) {
    const Tensor& Yv = g.nodes_[self].value;
    const Tensor& dY = g.nodes_[self].grad;
    Tensor& dX = g.grad_ref(g.nodes_[self].inputs[0]);
    const double n = static_cast<double>(Yv.cols());
    for (std::size_t r = 0; r < Yv.rows(); ++r) {
      const auto y = Yv.row(r);
      const auto dy = dY.row(r);
      auto dx = dX.row(r);
      double mean_dy = 0.0, mean_dyy = 0.0;
      for (std::size_t c = 0; c < y.size(); ++c) {
        mean_dy += dy[c];
        mean_dyy += dy[c] * y[c];
      }
      mean_dy /= n;
      mean_dyy /= n;
      for (std::size_t c = 0; c < y.size(); ++c) dx[c] += inv_std[r] * (dy[c] - mean_dy - y[c] * mean_dyy);
    }
  });
}

Var Graph::dropout(Var a, double p) {
  if (!training_ || p <= 0.0) return a;
  if (p >= 1.0) shape_error("dropout", "probability must be < 1");
  const Tensor& X = value(a);
  Tensor mask(X.shape(), 0.0);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double keep_scale = 1.0 / (1.0 - p);
  for (std::size_t i = 0; i < mask.size(); ++i) mask[i] = u(rng_) >= p ? keep_scale : 0.0;
  Tensor Y(X.shape(), 0.0);
  kernels::mul_acc(X.values(), mask.values(), Y.values());
  return push("dropout", std::move(Y), {a.id}, [mask = std::move(mask)](Graph& g, std::size_t self) {
    kernels::mul_acc(g.nodes_[self].grad.values(), mask.values(), g.grad_ref(g.nodes_[self].inputs[0]).values());
  });
}

// ---------------------------------------------------------------------------
// Layout

Var Graph::slice_cols(Var a, std::size_t begin, std::size_t count) {
  const Tensor& X = value(a);
  if (begin + count > X.cols()) shape_error("slice_cols", "columns [" + std::to_string(begin) + "," +
                                                              std::to_string(begin + count) + ") of " + shape_string(X.shape()));
  Tensor Y = Tensor::matrix(X.rows(), count);
  for (std::size_t r = 0; r < X.rows(); ++r) {
    std::copy_n(X.row(r).begin() + static_cast<std::ptrdiff_t>(begin), count, Y.row(r).begin());
  }
  return push("slice_cols", std::move(Y), {a.id}, [begin, count](Graph& g, std::size_t self) {
    const Tensor& d = g.nodes_[self].grad;
    Tensor& dx = g.grad_ref(g.nodes_[self].inputs[0]);
    for (std::size_t r = 0; r < d.rows(); ++r) {
      kernels::axpy(1.0, d.row(r), dx.row(r).subspan(begin, count));
    }
  });
}

Var Graph::concat_cols(std::span<const Var> parts) {
  if (parts.empty()) shape_error("concat_cols", "no inputs");
  const std::size_t rows = value(parts[0]).rows();
  std::size_t cols = 0;
  std::vector<std::size_t> ids;
  for (Var p : parts) {
    if (value(p).rows() != rows) shape_error("concat_cols", "row count mismatch");
    cols += value(p).cols();
    ids.push_back(p.id);
  }
  Tensor Y = Tensor::matrix(rows, cols);
  std::size_t off = 0;
  for (Var p : parts) {
    const Tensor& X = value(p);
    for (std::size_t r = 0; r < rows; ++r) std::copy(X.row(r).begin(), X.row(r).end(), Y.row(r).begin() + static_cast<std::ptrdiff_t>(off));
    off += X.cols();
  }
  return push("concat_cols", std::move(Y), std::move(ids), [](Graph& g, std::size_t self) {
    const Tensor& d = g.nodes_[self].grad;
    std::size_t off = 0;
    for (std::size_t in : g.nodes_[self].inputs) {
      Tensor& dx = g.grad_ref(in);
      const std::size_t w = dx.cols();
      for (std::size_t r = 0; r < d.rows(); ++r) kernels::axpy(1.0, d.row(r).subspan(off, w), dx.row(r));
      off += w;
    }
  });
}

Var Graph::rope(Var a, std::span<const double> positions, double base) {
  const Tensor& X = value(a);
  const std::size_t d = X.cols();
  if (d % 2 != 0) throw Error(ErrorCode::OddHeadDim, "rotary encoding needs an even head dimension, got " + std::to_string(d));
  if (positions.size() != X.rows()) shape_error("rope", "one position per row required");
  // cos/sin table [rows × d/2]
  std::vector<double> cs(X.rows() * d), sn(X.rows() * d);
  for (std::size_t r = 0; r < X.rows(); ++r) {
    for (std::size_t i = 0; i < d / 2; ++i) {
      const double theta = std::pow(base, -2.0 * static_cast<double>(i) / static_cast<double>(d));
      const double ang = positions[r] * theta;
      cs[r * d + i] = std::cos(ang);
      sn[r * d + i] = std::sin(ang);
    }
  }
  Tensor Y(X.shape(), 0.0);
  for (std::size_t r = 0; r < X.rows(); ++r) {
    for (std::size_t i = 0; i < d / 2; ++i) {
      const double c = cs[r * d + i], s = sn[r * d + i];
      const double x0 = X.at(r, 2 * i), x1 = X.at(r, 2 * i + 1);
      Y.at(r, 2 * i) = x0 * c - x1 * s;
      Y.at(r, 2 * i + 1) = x0 * s + x1 * c;
    }
  }
  return push("rope", std::move(Y), {a.id}, [d, cs = std::move(cs), sn = std::move(sn)](Graph& g, std::size_t self) {
    const Tensor& dy = g.nodes_[self].grad;
    Tensor& dx = g.grad_ref(g.nodes_[self].inputs[0]);
    for (std::size_t r = 0; r < dy.rows(); ++r) {
      for (std::size_t i = 0; i < d / 2; ++i) {
        const double c = cs[r * d + i], s = sn[r * d + i];
        const double g0 = dy.at(r, 2 * i), g1 = dy.at(r, 2 * i + 1);
        dx.at(r, 2 * i) += g0 * c + g1 * s;
        dx.at(r, 2 * i + 1) += -g0 * s + g1 * c;
      }
    }
  });
}

// ---------------------------------------------------------------------------
// Reductions and losses

Var Graph::sum(Var a) {
  const double s = kernels::sum(value(a).values());
  return push("sum", Tensor::scalar(s), {a.id}, [](Graph& g, std::size_t self) {
    const double d = g.nodes_[self].grad[0];
    Tensor& dx = g.grad_ref(g.nodes_[self].inputs[0]);
    for (double& v : dx.values()) v += d;
  });
}

Var Graph::mean(Var a) {
  const double n = static_cast<double>(value(a).size());
  const double s = kernels::sum(value(a).values()) / n;
  return push("mean", Tensor::scalar(s), {a.id}, [n](Graph& g, std::size_t self) {
    const double d = g.nodes_[self].grad[0] / n;
    Tensor& dx = g.grad_ref(g.nodes_[self].inputs[0]);
    for (double& v : dx.values()) v += d;
  });
}

Var Graph::student_t_nll(Var raw, std::span<const double> targets) {
  const Tensor& R = value(raw);
  if (R.cols() != 3 || R.rows() != targets.size()) {
    shape_error("student_t_nll", "raw " + shape_string(R.shape()) + " vs " + std::to_string(targets.size()) + " targets");
  }
  std::vector<double> y(targets.begin(), targets.end());
  double acc = 0.0;
  for (std::size_t r = 0; r < R.rows(); ++r) {
    acc += plantcast::student_t_nll(y[r], params_from_raw(R.at(r, 0), R.at(r, 1), R.at(r, 2)));
  }
  const double n = static_cast<double>(R.rows());
  return push("student_t_nll", Tensor::scalar(acc / n), {raw.id}, [y = std::move(y), n](Graph& g, std::size_t self) {
    const std::size_t ir = g.nodes_[self].inputs[0];
    const Tensor& R = g.nodes_[ir].value;
    const double d = g.nodes_[self].grad[0] / n;
    Tensor& dR = g.grad_ref(ir);
    for (std::size_t r = 0; r < R.rows(); ++r) {
      const StudentTParams p = params_from_raw(R.at(r, 0), R.at(r, 1), R.at(r, 2));
      const StudentTGrad gr = student_t_nll_grad(y[r], p);
      dR.at(r, 0) += d * gr.d_nu * sigmoid(R.at(r, 0));
      dR.at(r, 1) += d * gr.d_mu;
      dR.at(r, 2) += d * gr.d_sigma * sigmoid(R.at(r, 2));
    }
  });
}

Var Graph::mse_on_mean(Var raw, std::span<const double> targets) {
  const Tensor& R = value(raw);
  if (R.cols() != 3 || R.rows() != targets.size()) {
    shape_error("mse_on_mean", "raw " + shape_string(R.shape()) + " vs " + std::to_string(targets.size()) + " targets");
  }
  std::vector<double> y(targets.begin(), targets.end());
  double acc = 0.0;
  for (std::size_t r = 0; r < R.rows(); ++r) acc += (R.at(r, 1) - y[r]) * (R.at(r, 1) - y[r]);
  const double n = static_cast<double>(R.rows());
  return push("mse_on_mean", Tensor::scalar(acc / n), {raw.id}, [y = std::move(y), n](Graph& g, std::size_t self) {
    const std::size_t ir = g.nodes_[self].inputs[0];
    const Tensor& R = g.nodes_[ir].value;
    const double d = g.nodes_[self].grad[0] / n;
    Tensor& dR = g.grad_ref(ir);
    for (std::size_t r = 0; r < R.rows(); ++r) dR.at(r, 1) += d * 2.0 * (R.at(r, 1) - y[r]);
  });
}

// ---------------------------------------------------------------------------

void Graph::backward(Var loss) {
  const Tensor& L = value(loss);
  if (L.size() != 1) {
    throw Error(ErrorCode::NotScalarLoss, "loss node #" + std::to_string(loss.id) + " (" + nodes_[loss.id].op +
                                              ") has shape " + shape_string(L.shape()));
  }
  for (Node& n : nodes_) n.grad = Tensor{};
  grad_ref(loss.id)[0] = 1.0;
  for (std::size_t id = loss.id + 1; id-- > 0;) {
    Node& n = nodes_[id];
    if (!n.back || n.grad.size() != n.value.size()) continue;
    n.back(*this, id);
  }
}

ParamMap Graph::parameter_gradients() const {
  ParamMap out;
  for (const auto& [name, id] : params_) out.emplace(name, grad(Var{id}));
  return out;
}

// ---------------------------------------------------------------------------

GradCheckResult grad_check(const ParamMap& params, const LossBuilder& build, double eps, bool training,
                           std::uint64_t seed, std::size_t max_entries_per_tensor) {
  if (eps < 1e-6 || eps > 1e-2) throw Error(ErrorCode::UsageError, "grad_check eps must lie in [1e-6, 1e-2]");
  ParamMap analytic;
  {
    Graph g(training, seed);
    const Var loss = build(g, params);
    g.backward(loss);
    analytic = g.parameter_gradients();
  }
  auto eval = [&](const ParamMap& p) {
    Graph g(training, seed);
    return g.value(build(g, p))[0];
  };

  GradCheckResult result;
  ParamMap probe = params;
  Rng pick(derive_seed(seed, 0x9c));
  for (auto& [name, tensor] : probe) {
    const Tensor zero(tensor.shape(), 0.0);
    const auto it = analytic.find(name);
    const Tensor& an = it != analytic.end() ? it->second : zero;
    std::vector<std::size_t> idx(tensor.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    if (max_entries_per_tensor != 0 && idx.size() > max_entries_per_tensor) {
      std::shuffle(idx.begin(), idx.end(), pick);
      idx.resize(max_entries_per_tensor);
      std::sort(idx.begin(), idx.end());
    }
    double diff2 = 0.0, an2 = 0.0, nu2 = 0.0;
    for (std::size_t i : idx) {
      const double orig = tensor[i];
      tensor[i] = orig + eps;
      const double fp = eval(probe);
      tensor[i] = orig - eps;
      const double fm = eval(probe);
      tensor[i] = orig;
      const double numeric = (fp - fm) / (2.0 * eps);
      const double a = an[i];
      const double rel = std::abs(a - numeric) / std::max(1e-8, std::abs(a) + std::abs(numeric));
      diff2 += (a - numeric) * (a - numeric);
      an2 += a * a;
      nu2 += numeric * numeric;
      ++result.entries_checked;
      if (rel > result.max_rel_error) {
        result.max_rel_error = rel;
        result.worst_parameter = name;
        result.worst_index = i;
      }
    }
    const double tensor_rel = std::sqrt(diff2) / std::max(1e-8, std::sqrt(an2) + std::sqrt(nu2));
    if (tensor_rel > result.max_tensor_rel_error) {
      result.max_tensor_rel_error = tensor_rel;
      result.worst_tensor = name;
    }
  }
  return result;
}

}  // namespace plantcast::nn
