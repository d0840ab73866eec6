#pragma once
// Define-by-run computation graph with reverse-mode gradient accumulation.
//
// A Graph records every operation as it is applied; node ids are assigned in
// creation order, which is a topological order, so backward() is a single
// reverse sweep. Parameters are named leaves; requesting the same name twice
// returns the same node, so shared weights accumulate one gradient.

#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "plantcast/rng.hpp"
#include "plantcast/tensor.hpp"

namespace plantcast::nn {

using ParamMap = std::map<std::string, Tensor>;

struct Var {
  std::size_t id = 0;
};

inline constexpr double kLayerNormEps = 1e-5;

class Graph {
 public:
  // `training` enables dropout; masks come from a generator seeded with `seed`.
  explicit Graph(bool training = false, std::uint64_t seed = 0);

  Var constant(Tensor value);
  Var parameter(const std::string& name, const Tensor& value);

  Var matmul(Var a, Var b);     // [m×k]·[k×n]
  Var matmul_nt(Var a, Var b);  // [m×k]·[n×k]ᵀ
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);        // elementwise
  Var add_row(Var a, Var row);  // row broadcast over every row of a
  Var mul_row(Var a, Var row);
  Var scale(Var a, double s);
  Var square(Var a);
  Var gelu(Var a);  // exact (erf) form
  Var softplus(Var a);
  Var softmax_rows(Var a);    // max-subtracted
  Var causal_softmax(Var a);  // square scores; entries above the diagonal are exactly 0
  Var layer_norm(Var a);      // per-row standardization, no affine
  Var dropout(Var a, double p);
  Var slice_cols(Var a, std::size_t begin, std::size_t count);
  Var concat_cols(std::span<const Var> parts);
  // Rotates column pairs (2i, 2i+1) of row r by positions[r] * base^(-2i/cols).
  Var rope(Var a, std::span<const double> positions, double base);
  Var sum(Var a);
  Var mean(Var a);

  // raw [T×3] = (raw_nu, raw_mu, raw_sigma) per row; mean Student-t NLL of targets.
  Var student_t_nll(Var raw, std::span<const double> targets);
  // mean squared error between column 1 (the location) and targets.
  Var mse_on_mean(Var raw, std::span<const double> targets);

  const Tensor& value(Var v) const { return nodes_.at(v.id).value; }
  // Gradient of the last backward() loss; zero tensor if the node was unreachable.
  Tensor grad(Var v) const;

  // Throws NotScalarLoss unless the loss has exactly one element.
  void backward(Var loss);
  ParamMap parameter_gradients() const;

  std::size_t size() const noexcept { return nodes_.size(); }
  bool training() const noexcept { return training_; }

 private:
  struct Node {
    std::string op;
    Tensor value;
    Tensor grad;  // allocated lazily during backward
    std::vector<std::size_t> inputs;
    std::function<void(Graph&, std::size_t)> back;
  };

  Var push(std::string op, Tensor value, std::vector<std::size_t> inputs,
           std::function<void(Graph&, std::size_t)> back);
  Tensor& grad_ref(std::size_t id);
  [[noreturn]] void shape_error(const std::string& op, const std::string& detail) const;

  std::vector<Node> nodes_;
  std::map<std::string, std::size_t> params_;
  bool training_;
  Rng rng_;
};

// Central-difference gradient check over every entry of every parameter (or a
// seeded random subsample of `max_entries_per_tensor` entries for larger
// tensors, 0 = all). The loss closure is re-run on a fresh Graph with the same
// seed each time, so dropout masks match.
// Entry error: |a - n| / max(1e-8, |a| + |n|). Tensor error:
// ||a - n|| / (||a|| + ||n||) over the checked entries of one parameter.
struct GradCheckResult {
  double max_rel_error = 0.0;
  double max_tensor_rel_error = 0.0;
  std::string worst_tensor;
  std::size_t entries_checked = 0;
  std::string worst_parameter;
  std::size_t worst_index = 0;
};

using LossBuilder = std::function<Var(Graph&, const ParamMap&)>;

GradCheckResult grad_check(const ParamMap& params, const LossBuilder& build, double eps, bool training = false,
                           std::uint64_t seed = 0, std::size_t max_entries_per_tensor = 0);

}  // namespace plantcast::nn
