#pragma once
// Lag-feature decoder-only forecaster with a Student-t output head.
//
// Token at series index i: (x[i-l1], ..., x[i-lC], c[i]) where x is the
// (normalized) target and c the covariate vector. The output at that position
// parameterizes the distribution of x[i]. Layers are pre-norm blocks of causal
// multi-head self-attention (rotary positions) and a GELU feed-forward of
// width 4·d_model, each wrapped in a residual connection.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "plantcast/fusion.hpp"
#include "plantcast/graph.hpp"
#include "plantcast/student_t.hpp"

namespace plantcast {

struct LagSet {
  std::vector<std::size_t> lags;

  static LagSet defaults() { return LagSet{{1, 2, 3, 4, 5, 6, 7, 8, 12, 24, 48}}; }
  std::size_t size() const noexcept { return lags.size(); }
  std::size_t max() const noexcept { return lags.empty() ? 0 : lags.back(); }
  // Throws UsageError unless strictly increasing and all >= 1.
  void validate() const;
};

enum class LossMode { StudentTNll, MseOnMean };
enum class PositionalEncoding { Rotary, Sinusoidal };

struct ModelConfig {
  LagSet lag_set = LagSet::defaults();
  std::size_t d_model = 64;
  std::size_t n_heads = 4;
  std::size_t M = 2;  // decoder layers
  double dropout_p = 0.1;
  std::size_t n_covariates = 0;
  LossMode loss_mode = LossMode::StudentTNll;
  double rope_base = 10000.0;
  PositionalEncoding positional_encoding = PositionalEncoding::Rotary;

  std::size_t d_head() const noexcept { return d_model / n_heads; }
  std::size_t token_width() const noexcept { return lag_set.size() + n_covariates; }
  void validate() const;
};

using Weights = nn::ParamMap;

Weights init_weights(const ModelConfig& cfg, std::uint64_t seed);
// Throws ShapeMismatch naming the first missing or mis-shaped tensor.
void check_weights(const ModelConfig& cfg, const Weights& w);

// Normalized target plus covariate channels on one time grid.
struct SeriesData {
  std::vector<double> target;
  std::vector<std::vector<double>> covariates;  // [channel][time]

  std::size_t length() const noexcept { return target.size(); }
};

// Builds model inputs from a (normalized) fused series: target = mean_g,
// covariates = every other channel in order.
SeriesData series_data_from(const FusedSeries& series);

// (x[t-l1], ..., x[t-lC]) for 1-based position t. Throws InsufficientHistory
// unless t > max lag and t <= series length + 1.
std::vector<double> build_lag_features(std::span<const double> series, const LagSet& lags, std::size_t t);

// Token rows for 0-based series indices [first, first + count).
nn::Tensor build_tokens(const SeriesData& data, const LagSet& lags, std::size_t first, std::size_t count);

// Rotates (2i, 2i+1) pairs of every row of q and k by pos·base^(-2i/d_head).
std::pair<nn::Tensor, nn::Tensor> apply_rope(const nn::Tensor& q, const nn::Tensor& k,
                                             std::span<const double> positions, double base = 10000.0);

// Builds the forward pass into `g`; returns the raw head output [T×3].
nn::Var forward_graph(nn::Graph& g, const ModelConfig& cfg, const Weights& w, const nn::Tensor& tokens);

std::vector<StudentTParams> head_params(const nn::Tensor& raw);

// Evaluation-mode forward (dropout off).
std::vector<StudentTParams> forward_step(const ModelConfig& cfg, const Weights& w, const nn::Tensor& tokens);

// Scalar training loss for one token sequence and its targets.
nn::Var sequence_loss(nn::Graph& g, const ModelConfig& cfg, const Weights& w, const nn::Tensor& tokens,
                      std::span<const double> targets, LossMode mode);

enum class CovariatePolicy { HoldLast };

struct ForecastDistribution {
  std::size_t horizon = 0;
  std::vector<StudentTParams> params_per_step;     // from the first sample path
  std::vector<std::vector<double>> sample_paths;   // [n_samples][horizon], normalized units
  std::optional<NormStats> target_norm;

  std::vector<double> mean_path() const;
  // Sample paths mapped back to raw target units (identity without norm stats).
  std::vector<std::vector<double>> denormalized_paths() const;
};

// Autoregressive sampling: each path repeatedly runs the model on the last
// `context_len` positions, draws the next value from the final position's
// Student-t, appends it and advances. Path p uses the generator seeded with
// derive_seed(seed, p). Throws InsufficientHistory.
ForecastDistribution forecast_autoregressive(const ModelConfig& cfg, const Weights& w, const SeriesData& history,
                                             std::size_t context_len, CovariatePolicy policy, std::size_t horizon,
                                             std::size_t n_samples, std::uint64_t seed);

}  // namespace plantcast
