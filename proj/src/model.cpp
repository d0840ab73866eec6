#include "plantcast/model.hpp"

#include <cmath>
#include <random>

#include "plantcast/error.hpp"
#include "plantcast/rng.hpp"

namespace plantcast {

using nn::Graph;
using nn::Tensor;
using nn::Var;

void LagSet::validate() const {
  if (lags.empty()) throw Error(ErrorCode::UsageError, "lag set must not be empty");
  for (std::size_t i = 0; i < lags.size(); ++i) {
    if (lags[i] < 1 || (i > 0 && lags[i] <= lags[i - 1])) {
      throw Error(ErrorCode::UsageError, "lag set must be strictly increasing positive integers");
    }
  }
}

void ModelConfig::validate() const {
  lag_set.validate();
  if (d_model == 0 || n_heads == 0 || d_model % n_heads != 0) {
    throw Error(ErrorCode::UsageError, "d_model must be a positive multiple of n_heads");
  }
  if (M < 1) throw Error(ErrorCode::UsageError, "model needs at least one decoder layer");
  if (dropout_p < 0.0 || dropout_p >= 1.0) throw Error(ErrorCode::UsageError, "dropout_p must lie in [0,1)");
  if (positional_encoding == PositionalEncoding::Rotary && d_head() % 2 != 0) {
    throw Error(ErrorCode::OddHeadDim, "rotary encoding needs an even head dimension");
  }
}

namespace {

std::string layer_key(std::size_t l, const char* suffix) { return "layers." + std::to_string(l) + "." + suffix; }

struct Shape {
  std::string name;
  std::vector<std::size_t> dims;
};

std::vector<Shape> expected_shapes(const ModelConfig& cfg) {
  const std::size_t d = cfg.d_model, f = cfg.token_width();
  std::vector<Shape> s{{"proj.weight", {f, d}}, {"proj.bias", {d}}, {"head.weight", {d, 3}}, {"head.bias", {3}}};
  for (std::size_t l = 0; l < cfg.M; ++l) {
    s.push_back({layer_key(l, "ln1.gamma"), {d}});
    s.push_back({layer_key(l, "ln1.beta"), {d}});
    s.push_back({layer_key(l, "attn.wq"), {d, d}});
    s.push_back({layer_key(l, "attn.wk"), {d, d}});
    s.push_back({layer_key(l, "attn.wv"), {d, d}});
    s.push_back({layer_key(l, "attn.wo"), {d, d}});
    s.push_back({layer_key(l, "ln2.gamma"), {d}});
    s.push_back({layer_key(l, "ln2.beta"), {d}});
    s.push_back({layer_key(l, "ffn.w1"), {d, 4 * d}});
    s.push_back({layer_key(l, "ffn.b1"), {4 * d}});
    s.push_back({layer_key(l, "ffn.w2"), {4 * d, d}});
    s.push_back({layer_key(l, "ffn.b2"), {d}});
  }
  return s;
}

Tensor gaussian(std::vector<std::size_t> dims, double stddev, Rng& rng) {
  Tensor t(std::move(dims), 0.0);
  std::normal_distribution<double> n(0.0, stddev);
  for (double& v : t.values()) v = n(rng);
  return t;
}

}  // namespace

Weights init_weights(const ModelConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  Rng rng = make_rng(seed, 0x1417);
  const std::size_t d = cfg.d_model, f = cfg.token_width();
  const double resid_scale = 1.0 / std::sqrt(2.0 * static_cast<double>(cfg.M));
  Weights w;
  w["proj.weight"] = gaussian({f, d}, 1.0 / std::sqrt(static_cast<double>(f)), rng);
  w["proj.bias"] = Tensor({d}, 0.0);
  for (std::size_t l = 0; l < cfg.M; ++l) {
    w[layer_key(l, "ln1.gamma")] = Tensor({d}, 1.0);
    w[layer_key(l, "ln1.beta")] = Tensor({d}, 0.0);
    const double s = 1.0 / std::sqrt(static_cast<double>(d));
    w[layer_key(l, "attn.wq")] = gaussian({d, d}, s, rng);
    w[layer_key(l, "attn.wk")] = gaussian({d, d}, s, rng);
    w[layer_key(l, "attn.wv")] = gaussian({d, d}, s, rng);
    w[layer_key(l, "attn.wo")] = gaussian({d, d}, s * resid_scale, rng);
    w[layer_key(l, "ln2.gamma")] = Tensor({d}, 1.0);
    w[layer_key(l, "ln2.beta")] = Tensor({d}, 0.0);
    w[layer_key(l, "ffn.w1")] = gaussian({d, 4 * d}, s, rng);
    w[layer_key(l, "ffn.b1")] = Tensor({4 * d}, 0.0);
    w[layer_key(l, "ffn.w2")] = gaussian({4 * d, d}, resid_scale / std::sqrt(4.0 * static_cast<double>(d)), rng);
    w[layer_key(l, "ffn.b2")] = Tensor({d}, 0.0);
  }
  w["head.weight"] = gaussian({d, 3}, 0.02, rng);
  w["head.bias"] = Tensor({3}, 0.0);
  return w;
}

void check_weights(const ModelConfig& cfg, const Weights& w) {
  for (const Shape& s : expected_shapes(cfg)) {
    const auto it = w.find(s.name);
    if (it == w.end()) throw Error(ErrorCode::ShapeMismatch, "weights lack tensor '" + s.name + "'");
    if (it->second.shape() != s.dims) {
      throw Error(ErrorCode::ShapeMismatch, "tensor '" + s.name + "' has shape " + nn::shape_string(it->second.shape()) +
                                                ", expected " + nn::shape_string(s.dims));
    }
  }
}

SeriesData series_data_from(const FusedSeries& series) {
  SeriesData d;
  d.target = series.channel(kTargetChannel).values;
  for (const Channel& ch : series.channels) {
    if (ch.name != kTargetChannel) d.covariates.push_back(ch.values);
  }
  return d;
}

std::vector<double> build_lag_features(std::span<const double> series, const LagSet& lags, std::size_t t) {
  if (t <= lags.max() || t > series.size() + 1) {
    throw Error(ErrorCode::InsufficientHistory, "position " + std::to_string(t) + " needs more than " +
                                                    std::to_string(lags.max()) + " steps of history");
  }
  std::vector<double> out;
  out.reserve(lags.size());
  for (std::size_t l : lags.lags) out.push_back(series[t - l - 1]);
  return out;
}

Tensor build_tokens(const SeriesData& data, const LagSet& lags, std::size_t first, std::size_t count) {
  const std::size_t width = lags.size() + data.covariates.size();
  if (first < lags.max() || first + count > data.length()) {
    throw Error(ErrorCode::InsufficientHistory, "token range [" + std::to_string(first) + "," +
                                                    std::to_string(first + count) + ") lacks lag history");
  }
  Tensor tok = Tensor::matrix(count, width);
  for (std::size_t p = 0; p < count; ++p) {
    const std::size_t i = first + p;
    auto row = tok.row(p);
    for (std::size_t j = 0; j < lags.size(); ++j) row[j] = data.target[i - lags.lags[j]];
    for (std::size_t c = 0; c < data.covariates.size(); ++c) row[lags.size() + c] = data.covariates[c][i];
  }
  return tok;
}

std::pair<Tensor, Tensor> apply_rope(const Tensor& q, const Tensor& k, std::span<const double> positions, double base) {
  Graph g;
  const Var vq = g.rope(g.constant(q), positions, base);
  const Var vk = g.rope(g.constant(k), positions, base);
  return {g.value(vq), g.value(vk)};
}

namespace {

Tensor sinusoidal_table(std::size_t rows, std::size_t d) {
  Tensor pe = Tensor::matrix(rows, d);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t i = 0; i < d; ++i) {
      const double freq = std::pow(10000.0, -static_cast<double>(2 * (i / 2)) / static_cast<double>(d));
      pe.at(r, i) = (i % 2 == 0) ? std::sin(static_cast<double>(r) * freq) : std::cos(static_cast<double>(r) * freq);
    }
  }
  return pe;
}

}  // namespace

Var forward_graph(Graph& g, const ModelConfig& cfg, const Weights& w, const Tensor& tokens) {
  if (tokens.rank() != 2 || tokens.cols() != cfg.token_width() || tokens.rows() == 0) {
    throw Error(ErrorCode::ShapeMismatch, "tokens " + nn::shape_string(tokens.shape()) + " do not match token width " +
                                              std::to_string(cfg.token_width()));
  }
  auto P = [&](const std::string& name) {
    const auto it = w.find(name);
    if (it == w.end()) throw Error(ErrorCode::ShapeMismatch, "weights lack tensor '" + name + "'");
    return g.parameter(name, it->second);
  };
  const std::size_t T = tokens.rows();
  const std::size_t dh = cfg.d_head();
  std::vector<double> positions(T);
  for (std::size_t t = 0; t < T; ++t) positions[t] = static_cast<double>(t);

  Var h = g.add_row(g.matmul(g.constant(tokens), P("proj.weight")), P("proj.bias"));
  if (cfg.positional_encoding == PositionalEncoding::Sinusoidal) {
    h = g.add(h, g.constant(sinusoidal_table(T, cfg.d_model)));
  }
  const double score_scale = 1.0 / std::sqrt(static_cast<double>(dh));

  for (std::size_t l = 0; l < cfg.M; ++l) {
    const Var a = g.add_row(g.mul_row(g.layer_norm(h), P(layer_key(l, "ln1.gamma"))), P(layer_key(l, "ln1.beta")));
    const Var q = g.matmul(a, P(layer_key(l, "attn.wq")));
    const Var k = g.matmul(a, P(layer_key(l, "attn.wk")));
    const Var v = g.matmul(a, P(layer_key(l, "attn.wv")));
    std::vector<Var> heads;
    heads.reserve(cfg.n_heads);
    for (std::size_t hd = 0; hd < cfg.n_heads; ++hd) {
      Var qh = g.slice_cols(q, hd * dh, dh);
      Var kh = g.slice_cols(k, hd * dh, dh);
      if (cfg.positional_encoding == PositionalEncoding::Rotary) {
        qh = g.rope(qh, positions, cfg.rope_base);
        kh = g.rope(kh, positions, cfg.rope_base);
      }
      const Var probs = g.causal_softmax(g.scale(g.matmul_nt(qh, kh), score_scale));
      heads.push_back(g.matmul(probs, g.slice_cols(v, hd * dh, dh)));
    }
    const Var attn = g.matmul(g.concat_cols(heads), P(layer_key(l, "attn.wo")));
    h = g.add(h, g.dropout(attn, cfg.dropout_p));

    const Var b = g.add_row(g.mul_row(g.layer_norm(h), P(layer_key(l, "ln2.gamma"))), P(layer_key(l, "ln2.beta")));
    const Var hidden = g.gelu(g.add_row(g.matmul(b, P(layer_key(l, "ffn.w1"))), P(layer_key(l, "ffn.b1"))));
    const Var ffn = g.add_row(g.matmul(hidden, P(layer_key(l, "ffn.w2"))), P(layer_key(l, "ffn.b2")));
    h = g.add(h, g.dropout(ffn, cfg.dropout_p));
  }
  return g.add_row(g.matmul(h, P("head.weight")), P("head.bias"));
}

std::vector<StudentTParams> head_params(const Tensor& raw) {
  std::vector<StudentTParams> out(raw.rows());
  for (std::size_t r = 0; r < raw.rows(); ++r) out[r] = params_from_raw(raw.at(r, 0), raw.at(r, 1), raw.at(r, 2));
  return out;
}

std::vector<StudentTParams> forward_step(const ModelConfig& cfg, const Weights& w, const Tensor& tokens) {
  Graph g(false);
  return head_params(g.value(forward_graph(g, cfg, w, tokens)));
}

Var sequence_loss(Graph& g, const ModelConfig& cfg, const Weights& w, const Tensor& tokens,
                  std::span<const double> targets, LossMode mode) {
  const Var raw = forward_graph(g, cfg, w, tokens);
  return mode == LossMode::StudentTNll ? g.student_t_nll(raw, targets) : g.mse_on_mean(raw, targets);
}

std::vector<double> ForecastDistribution::mean_path() const {
  std::vector<double> m(horizon, 0.0);
  if (sample_paths.empty()) return m;
  for (const auto& p : sample_paths) {
    for (std::size_t h = 0; h < horizon; ++h) m[h] += p[h];
  }
  for (double& v : m) v /= static_cast<double>(sample_paths.size());
  return m;
}

std::vector<std::vector<double>> ForecastDistribution::denormalized_paths() const {
  std::vector<std::vector<double>> out = sample_paths;
  if (!target_norm) return out;
  for (auto& p : out) {
    for (double& v : p) v = denormalize(v, *target_norm);
  }
  return out;
}

ForecastDistribution forecast_autoregressive(const ModelConfig& cfg, const Weights& w, const SeriesData& history,
                                             std::size_t context_len, CovariatePolicy policy, std::size_t horizon,
                                             std::size_t n_samples, std::uint64_t seed) {
  (void)policy;  // HoldLast is the only policy
  const std::size_t n = history.length();
  const std::size_t max_lag = cfg.lag_set.max();
  if (n < max_lag + 1) {
    throw Error(ErrorCode::InsufficientHistory, "forecast needs at least " + std::to_string(max_lag + 1) +
                                                    " history steps, got " + std::to_string(n));
  }
  if (horizon < 1 || n_samples < 1 || context_len < 1) {
    throw Error(ErrorCode::UsageError, "horizon, sample count and context length must be >= 1");
  }
  if (history.covariates.size() != cfg.n_covariates) {
    throw Error(ErrorCode::ShapeMismatch, "history has " + std::to_string(history.covariates.size()) +
                                              " covariates, model expects " + std::to_string(cfg.n_covariates));
  }

  // Working copy extended by the horizon; covariates hold their last observed value.
  SeriesData work;
  work.target.assign(history.target.begin(), history.target.end());
  work.target.resize(n + horizon, 0.0);
  for (const auto& c : history.covariates) {
    std::vector<double> ext(c.begin(), c.end());
    ext.resize(n + horizon, c.back());
    work.covariates.push_back(std::move(ext));
  }

  ForecastDistribution out;
  out.horizon = horizon;
  out.sample_paths.assign(n_samples, std::vector<double>(horizon, 0.0));
  for (std::size_t path = 0; path < n_samples; ++path) {
    Rng rng = make_rng(seed, path);
    for (std::size_t step = 0; step < horizon; ++step) {
      const std::size_t idx = n + step;  // index being predicted
      const std::size_t first = std::max(max_lag, idx + 1 >= context_len ? idx + 1 - context_len : std::size_t{0});
      const Tensor tokens = build_tokens(work, cfg.lag_set, first, idx + 1 - first);
      const std::vector<StudentTParams> params = forward_step(cfg, w, tokens);
      const StudentTParams& p = params.back();
      if (path == 0) out.params_per_step.push_back(p);
      const double value = p.mu + p.sigma * draw_standard_t(p.nu, rng);
      work.target[idx] = value;
      out.sample_paths[path][step] = value;
    }
  }
  return out;
}

}  // namespace plantcast
