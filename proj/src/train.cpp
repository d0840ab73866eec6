#include "plantcast/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "plantcast/csv.hpp"
#include "plantcast/error.hpp"
#include "plantcast/rng.hpp"

namespace plantcast {

std::vector<Sequence> make_sequences(const SeriesData& data, const WindowSet& windows, const LagSet& lags) {
  if (windows.lag_margin < lags.max()) {
    throw Error(ErrorCode::UsageError, "window lag margin " + std::to_string(windows.lag_margin) +
                                           " is below the largest lag " + std::to_string(lags.max()));
  }
  std::vector<Sequence> out;
  out.reserve(windows.size());
  const std::size_t count = windows.context_len + windows.horizon;
  for (std::size_t start : windows.starts) {
    const std::size_t first = start + windows.lag_margin;
    Sequence s;
    s.tokens = build_tokens(data, lags, first, count);
    s.targets.assign(data.target.begin() + static_cast<std::ptrdiff_t>(first),
                     data.target.begin() + static_cast<std::ptrdiff_t>(first + count));
    out.push_back(std::move(s));
  }
  return out;
}

double dataset_loss(const ModelConfig& cfg, const Weights& w, const std::vector<Sequence>& data, LossMode mode) {
  if (data.empty()) return 0.0;
  double total = 0.0;
  for (const Sequence& s : data) {
    nn::Graph g(false);
    total += g.value(sequence_loss(g, cfg, w, s.tokens, s.targets, mode))[0];
  }
  return total / static_cast<double>(data.size());
}

FitResult fit(const TrainConfig& tc, const ModelConfig& mc, const Weights& init, const std::vector<Sequence>& train,
              const std::vector<Sequence>& val) {
  if (train.empty() || val.empty()) {
    throw Error(ErrorCode::EmptySplit, "training needs nonempty train and validation windows (got " +
                                           std::to_string(train.size()) + " / " + std::to_string(val.size()) + ")");
  }
  if (tc.batch_size == 0) throw Error(ErrorCode::UsageError, "batch_size must be >= 1");
  check_weights(mc, init);

  FitResult result;
  Weights w = init;
  AdamState state;
  EarlyStopping stopper(tc.patience);
  std::size_t adam_t = 0;

  {
    EpochRecord r{0, dataset_loss(mc, w, train, tc.loss_mode), dataset_loss(mc, w, val, tc.loss_mode), tc.lr0};
    stopper.observe(r.val_loss);
    result.history.push_back(r);
    result.best_weights = w;
    result.best_val_loss = r.val_loss;
  }

  std::vector<std::size_t> order(train.size());
  for (std::size_t epoch = 1; epoch <= tc.max_epochs; ++epoch) {
    const double lr = cosine_lr(epoch - 1, tc.max_epochs, tc.lr0);
    Rng rng = make_rng(tc.seed, epoch);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), rng);
    const std::size_t used = tc.max_sequences_per_epoch == 0 ? order.size()
                                                              : std::min(order.size(), tc.max_sequences_per_epoch);

    double loss_sum = 0.0;
    for (std::size_t b = 0; b < used; b += tc.batch_size) {
      const std::size_t end = std::min(used, b + tc.batch_size);
      nn::ParamMap grads;
      for (std::size_t i = b; i < end; ++i) {
        const Sequence& s = train[order[i]];
        nn::Graph g(true, derive_seed(tc.seed, (epoch << 32) ^ order[i]));
        const nn::Var loss = sequence_loss(g, mc, w, s.tokens, s.targets, tc.loss_mode);
        g.backward(loss);
        loss_sum += g.value(loss)[0];
        for (auto& [name, gt] : g.parameter_gradients()) {
          auto it = grads.find(name);
          if (it == grads.end()) {
            grads.emplace(name, std::move(gt));
          } else {
            auto dst = it->second.values();
            auto src = gt.values();
            for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += src[k];
          }
        }
      }
      const double inv = 1.0 / static_cast<double>(end - b);
      for (auto& [_, gt] : grads) {
        for (double& v : gt.values()) v *= inv;
      }
      adam_step(w, grads, state, ++adam_t, lr, tc.adam);
    }

    EpochRecord r{epoch, loss_sum / static_cast<double>(used), dataset_loss(mc, w, val, tc.loss_mode), lr};
    result.history.push_back(r);
    if (stopper.observe(r.val_loss)) {
      result.best_weights = w;
      result.best_val_loss = r.val_loss;
    }
    if (stopper.should_stop()) {
      result.stopped_early = true;
      break;
    }
  }
  result.best_epoch = stopper.best_epoch();
  return result;
}

std::string format_history_csv(const std::vector<EpochRecord>& history) {
  std::ostringstream out;
  out << "epoch,train_loss,val_loss,lr\n";
  for (const EpochRecord& r : history) {
    out << r.epoch << ',' << csv::format_exact(r.train_loss) << ',' << csv::format_exact(r.val_loss) << ','
        << csv::format_exact(r.lr) << '\n';
  }
  return out.str();
}

std::vector<WindowForecast> forecast_windows(const ModelConfig& cfg, const Weights& w, const SeriesData& data,
                                             const WindowSet& windows, std::size_t n_samples, std::uint64_t seed,
                                             const std::optional<NormStats>& target_norm) {
  std::vector<WindowForecast> out;
  out.reserve(windows.size());
  for (std::size_t wi = 0; wi < windows.size(); ++wi) {
    const std::size_t begin = windows.input_begin(wi);
    const std::size_t split = windows.target_begin(wi);
    SeriesData history;
    history.target.assign(data.target.begin() + static_cast<std::ptrdiff_t>(begin),
                          data.target.begin() + static_cast<std::ptrdiff_t>(split));
    for (const auto& c : data.covariates) {
      history.covariates.emplace_back(c.begin() + static_cast<std::ptrdiff_t>(begin),
                                      c.begin() + static_cast<std::ptrdiff_t>(split));
    }
    ForecastDistribution fd = forecast_autoregressive(cfg, w, history, windows.context_len, CovariatePolicy::HoldLast,
                                                      windows.horizon, n_samples, derive_seed(seed, wi));
    fd.target_norm = target_norm;
    WindowForecast f;
    f.window = wi;
    f.target_begin = split;
    f.paths = fd.denormalized_paths();
    for (std::size_t h = 0; h < windows.horizon; ++h) {
      const double z = data.target[split + h];
      f.actual.push_back(target_norm ? denormalize(z, *target_norm) : z);
    }
    out.push_back(std::move(f));
  }
  return out;
}

MetricReport score_forecasts(const std::vector<WindowForecast>& forecasts) {
  MetricAccumulator acc;
  std::vector<double> step_samples;
  for (const WindowForecast& f : forecasts) {
    for (std::size_t h = 0; h < f.actual.size(); ++h) {
      step_samples.clear();
      for (const auto& p : f.paths) step_samples.push_back(p[h]);
      acc.add(step_samples, f.actual[h]);
    }
  }
  return acc.report();
}

double sample_quantile(std::vector<double> samples, double q) {
  if (samples.empty()) throw Error(ErrorCode::TooFewSamples, "quantile of an empty sample");
  std::sort(samples.begin(), samples.end());
  const double pos = std::clamp(q, 0.0, 1.0) * static_cast<double>(samples.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, samples.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return samples[lo] + frac * (samples[hi] - samples[lo]);
}

double interval_coverage(const std::vector<WindowForecast>& forecasts, double level) {
  const double lo_q = 0.5 - level / 2.0, hi_q = 0.5 + level / 2.0;
  std::size_t inside = 0, total = 0;
  std::vector<double> step_samples;
  for (const WindowForecast& f : forecasts) {
    for (std::size_t h = 0; h < f.actual.size(); ++h) {
      step_samples.clear();
      for (const auto& p : f.paths) step_samples.push_back(p[h]);
      const double lo = sample_quantile(step_samples, lo_q);
      const double hi = sample_quantile(step_samples, hi_q);
      inside += (f.actual[h] >= lo && f.actual[h] <= hi) ? 1 : 0;
      ++total;
    }
  }
  return total == 0 ? 0.0 : static_cast<double>(inside) / static_cast<double>(total);
}

}  // namespace plantcast
