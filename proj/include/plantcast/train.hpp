#pragma once
// Teacher-forced training on windowed sequences, early stopping on
// validation loss, and sampling-based evaluation of forecast windows.

#include <cstdint>
#include <optional>
#include <vector>

#include "plantcast/fusion.hpp"
#include "plantcast/metrics.hpp"
#include "plantcast/model.hpp"
#include "plantcast/optim.hpp"

namespace plantcast {

struct TrainConfig {
  double lr0 = 0.001;
  AdamConfig adam;
  std::size_t max_epochs = 50;
  std::size_t patience = 20;
  std::size_t batch_size = 16;
  std::uint64_t seed = 0;
  LossMode loss_mode = LossMode::StudentTNll;
  // 0 = every training sequence each epoch; otherwise a seeded subset.
  std::size_t max_sequences_per_epoch = 0;
};

// One teacher-forced training example: token rows and the target at each row.
struct Sequence {
  nn::Tensor tokens;
  std::vector<double> targets;
};

// Each window contributes the tokens of [start + lag_margin, start + footprint).
std::vector<Sequence> make_sequences(const SeriesData& data, const WindowSet& windows, const LagSet& lags);

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double lr = 0.0;
};

struct FitResult {
  Weights best_weights;
  std::vector<EpochRecord> history;
  std::size_t best_epoch = 0;
  double best_val_loss = 0.0;
  bool stopped_early = false;
};

// Mean loss over sequences with dropout off.
double dataset_loss(const ModelConfig& cfg, const Weights& w, const std::vector<Sequence>& data, LossMode mode);

// Epoch 0 evaluates the initial weights; epochs 1..max_epochs train with
// lr = cosine_lr(epoch - 1, max_epochs, lr0). Throws EmptySplit.
FitResult fit(const TrainConfig& tc, const ModelConfig& mc, const Weights& init, const std::vector<Sequence>& train,
              const std::vector<Sequence>& val);

std::string format_history_csv(const std::vector<EpochRecord>& history);

struct WindowForecast {
  std::size_t window = 0;
  std::size_t target_begin = 0;             // series index of the first forecast step
  std::vector<std::vector<double>> paths;   // [sample][step], raw units
  std::vector<double> actual;               // raw units
};

// Forecasts every window from its own input slab. Window w samples with seed
// derive_seed(seed, w).
std::vector<WindowForecast> forecast_windows(const ModelConfig& cfg, const Weights& w, const SeriesData& data,
                                             const WindowSet& windows, std::size_t n_samples, std::uint64_t seed,
                                             const std::optional<NormStats>& target_norm);

MetricReport score_forecasts(const std::vector<WindowForecast>& forecasts);

// Linear-interpolated empirical quantile, q in [0,1].
double sample_quantile(std::vector<double> samples, double q);

// Fraction of (window, step) actuals inside the central `level` interval.
double interval_coverage(const std::vector<WindowForecast>& forecasts, double level = 0.8);

}  // namespace plantcast
