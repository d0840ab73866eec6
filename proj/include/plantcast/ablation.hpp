#pragma once
// Zero-shot vs fine-tuning comparison across the four feature combinations.

#include <cstdint>
#include <string>
#include <vector>

#include "plantcast/config.hpp"
#include "plantcast/fusion.hpp"
#include "plantcast/train.hpp"

namespace plantcast {

// Normalized splits of one plant series restricted to a feature combination.
struct PlantData {
  FeatureCombo combo = FeatureCombo::Rgb;
  SeriesData train;
  SeriesData val;
  SeriesData test;
  NormStats target_norm;
  std::vector<NormStats> channel_norm;  // every channel, fused order
  std::size_t n_covariates() const noexcept { return train.covariates.size(); }
};

// engineer_features → 70/15/15 split → z-score with training statistics.
PlantData prepare_plant(const FusedSeries& imputed, FeatureCombo combo);
// Split and normalization of an already engineered series; `stats` (one per
// channel) replaces the training-split statistics when given.
PlantData split_engineered(const FusedSeries& engineered, const std::vector<NormStats>& stats = {});

ModelConfig model_for(const RunConfig& cfg, std::size_t n_covariates);

// Trains a fresh model on the synthetic corpus (10% of its series held out
// for validation). Initial weights are seeded with `seed`.
FitResult pretrain(const RunConfig& cfg, std::size_t n_covariates, std::uint64_t seed);

FitResult fine_tune(const RunConfig& cfg, const Weights& init, const PlantData& data);

// Forecasts the test split windows (eval_stride apart) in raw units.
std::vector<WindowForecast> forecast_test(const RunConfig& cfg, const Weights& w, const PlantData& data,
                                          std::uint64_t seed);

enum class Scenario { ZeroShot, FineTune };

struct AblationRow {
  Scenario scenario = Scenario::ZeroShot;
  FeatureCombo combo = FeatureCombo::Rgb;
  MetricReport report;
};

std::string_view scenario_name(Scenario s) noexcept;  // "Zero-shot" / "Fine-tuning"
std::string_view scenario_key(Scenario s) noexcept;   // "zero_shot" / "fine_tune"
std::string row_label(const AblationRow& row);        // e.g. "Zero-shot-RGB with ratios"

// Eight rows: zero-shot for every combo, then fine-tuning for every combo.
std::vector<AblationRow> run_ablation(const FusedSeries& imputed, const RunConfig& cfg, std::uint64_t seed);

std::string format_ablation_csv(const std::vector<AblationRow>& rows);
std::string format_ablation_json(const std::vector<AblationRow>& rows);

}  // namespace plantcast
