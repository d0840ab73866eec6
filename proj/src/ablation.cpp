#include "plantcast/ablation.hpp"

#include <sstream>

#include <json.hpp>

#include "plantcast/csv.hpp"
#include "plantcast/error.hpp"
#include "plantcast/rng.hpp"
#include "plantcast/synth.hpp"

namespace plantcast {

PlantData prepare_plant(const FusedSeries& imputed, FeatureCombo combo) {
  PlantData d = split_engineered(engineer_features(imputed, combo));
  d.combo = combo;
  return d;
}

PlantData split_engineered(const FusedSeries& engineered, const std::vector<NormStats>& stats) {
  const SeriesSplit split = split_series(engineered);
  const std::vector<NormStats> use = stats.empty() ? compute_norm_stats(split.train) : stats;
  if (use.size() != engineered.channels.size()) {
    throw Error(ErrorCode::ShapeMismatch, "normalization has " + std::to_string(use.size()) +
                                              " channels, data has " + std::to_string(engineered.channels.size()));
  }
  PlantData d;
  d.train = series_data_from(normalize(split.train, use));
  d.val = series_data_from(normalize(split.val, use));
  d.test = series_data_from(normalize(split.test, use));
  d.target_norm = use.at(static_cast<std::size_t>(engineered.index_of(kTargetChannel)));
  d.channel_norm = use;
  return d;
}

ModelConfig model_for(const RunConfig& cfg, std::size_t n_covariates) {
  ModelConfig m = cfg.model;
  m.n_covariates = n_covariates;
  m.validate();
  return m;
}

namespace {

std::vector<Sequence> sequences_of(const SeriesData& data, const RunConfig& cfg, std::size_t stride) {
  const ModelConfig& m = cfg.model;
  const WindowSet ws = make_windows(data.length(), cfg.data.context_len, cfg.data.horizon, stride, m.lag_set.max());
  return make_sequences(data, ws, m.lag_set);
}

}  // namespace

FitResult pretrain(const RunConfig& cfg, std::size_t n_covariates, std::uint64_t seed) {
  const ModelConfig m = model_for(cfg, n_covariates);
  CorpusConfig cc = cfg.pretrain.corpus;
  cc.n_covariates = n_covariates;
  const std::vector<CorpusSeries> corpus = pretrain_corpus(cfg.pretrain.corpus_seed, cc);
  const std::size_t n_val = std::max<std::size_t>(1, corpus.size() / 10);
  if (corpus.size() < 2) throw Error(ErrorCode::EmptySplit, "pretraining corpus needs at least 2 series");
  std::vector<Sequence> train, val;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    auto seqs = sequences_of(corpus[i].data, cfg, cfg.pretrain.stride);
    auto& dst = i + n_val >= corpus.size() ? val : train;
    for (auto& s : seqs) dst.push_back(std::move(s));
  }
  TrainConfig tc = cfg.train;
  tc.loss_mode = m.loss_mode;
  tc.seed = derive_seed(seed, 0x9e7);
  return fit(tc, m, init_weights(m, seed), train, val);
}

FitResult fine_tune(const RunConfig& cfg, const Weights& init, const PlantData& data) {
  const ModelConfig m = model_for(cfg, data.n_covariates());
  TrainConfig tc = cfg.train;
  tc.loss_mode = m.loss_mode;
  return fit(tc, m, init, sequences_of(data.train, cfg, cfg.data.train_stride),
             sequences_of(data.val, cfg, cfg.data.train_stride));
}

std::vector<WindowForecast> forecast_test(const RunConfig& cfg, const Weights& w, const PlantData& data,
                                          std::uint64_t seed) {
  const ModelConfig m = model_for(cfg, data.n_covariates());
  const WindowSet ws = make_windows(data.test.length(), cfg.data.context_len, cfg.data.horizon, cfg.data.eval_stride,
                                    m.lag_set.max());
  if (ws.empty()) throw Error(ErrorCode::EmptySplit, "test split is shorter than one forecast window");
  return forecast_windows(m, w, data.test, ws, cfg.forecast.n_samples, seed, data.target_norm);
}

std::string_view scenario_name(Scenario s) noexcept { return s == Scenario::ZeroShot ? "Zero-shot" : "Fine-tuning"; }
std::string_view scenario_key(Scenario s) noexcept { return s == Scenario::ZeroShot ? "zero_shot" : "fine_tune"; }

std::string row_label(const AblationRow& row) {
  return std::string(scenario_name(row.scenario)) + "-" + std::string(combo_label(row.combo));
}

std::vector<AblationRow> run_ablation(const FusedSeries& imputed, const RunConfig& cfg, std::uint64_t seed) {
  std::vector<AblationRow> zero, tuned;
  for (FeatureCombo combo : kAllCombos) {
    const PlantData data = prepare_plant(imputed, combo);
    const std::uint64_t combo_seed = derive_seed(seed, static_cast<std::uint64_t>(combo));
    const FitResult base = pretrain(cfg, data.n_covariates(), combo_seed);
    zero.push_back({Scenario::ZeroShot, combo, score_forecasts(forecast_test(cfg, base.best_weights, data, combo_seed))});
    const FitResult ft = fine_tune(cfg, base.best_weights, data);
    tuned.push_back({Scenario::FineTune, combo, score_forecasts(forecast_test(cfg, ft.best_weights, data, combo_seed))});
  }
  zero.insert(zero.end(), tuned.begin(), tuned.end());
  return zero;
}

std::string format_ablation_csv(const std::vector<AblationRow>& rows) {
  std::ostringstream out;
  out << "scenario,combo,crps,crps_normalized,mse,mae,rmse,pearson_r\n";
  for (const AblationRow& r : rows) {
    const MetricReport& m = r.report;
    out << scenario_name(r.scenario) << ',' << combo_label(r.combo) << ',' << csv::format_exact(m.crps_mean) << ','
        << csv::format_exact(m.crps_normalized) << ',' << csv::format_exact(m.mse) << ',' << csv::format_exact(m.mae)
        << ',' << csv::format_exact(m.rmse) << ',' << csv::format_exact(m.pearson_r) << '\n';
  }
  return out.str();
}

std::string format_ablation_json(const std::vector<AblationRow>& rows) {
  nlohmann::ordered_json arr = nlohmann::ordered_json::array();
  for (const AblationRow& r : rows) {
    const MetricReport& m = r.report;
    arr.push_back({{"label", row_label(r)},
                   {"scenario", std::string(scenario_key(r.scenario))},
                   {"combo", std::string(combo_tag(r.combo))},
                   {"crps", m.crps_mean},
                   {"crps_normalized", m.crps_normalized},
                   {"mse", m.mse},
                   {"mae", m.mae},
                   {"rmse", m.rmse},
                   {"pearson_r", m.pearson_r},
                   {"pearson_defined", m.pearson_defined},
                   {"n_points", m.n_points}});
  }
  return nlohmann::ordered_json{{"rows", arr}}.dump(2) + "\n";
}

}  // namespace plantcast
