// plantcast: pipeline stages as subcommands.
//
// Exit status: 0 success, 1 usage error, 2 data error.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "plantcast/ablation.hpp"
#include "plantcast/config.hpp"
#include "plantcast/csv.hpp"
#include "plantcast/error.hpp"
#include "plantcast/pipeline.hpp"
#include "plantcast/synth.hpp"
#include "plantcast/weights_io.hpp"

namespace fs = std::filesystem;
using namespace plantcast;

namespace {

struct Globals {
  std::uint64_t seed = 0;
  std::string config;
};

RunConfig run_config(const Globals& g, const std::string& local) {
  const std::string& path = local.empty() ? g.config : local;
  return path.empty() ? RunConfig{} : load_config(path);
}

void replace_extension_json(const fs::path& out, const std::string& contents) {
  fs::path j = out;
  j.replace_extension(".json");
  csv::write_atomic(j, contents);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"plantcast: plant phenotype extraction, sensor fusion and probabilistic forecasting"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--seed", g.seed, "Seed for every random choice")->capture_default_str();
  app.add_option("--config", g.config, "JSON run configuration");

  // extract
  auto* extract = app.add_subcommand("extract", "Phenotype statistics from frames and masks");
  std::string ex_frames, ex_masks, ex_out, ex_heat, ex_gradient;
  double ex_alpha = 0.5;
  extract->add_option("--frames", ex_frames, "Directory of YYYYMMDDTHHMMSSZ.ppm frames")->required();
  extract->add_option("--masks", ex_masks, "Directory of STEM.pgm / STEM.<id>.pgm masks")->required();
  extract->add_option("--out", ex_out, "Phenotype CSV")->required();
  extract->add_option("--heatmap-dir", ex_heat, "Write G-channel heatmaps and colorbar.ppm here");
  extract->add_option("--alpha", ex_alpha, "Heatmap opacity")->check(CLI::Range(0.0, 1.0))->capture_default_str();
  extract->add_option("--gradient", ex_gradient, "256-line r,g,b colour table");

  // fuse
  auto* fuse = app.add_subcommand("fuse", "Align, impute and select features");
  std::string fu_env, fu_pheno, fu_combo, fu_out;
  std::int64_t fu_grid = 60;
  fuse->add_option("--env", fu_env, "Environment CSV")->required();
  fuse->add_option("--pheno", fu_pheno, "Phenotype CSV")->required();
  fuse->add_option("--combo", fu_combo, "RGB, RGB_RATIOS, RGB_ENV or RGB_RATIOS_ENV")->required();
  fuse->add_option("--out", fu_out, "Fused CSV")->required();
  fuse->add_option("--grid-seconds", fu_grid, "Grid step")->check(CLI::PositiveNumber)->capture_default_str();

  // synth
  auto* synth = app.add_subcommand("synth", "Simulate a grow tent");
  std::string sy_out;
  std::size_t sy_days = 30;
  synth->add_option("--out", sy_out, "Output directory (env.csv, pheno.csv, stress.csv)")->required();
  synth->add_option("--days", sy_days, "Simulated days")->check(CLI::PositiveNumber)->capture_default_str();

  // pretrain
  auto* pre = app.add_subcommand("pretrain", "Train on the synthetic corpus");
  std::uint64_t pr_corpus_seed = 0;
  std::string pr_out, pr_combo, pr_history, pr_config;
  pre->add_option("--corpus-seed", pr_corpus_seed, "Corpus seed")->capture_default_str();
  pre->add_option("--config", pr_config, "JSON run configuration");
  pre->add_option("--out", pr_out, "Weights file")->required();
  pre->add_option("--combo", pr_combo, "Size the covariates for this feature combination");
  pre->add_option("--history", pr_history, "Per-epoch loss CSV");

  // train
  auto* train = app.add_subcommand("train", "Fit on a fused series");
  std::string tr_data, tr_config, tr_init, tr_out, tr_history;
  train->add_option("--data", tr_data, "Fused CSV")->required();
  train->add_option("--config", tr_config, "JSON run configuration");
  train->add_option("--init", tr_init, "Starting weights (architecture taken from this file)");
  train->add_option("--out", tr_out, "Weights file")->required();
  train->add_option("--history", tr_history, "Per-epoch loss CSV");

  // forecast
  auto* fc = app.add_subcommand("forecast", "Sample forecasts over the test split");
  std::string fc_model, fc_data, fc_out, fc_config;
  std::optional<std::size_t> fc_horizon, fc_samples;
  fc->add_option("--model", fc_model, "Weights file")->required();
  fc->add_option("--data", fc_data, "Fused CSV")->required();
  fc->add_option("--config", fc_config, "JSON run configuration");
  fc->add_option("--horizon", fc_horizon, "Steps ahead (default from config)")->check(CLI::PositiveNumber);
  fc->add_option("--samples", fc_samples, "Sample paths (default from config)")->check(CLI::Range(2, 1000000));
  fc->add_option("--out", fc_out, "Forecast CSV")->required();

  // evaluate
  auto* ev = app.add_subcommand("evaluate", "Score a forecast against observations");
  std::string ev_forecast, ev_actual, ev_out;
  ev->add_option("--forecast", ev_forecast, "Forecast CSV")->required();
  ev->add_option("--actual", ev_actual, "Fused CSV with the observed target")->required();
  ev->add_option("--out", ev_out, "Metrics JSON")->required();

  // ablate
  auto* ab = app.add_subcommand("ablate", "Zero-shot vs fine-tuning over the four feature sets");
  std::string ab_env, ab_pheno, ab_config, ab_out;
  ab->add_option("--env", ab_env, "Environment CSV")->required();
  ab->add_option("--pheno", ab_pheno, "Phenotype CSV")->required();
  ab->add_option("--config", ab_config, "JSON run configuration");
  ab->add_option("--out", ab_out, "Report CSV (a .json twin is written beside it)")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  try {
    if (extract->parsed()) {
      ExtractOptions opt;
      opt.heatmap.alpha = ex_alpha;
      if (!ex_gradient.empty()) opt.heatmap.gradient = load_gradient(ex_gradient);
      if (!ex_heat.empty()) opt.heatmap_dir = ex_heat;
      write_pheno_csv(extract_frames(ex_frames, ex_masks, opt), ex_out);
    } else if (fuse->parsed()) {
      const FeatureCombo combo = parse_combo(fu_combo);
      write_fused_csv(fuse_streams(load_streams(fu_env, fu_pheno), combo, fu_grid), fu_out);
    } else if (synth->parsed()) {
      TentSimConfig sc;
      sc.seed = g.seed;
      sc.days = sy_days;
      write_tent(simulate_tent(sc), sy_out);
    } else if (pre->parsed()) {
      RunConfig cfg = run_config(g, pr_config);
      cfg.pretrain.corpus_seed = pr_corpus_seed;
      std::size_t n_cov = cfg.model.n_covariates;
      if (!pr_combo.empty()) n_cov = combo_channels(parse_combo(pr_combo)).size() - 1;
      const FitResult r = pretrain(cfg, n_cov, g.seed);
      save_model(model_for(cfg, n_cov), r.best_weights, pr_out);
      if (!pr_history.empty()) csv::write_atomic(pr_history, format_history_csv(r.history));
    } else if (train->parsed()) {
      RunConfig cfg = run_config(g, tr_config);
      const FusedSeries fused = read_fused_csv(tr_data);
      const PlantData data = split_engineered(fused);
      Weights init;
      if (!tr_init.empty()) {
        auto [icfg, w] = load_model(tr_init);
        if (icfg.n_covariates != data.n_covariates()) {
          throw Error(ErrorCode::ShapeMismatch, tr_init + ": model expects " + std::to_string(icfg.n_covariates) +
                                                    " covariates, " + tr_data + " has " +
                                                    std::to_string(data.n_covariates()));
        }
        const double dropout = cfg.model.dropout_p;
        cfg.model = icfg;
        cfg.model.dropout_p = dropout;
        init = std::move(w);
      } else {
        init = init_weights(model_for(cfg, data.n_covariates()), g.seed);
      }
      cfg.train.seed = g.seed;
      const FitResult r = fine_tune(cfg, init, data);
      save_bundle({model_for(cfg, data.n_covariates()), r.best_weights, data.channel_norm}, tr_out);
      if (!tr_history.empty()) csv::write_atomic(tr_history, format_history_csv(r.history));
    } else if (fc->parsed()) {
      RunConfig cfg = run_config(g, fc_config);
      const ModelBundle b = load_bundle(fc_model);
      if (b.norm.empty()) {
        throw Error(ErrorCode::FormatError, fc_model + ": no normalization statistics (pretrained weights cannot "
                                                       "forecast raw data; run train first)");
      }
      const FusedSeries fused = read_fused_csv(fc_data);
      const PlantData data = split_engineered(fused, b.norm);
      if (data.n_covariates() != b.config.n_covariates) {
        throw Error(ErrorCode::ShapeMismatch, fc_data + " does not have the model's channel count");
      }
      cfg.model = b.config;
      if (fc_horizon) cfg.data.horizon = *fc_horizon;
      if (fc_samples) cfg.forecast.n_samples = *fc_samples;
      const auto forecasts = forecast_test(cfg, b.weights, data, g.seed);
      const std::size_t offset = split_series(fused).train.length() + split_series(fused).val.length();
      csv::write_atomic(fc_out, format_forecast_csv(forecasts, fused, offset));
    } else if (ev->parsed()) {
      const MetricReport r = evaluate_forecast_csv(ev_forecast, read_fused_csv(ev_actual));
      csv::write_atomic(ev_out, format_metrics_json(r));
    } else if (ab->parsed()) {
      const RunConfig cfg = run_config(g, ab_config);
      const Streams s = load_streams(ab_env, ab_pheno);
      const FusedSeries imputed = impute_spline(align_streams(s.env, s.pheno, cfg.data.grid_seconds));
      const auto rows = run_ablation(imputed, cfg, g.seed);
      csv::write_atomic(ab_out, format_ablation_csv(rows));
      replace_extension_json(ab_out, format_ablation_json(rows));
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return e.code() == ErrorCode::UsageError ? 1 : 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
