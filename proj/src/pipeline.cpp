#include "plantcast/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>

#include <json.hpp>

#include "plantcast/csv.hpp"
#include "plantcast/error.hpp"
#include "plantcast/weights_io.hpp"

namespace plantcast {

namespace fs = std::filesystem;

namespace {

constexpr const char* kMetaNorm = "meta.norm";

bool all_digits(std::string_view s) {
  return !s.empty() && std::all_of(s.begin(), s.end(), [](char c) { return c >= '0' && c <= '9'; });
}

}  // namespace

Timestamp parse_frame_stem(std::string_view stem) {
  if (stem.size() != 16 || stem[8] != 'T' || stem[15] != 'Z' || !all_digits(stem.substr(0, 8)) ||
      !all_digits(stem.substr(9, 6))) {
    throw Error(ErrorCode::ParseError, "frame name '" + std::string(stem) + "' is not YYYYMMDDTHHMMSSZ");
  }
  const std::string iso = std::string(stem.substr(0, 4)) + "-" + std::string(stem.substr(4, 2)) + "-" +
                          std::string(stem.substr(6, 2)) + "T" + std::string(stem.substr(9, 2)) + ":" +
                          std::string(stem.substr(11, 2)) + ":" + std::string(stem.substr(13, 2)) + "Z";
  return parse_iso8601(iso);
}

std::string frame_stem(Timestamp t) {
  std::string iso = format_iso8601(t);  // YYYY-MM-DDTHH:MM:SSZ
  std::string out;
  for (char c : iso)
    if (c != '-' && c != ':') out.push_back(c);
  return out;
}

std::vector<PhenotypeRecord> extract_frames(const fs::path& frames_dir, const fs::path& masks_dir,
                                            const ExtractOptions& opt) {
  if (!fs::is_directory(frames_dir)) throw Error(ErrorCode::IoFailure, frames_dir.string() + ": not a directory");
  if (!fs::is_directory(masks_dir)) throw Error(ErrorCode::IoFailure, masks_dir.string() + ": not a directory");

  std::vector<fs::path> frames;
  for (const auto& e : fs::directory_iterator(frames_dir)) {
    if (e.is_regular_file() && e.path().extension() == ".ppm") frames.push_back(e.path());
  }
  std::sort(frames.begin(), frames.end());

  // mask stem -> (object id -> path)
  std::map<std::string, std::map<std::int64_t, fs::path>> masks;
  for (const auto& e : fs::directory_iterator(masks_dir)) {
    if (!e.is_regular_file() || e.path().extension() != ".pgm") continue;
    const std::string stem = e.path().stem().string();
    const auto dot = stem.find('.');
    if (dot == std::string::npos) {
      masks[stem][0] = e.path();
    } else {
      const std::string id = stem.substr(dot + 1);
      if (!all_digits(id)) throw Error(ErrorCode::ParseError, e.path().string() + ": object id is not an integer");
      masks[stem.substr(0, dot)][std::stoll(id)] = e.path();
    }
  }

  if (opt.heatmap_dir) {
    fs::create_directories(*opt.heatmap_dir);
    write_ppm(*opt.heatmap_dir / "colorbar.ppm", render_colorbar(opt.heatmap.gradient));
  }

  std::vector<PhenotypeRecord> out;
  for (const fs::path& fp : frames) {
    const std::string stem = fp.stem().string();
    const auto it = masks.find(stem);
    if (it == masks.end()) continue;
    Timestamp ts;
    try {
      ts = parse_frame_stem(stem);
    } catch (const Error& e) {
      throw Error(e.code(), fp.string() + ": " + e.what());
    }
    Frame frame = read_ppm(fp);
    frame.timestamp = ts;
    Frame heat = frame;
    for (const auto& [id, mp] : it->second) {
      const Mask mask = read_pgm_mask(mp);
      PhenotypeRecord r;
      try {
        r = mask_stats(frame, mask, id);
      } catch (const Error& e) {
        throw Error(e.code(), mp.string() + ": " + e.what());
      }
      r.timestamp = ts;
      out.push_back(r);
      if (opt.heatmap_dir) heat = render_heatmap(heat, mask, opt.heatmap);
    }
    if (opt.heatmap_dir) write_ppm(*opt.heatmap_dir / (stem + ".ppm"), heat);
  }
  return out;
}

FusedSeries fuse_streams(const Streams& streams, FeatureCombo combo, std::int64_t grid_seconds) {
  return engineer_features(impute_spline(align_streams(streams.env, streams.pheno, grid_seconds)), combo);
}

void save_bundle(const ModelBundle& b, const fs::path& path) {
  check_weights(b.config, b.weights);
  // The norm tensor rides along as an extra entry; save_model only checks
  // for the tensors the architecture needs.
  Weights w = b.weights;
  if (!b.norm.empty()) {
    nn::Tensor t = nn::Tensor::matrix(b.norm.size(), 2);
    for (std::size_t i = 0; i < b.norm.size(); ++i) {
      t.at(i, 0) = b.norm[i].mean;
      t.at(i, 1) = b.norm[i].std;
    }
    w[kMetaNorm] = std::move(t);
  }
  save_model(b.config, w, path);
}

ModelBundle load_bundle(const fs::path& path) {
  auto [cfg, w] = load_model(path);
  ModelBundle b;
  b.config = cfg;
  const auto it = w.find(kMetaNorm);
  if (it != w.end()) {
    const nn::Tensor& t = it->second;
    if (t.rank() != 2 || t.cols() != 2 || t.rows() != cfg.n_covariates + 1) {
      throw Error(ErrorCode::FormatError, path.string() + ": meta.norm does not match the model's channel count");
    }
    for (std::size_t i = 0; i < t.rows(); ++i) b.norm.push_back({t.at(i, 0), t.at(i, 1)});
    w.erase(it);
  }
  b.weights = std::move(w);
  return b;
}

std::string format_forecast_csv(const std::vector<WindowForecast>& forecasts, const FusedSeries& grid,
                                std::size_t offset) {
  std::ostringstream out;
  const std::size_t n = forecasts.empty() || forecasts[0].paths.empty() ? 0 : forecasts[0].paths.size();
  out << "window,timestamp,step,mean,p10,p50,p90";
  for (std::size_t s = 0; s < n; ++s) out << ",s" << s;
  out << '\n';
  for (const WindowForecast& f : forecasts) {
    const std::size_t horizon = f.paths.empty() ? 0 : f.paths[0].size();
    for (std::size_t h = 0; h < horizon; ++h) {
      std::vector<double> col;
      col.reserve(f.paths.size());
      for (const auto& p : f.paths) col.push_back(p[h]);
      double mean = 0.0;
      for (double v : col) mean += v;
      mean /= static_cast<double>(col.size());
      out << f.window << ',' << format_iso8601(grid.time_at(offset + f.target_begin + h)) << ',' << h + 1 << ','
          << csv::format_exact(mean) << ',' << csv::format_exact(sample_quantile(col, 0.1)) << ','
          << csv::format_exact(sample_quantile(col, 0.5)) << ',' << csv::format_exact(sample_quantile(col, 0.9));
      for (double v : col) out << ',' << csv::format_exact(v);
      out << '\n';
    }
  }
  return out.str();
}

MetricReport evaluate_forecast_csv(const fs::path& forecast_csv, const FusedSeries& actual) {
  const csv::Table t = csv::read(forecast_csv);
  const std::vector<std::string> fixed{"window", "timestamp", "step", "mean", "p10", "p50", "p90"};
  if (t.header.size() < fixed.size() + 2 || !std::equal(fixed.begin(), fixed.end(), t.header.begin())) {
    throw Error(ErrorCode::SchemaMismatch,
                forecast_csv.string() + ": expected header window,timestamp,step,mean,p10,p50,p90,s0,s1,...");
  }
  const Channel& target = actual.channel(kTargetChannel);
  const std::int64_t t0 = seconds_since_epoch(actual.start);
  MetricAccumulator acc;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto& f = t.rows[r];
    const std::size_t line = t.line_numbers[r];
    Timestamp ts;
    try {
      ts = parse_iso8601(f[1]);
    } catch (const Error& e) {
      throw Error(ErrorCode::ParseError, forecast_csv.string() + ":" + std::to_string(line) + ": " + e.what());
    }
    const std::int64_t dt = seconds_since_epoch(ts) - t0;
    if (dt < 0 || dt % actual.step_seconds != 0 ||
        static_cast<std::size_t>(dt / actual.step_seconds) >= actual.length()) {
      throw Error(ErrorCode::NoOverlap, forecast_csv.string() + ":" + std::to_string(line) + ": timestamp " + f[1] +
                                            " is not on the grid of the actual series");
    }
    std::vector<double> samples;
    for (std::size_t c = fixed.size(); c < f.size(); ++c) {
      samples.push_back(csv::parse_double(f[c], forecast_csv, line, t.header[c]));
    }
    acc.add(samples, target.values[static_cast<std::size_t>(dt / actual.step_seconds)]);
  }
  if (acc.size() == 0) throw Error(ErrorCode::EmptySplit, forecast_csv.string() + ": no forecast rows");
  return acc.report();
}

std::string format_metrics_json(const MetricReport& r) {
  nlohmann::ordered_json j{{"crps", r.crps_mean},      {"crps_normalized", r.crps_normalized},
                           {"mse", r.mse},             {"mae", r.mae},
                           {"rmse", r.rmse},           {"pearson_r", r.pearson_r},
                           {"pearson_defined", r.pearson_defined}, {"n_points", r.n_points}};
  return j.dump(2) + "\n";
}

}  // namespace plantcast
