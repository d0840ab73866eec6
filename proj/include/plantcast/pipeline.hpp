#pragma once
// File-level stages shared by the command-line tool: frame extraction,
// stream fusion, trained-model bundles and forecast/metric reports.

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "plantcast/ablation.hpp"
#include "plantcast/fusion.hpp"
#include "plantcast/pheno.hpp"
#include "plantcast/train.hpp"

namespace plantcast {

// Frame files are named YYYYMMDDTHHMMSSZ.ppm; the stem is the timestamp.
// Throws ParseError.
Timestamp parse_frame_stem(std::string_view stem);
std::string frame_stem(Timestamp t);

struct ExtractOptions {
  std::optional<std::filesystem::path> heatmap_dir;
  HeatmapConfig heatmap;
};

// For every frame STEM.ppm, masks STEM.pgm (object 0) and STEM.<id>.pgm are
// read. Frames without masks are skipped. Heatmaps (one per frame, all
// objects blended in id order) and colorbar.ppm go to heatmap_dir.
std::vector<PhenotypeRecord> extract_frames(const std::filesystem::path& frames_dir,
                                            const std::filesystem::path& masks_dir, const ExtractOptions& opt);

// align → impute → engineer
FusedSeries fuse_streams(const Streams& streams, FeatureCombo combo, std::int64_t grid_seconds);

// Model weights plus the per-channel statistics its training data was
// normalized with (channel order of the fused file).
struct ModelBundle {
  ModelConfig config;
  Weights weights;
  std::vector<NormStats> norm;
};

void save_bundle(const ModelBundle& b, const std::filesystem::path& path);
ModelBundle load_bundle(const std::filesystem::path& path);

// window,timestamp,step,mean,p10,p50,p90,s0..s{n-1}; timestamps of the
// forecast steps taken from `grid` offset by `offset` (index of test[0]).
std::string format_forecast_csv(const std::vector<WindowForecast>& forecasts, const FusedSeries& grid,
                                std::size_t offset);

// Joins forecast rows with the target channel of `actual` by timestamp.
MetricReport evaluate_forecast_csv(const std::filesystem::path& forecast_csv, const FusedSeries& actual);

std::string format_metrics_json(const MetricReport& r);

}  // namespace plantcast
