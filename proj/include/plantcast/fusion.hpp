#pragma once
// Stream loading, grid alignment, spline imputation, feature selection,
// normalization and windowing of the fused plant/environment series.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "plantcast/pheno.hpp"
#include "plantcast/timeutil.hpp"

namespace plantcast {

struct EnvRecord {
  Timestamp timestamp{};
  double temp_c = 0.0;
  double rh_pct = 0.0;
  double light = 0.0;
  double voc_ppb = 0.0;
  double co2_ppm = 0.0;
  double pm25_ugm3 = 0.0;
};

inline constexpr std::string_view kEnvCsvHeader = "timestamp,temp_c,rh_pct,light,voc_ppb,co2_ppm,pm25_ugm3";
inline constexpr std::string_view kTargetChannel = "mean_g";

// Channel order produced by align_streams.
inline constexpr std::string_view kFusedChannelOrder[] = {
    "mean_r", "mean_g", "mean_b", "mask_area", "mask_height", "mask_width", "area_to_height",
    "height_to_width", "temp_c", "rh_pct", "light", "voc_ppb", "co2_ppm", "pm25_ugm3"};

struct NormStats {
  double mean = 0.0;
  double std = 1.0;
};

struct Channel {
  std::string name;
  std::vector<double> values;
  std::vector<std::uint8_t> missing;  // 1 = no observation at this grid step
};

struct FusedSeries {
  Timestamp start{};
  std::int64_t step_seconds = 60;
  std::vector<Channel> channels;
  std::optional<std::vector<NormStats>> norm_stats;

  std::size_t length() const { return channels.empty() ? 0 : channels.front().values.size(); }
  Timestamp time_at(std::size_t i) const {
    return start + std::chrono::seconds{step_seconds * static_cast<std::int64_t>(i)};
  }
  // -1 when absent
  std::ptrdiff_t index_of(std::string_view name) const;
  const Channel& channel(std::string_view name) const;  // throws MissingChannel
};

enum class FeatureCombo { Rgb, RgbRatios, RgbEnv, RgbRatiosEnv };

inline constexpr FeatureCombo kAllCombos[] = {FeatureCombo::Rgb, FeatureCombo::RgbRatios,
                                              FeatureCombo::RgbEnv, FeatureCombo::RgbRatiosEnv};

std::string_view combo_tag(FeatureCombo c) noexcept;    // "RGB", "RGB_RATIOS", ...
std::string_view combo_label(FeatureCombo c) noexcept;  // "RGB with ratios", ...
FeatureCombo parse_combo(std::string_view tag);         // throws UsageError
std::vector<std::string_view> combo_channels(FeatureCombo c);

struct Streams {
  std::vector<EnvRecord> env;
  std::vector<PhenotypeRecord> pheno;
};

std::vector<EnvRecord> read_env_csv(const std::filesystem::path& path);
std::string format_env_csv(const std::vector<EnvRecord>& records);
void write_env_csv(const std::vector<EnvRecord>& records, const std::filesystem::path& path);

// Strict load of both streams, each sorted by time. Duplicate timestamps
// (per object for phenotype rows) are rejected with NonMonotonic.
Streams load_streams(const std::filesystem::path& env_path, const std::filesystem::path& pheno_path);

// Resamples both streams onto a common grid over the intersection of their
// time ranges. Phenotype channels: mean of samples in [t, t+step). Env
// channels: nearest sample within 1.5 steps, else missing.
FusedSeries align_streams(const std::vector<EnvRecord>& env, const std::vector<PhenotypeRecord>& pheno,
                          std::int64_t step_seconds = 60);

// Fills interior gaps with a not-a-knot cubic spline through the observed
// points and edge gaps with the nearest observed value.
FusedSeries impute_spline(const FusedSeries& series);

FusedSeries engineer_features(const FusedSeries& series, FeatureCombo combo);

// z-score per channel with population std. Without `stats` they are computed
// from the series itself (training split); constant channels get std 1.
FusedSeries normalize(const FusedSeries& series, const std::optional<std::vector<NormStats>>& stats = std::nullopt);
std::vector<NormStats> compute_norm_stats(const FusedSeries& series);
double denormalize(double z, const NormStats& s);

struct WindowSet {
  std::vector<std::size_t> starts;  // first index of each window's input slab
  std::size_t context_len = 0;
  std::size_t horizon = 0;
  std::size_t stride = 1;
  std::size_t lag_margin = 0;

  std::size_t size() const { return starts.size(); }
  bool empty() const { return starts.empty(); }
  std::size_t input_len() const { return lag_margin + context_len; }
  std::size_t footprint() const { return lag_margin + context_len + horizon; }
  // [first, last) index ranges inside the series
  std::size_t input_begin(std::size_t w) const { return starts[w]; }
  std::size_t target_begin(std::size_t w) const { return starts[w] + input_len(); }
};

WindowSet make_windows(std::size_t series_length, std::size_t context_len, std::size_t horizon,
                       std::size_t stride, std::size_t lag_margin);
inline WindowSet make_windows(const FusedSeries& s, std::size_t context_len, std::size_t horizon,
                              std::size_t stride, std::size_t lag_margin) {
  return make_windows(s.length(), context_len, horizon, stride, lag_margin);
}

struct SeriesSplit {
  FusedSeries train;
  FusedSeries val;
  FusedSeries test;
};

// Contiguous split by time: first 70% train, next 15% validation, rest test.
SeriesSplit split_series(const FusedSeries& series, double train_frac = 0.70, double val_frac = 0.15);
FusedSeries slice_series(const FusedSeries& series, std::size_t begin, std::size_t end);

// `timestamp` followed by channel names; missing values written as empty fields.
std::string format_fused_csv(const FusedSeries& series);
void write_fused_csv(const FusedSeries& series, const std::filesystem::path& path);
FusedSeries read_fused_csv(const std::filesystem::path& path);

}  // namespace plantcast
