#pragma once
// Per-frame plant phenotype statistics from an RGB frame and a binary mask.

#include <array>
#include <cstdint>
#include <filesystem>
#include <string_view>
#include <vector>

#include "plantcast/image.hpp"
#include "plantcast/timeutil.hpp"

namespace plantcast {

struct PhenotypeRecord {
  Timestamp timestamp{};
  std::int64_t object_id = 0;
  double mean_r = 0.0;
  double mean_g = 0.0;
  double mean_b = 0.0;
  std::int64_t mask_area = 0;
  std::int64_t mask_height = 0;
  std::int64_t mask_width = 0;
  double area_to_height = 0.0;
  double height_to_width = 0.0;
};

struct Ratios {
  double area_to_height = 0.0;
  double height_to_width = 0.0;
};

using Gradient = std::array<Rgb, 256>;

// Linear red→green ramp: entry v = (255 - v, v, 0). Low green reads as red.
Gradient default_gradient();
// Text table of 256 lines "r,g,b" (0..255). Throws FormatError.
Gradient load_gradient(const std::filesystem::path& path);

struct HeatmapConfig {
  double alpha = 0.5;
  Gradient gradient = default_gradient();
};

inline constexpr std::string_view kPhenoCsvHeader =
    "timestamp,object_id,mean_r,mean_g,mean_b,mask_area,mask_height,mask_width,area_to_height,"
    "height_to_width";

// Throws DimensionMismatch or EmptyMask.
PhenotypeRecord mask_stats(const Frame& frame, const Mask& mask, std::int64_t object_id);

// Throws ZeroDimension when height or width is 0.
Ratios derive_ratios(std::int64_t area, std::int64_t height, std::int64_t width);

// Blends gradient[G] into every mask pixel with opacity alpha; other pixels are
// copied. Channels are rounded half away from zero.
Frame render_heatmap(const Frame& frame, const Mask& mask, const HeatmapConfig& cfg);

// 256×16 strip, column x painted with gradient[x].
Frame render_colorbar(const Gradient& gradient);

// |a ∩ b| / |a ∪ b|; 1.0 when both are empty.
double mask_iou(const Mask& a, const Mask& b);

void write_pheno_csv(const std::vector<PhenotypeRecord>& records, const std::filesystem::path& path);
std::string format_pheno_csv(const std::vector<PhenotypeRecord>& records);
// Strict reader; validates header, ranges and record invariants.
std::vector<PhenotypeRecord> read_pheno_csv(const std::filesystem::path& path);

}  // namespace plantcast
