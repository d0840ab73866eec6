#include "plantcast/pheno.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <string>

#include "plantcast/csv.hpp"
#include "plantcast/error.hpp"

namespace plantcast {

namespace fs = std::filesystem;

Gradient default_gradient() {
  Gradient g{};
  for (int v = 0; v < 256; ++v) {
    g[v] = Rgb{static_cast<std::uint8_t>(255 - v), static_cast<std::uint8_t>(v), 0};
  }
  return g;
}

Gradient load_gradient(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoFailure, "cannot open " + path.string());
  Gradient g{};
  std::string line;
  std::size_t n = 0;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto f = csv::split(line);
    if (f.size() != 3 || n >= 256) {
      throw Error(ErrorCode::FormatError, path.string() + ":" + std::to_string(lineno) +
                                              ": gradient rows must be 'r,g,b' (256 rows)");
    }
    static constexpr std::array<std::string_view, 3> kNames{"r", "g", "b"};
    std::array<std::uint8_t, 3> c{};
    for (std::size_t k = 0; k < 3; ++k) {
      const long long v = csv::parse_int(f[k], path, lineno, kNames[k]);
      if (v < 0 || v > 255) {
        throw Error(ErrorCode::FormatError, path.string() + ":" + std::to_string(lineno) + ": value out of 0..255");
      }
      c[k] = static_cast<std::uint8_t>(v);
    }
    g[n++] = Rgb{c[0], c[1], c[2]};
  }
  if (n != 256) throw Error(ErrorCode::FormatError, path.string() + ": gradient needs exactly 256 entries");
  return g;
}

namespace {

void require_same_dims(std::size_t w1, std::size_t h1, std::size_t w2, std::size_t h2, const char* what) {
  if (w1 != w2 || h1 != h2) {
    throw Error(ErrorCode::DimensionMismatch, std::string(what) + ": " + std::to_string(w1) + "x" +
                                                  std::to_string(h1) + " vs " + std::to_string(w2) + "x" +
                                                  std::to_string(h2));
  }
}

}  // namespace

Ratios derive_ratios(std::int64_t area, std::int64_t height, std::int64_t width) {
  if (height <= 0 || width <= 0) {
    throw Error(ErrorCode::ZeroDimension, "mask height and width must be positive");
  }
  return {static_cast<double>(area) / static_cast<double>(height),
          static_cast<double>(height) / static_cast<double>(width)};
}

PhenotypeRecord mask_stats(const Frame& frame, const Mask& mask, std::int64_t object_id) {
  require_same_dims(frame.width, frame.height, mask.width, mask.height, "mask_stats");
  std::uint64_t sum_r = 0, sum_g = 0, sum_b = 0, area = 0;
  std::size_t min_row = frame.height, max_row = 0, min_col = frame.width, max_col = 0;
  for (std::size_t row = 0; row < frame.height; ++row) {
    const std::uint8_t* mrow = mask.bits.data() + row * mask.width;
    const Rgb* prow = frame.pixels.data() + row * frame.width;
    for (std::size_t col = 0; col < frame.width; ++col) {
      if (!mrow[col]) continue;
      sum_r += prow[col].r;
      sum_g += prow[col].g;
      sum_b += prow[col].b;
      ++area;
      min_row = std::min(min_row, row);
      max_row = std::max(max_row, row);
      min_col = std::min(min_col, col);
      max_col = std::max(max_col, col);
    }
  }
  if (area == 0) throw Error(ErrorCode::EmptyMask, "mask has no set pixels");

  PhenotypeRecord rec;
  rec.timestamp = frame.timestamp;
  rec.object_id = object_id;
  const double n = static_cast<double>(area);
  rec.mean_r = static_cast<double>(sum_r) / n;
  rec.mean_g = static_cast<double>(sum_g) / n;
  rec.mean_b = static_cast<double>(sum_b) / n;
  rec.mask_area = static_cast<std::int64_t>(area);
  rec.mask_height = static_cast<std::int64_t>(max_row - min_row + 1);
  rec.mask_width = static_cast<std::int64_t>(max_col - min_col + 1);
  const Ratios r = derive_ratios(rec.mask_area, rec.mask_height, rec.mask_width);
  rec.area_to_height = r.area_to_height;
  rec.height_to_width = r.height_to_width;
  return rec;
}

Frame render_heatmap(const Frame& frame, const Mask& mask, const HeatmapConfig& cfg) {
  require_same_dims(frame.width, frame.height, mask.width, mask.height, "render_heatmap");
  const double a = cfg.alpha;
  auto blend = [a](std::uint8_t heat, std::uint8_t orig) {
    const double v = std::round(a * heat + (1.0 - a) * orig);
    return static_cast<std::uint8_t>(std::clamp(v, 0.0, 255.0));
  };
  Frame out = frame;
  for (std::size_t i = 0; i < frame.pixels.size(); ++i) {
    if (!mask.bits[i]) continue;
    const Rgb& p = frame.pixels[i];
    const Rgb& heat = cfg.gradient[p.g];
    out.pixels[i] = Rgb{blend(heat.r, p.r), blend(heat.g, p.g), blend(heat.b, p.b)};
  }
  return out;
}

Frame render_colorbar(const Gradient& gradient) {
  Frame bar(256, 16);
  for (std::size_t row = 0; row < bar.height; ++row) {
    for (std::size_t col = 0; col < 256; ++col) bar.at(row, col) = gradient[col];
  }
  return bar;
}

double mask_iou(const Mask& a, const Mask& b) {
  require_same_dims(a.width, a.height, b.width, b.height, "mask_iou");
  std::size_t inter = 0, uni = 0;
  for (std::size_t i = 0; i < a.bits.size(); ++i) {
    const bool x = a.bits[i] != 0;
    const bool y = b.bits[i] != 0;
    inter += (x && y) ? 1 : 0;
    uni += (x || y) ? 1 : 0;
  }
  if (uni == 0) return 1.0;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

std::string format_pheno_csv(const std::vector<PhenotypeRecord>& records) {
  std::string out(kPhenoCsvHeader);
  out += '\n';
  for (const auto& r : records) {
    out += csv::join({format_iso8601(r.timestamp), std::to_string(r.object_id), csv::format_fixed(r.mean_r, 6),
                      csv::format_fixed(r.mean_g, 6), csv::format_fixed(r.mean_b, 6),
                      std::to_string(r.mask_area), std::to_string(r.mask_height),
                      std::to_string(r.mask_width), csv::format_fixed(r.area_to_height, 6),
                      csv::format_fixed(r.height_to_width, 6)});
    out += '\n';
  }
  return out;
}

void write_pheno_csv(const std::vector<PhenotypeRecord>& records, const fs::path& path) {
  csv::write_atomic(path, format_pheno_csv(records));
}

std::vector<PhenotypeRecord> read_pheno_csv(const fs::path& path) {
  const csv::Table t = csv::read(path);
  if (csv::join(t.header) != kPhenoCsvHeader) {
    throw Error(ErrorCode::SchemaMismatch, path.string() + ": expected header '" + std::string(kPhenoCsvHeader) + "'");
  }
  std::vector<PhenotypeRecord> out;
  out.reserve(t.rows.size());
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    const auto& f = t.rows[i];
    const std::size_t line = t.line_numbers[i];
    auto fail = [&](const std::string& what) {
      return Error(ErrorCode::ParseError, path.string() + ":" + std::to_string(line) + ": " + what);
    };
    PhenotypeRecord r;
    try {
      r.timestamp = parse_iso8601(f[0]);
    } catch (const Error& e) {
      throw fail(e.what());
    }
    r.object_id = csv::parse_int(f[1], path, line, "object_id");
    r.mean_r = csv::parse_double(f[2], path, line, "mean_r");
    r.mean_g = csv::parse_double(f[3], path, line, "mean_g");
    r.mean_b = csv::parse_double(f[4], path, line, "mean_b");
    r.mask_area = csv::parse_int(f[5], path, line, "mask_area");
    r.mask_height = csv::parse_int(f[6], path, line, "mask_height");
    r.mask_width = csv::parse_int(f[7], path, line, "mask_width");
    r.area_to_height = csv::parse_double(f[8], path, line, "area_to_height");
    r.height_to_width = csv::parse_double(f[9], path, line, "height_to_width");
    for (double m : {r.mean_r, r.mean_g, r.mean_b}) {
      if (m < 0.0 || m > 255.0) throw fail("channel mean outside [0,255]");
    }
    if (r.mask_area < 1 || r.mask_height < 1 || r.mask_width < 1) throw fail("mask size fields must be >= 1");
    if (r.mask_area > r.mask_height * r.mask_width) throw fail("mask_area exceeds bounding box");
    out.push_back(r);
  }
  return out;
}

}  // namespace plantcast
