#include "plantcast/fusion.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "plantcast/csv.hpp"
#include "plantcast/error.hpp"
#include "plantcast/spline.hpp"

namespace plantcast {

namespace fs = std::filesystem;

std::ptrdiff_t FusedSeries::index_of(std::string_view name) const {
  for (std::size_t i = 0; i < channels.size(); ++i) {
    if (channels[i].name == name) return static_cast<std::ptrdiff_t>(i);
  }
  return -1;
}

const Channel& FusedSeries::channel(std::string_view name) const {
  const auto i = index_of(name);
  if (i < 0) throw Error(ErrorCode::MissingChannel, "series has no channel '" + std::string(name) + "'");
  return channels[static_cast<std::size_t>(i)];
}

std::string_view combo_tag(FeatureCombo c) noexcept {
  switch (c) {
    case FeatureCombo::Rgb: return "RGB";
    case FeatureCombo::RgbRatios: return "RGB_RATIOS";
    case FeatureCombo::RgbEnv: return "RGB_ENV";
    case FeatureCombo::RgbRatiosEnv: return "RGB_RATIOS_ENV";
  }
  return "RGB";
}

std::string_view combo_label(FeatureCombo c) noexcept {
  switch (c) {
    case FeatureCombo::Rgb: return "RGB";
    case FeatureCombo::RgbRatios: return "RGB with ratios";
    case FeatureCombo::RgbEnv: return "RGB with environmental data";
    case FeatureCombo::RgbRatiosEnv: return "RGB with ratios and environmental data";
  }
  return "RGB";
}

FeatureCombo parse_combo(std::string_view tag) {
  for (FeatureCombo c : kAllCombos) {
    if (combo_tag(c) == tag) return c;
  }
  throw Error(ErrorCode::UsageError, "unknown feature combo '" + std::string(tag) +
                                         "' (expected RGB, RGB_RATIOS, RGB_ENV or RGB_RATIOS_ENV)");
}

std::vector<std::string_view> combo_channels(FeatureCombo c) {
  std::vector<std::string_view> out{"mean_r", "mean_g", "mean_b"};
  if (c == FeatureCombo::RgbRatios || c == FeatureCombo::RgbRatiosEnv) {
    out.insert(out.end(), {"area_to_height", "height_to_width"});
  }
  if (c == FeatureCombo::RgbEnv || c == FeatureCombo::RgbRatiosEnv) {
    out.insert(out.end(), {"temp_c", "rh_pct", "light", "voc_ppb", "co2_ppm", "pm25_ugm3"});
  }
  return out;
}

// ---------------------------------------------------------------------------
// CSV streams

std::vector<EnvRecord> read_env_csv(const fs::path& path) {
  const csv::Table t = csv::read(path);
  if (csv::join(t.header) != kEnvCsvHeader) {
    throw Error(ErrorCode::SchemaMismatch, path.string() + ": expected header '" + std::string(kEnvCsvHeader) + "'");
  }
  std::vector<EnvRecord> out;
  out.reserve(t.rows.size());
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    const auto& f = t.rows[i];
    const std::size_t line = t.line_numbers[i];
    auto fail = [&](const std::string& what) {
      return Error(ErrorCode::ParseError, path.string() + ":" + std::to_string(line) + ": " + what);
    };
    EnvRecord r;
    try {
      r.timestamp = parse_iso8601(f[0]);
    } catch (const Error& e) {
      throw fail(e.what());
    }
    r.temp_c = csv::parse_double(f[1], path, line, "temp_c");
    r.rh_pct = csv::parse_double(f[2], path, line, "rh_pct");
    r.light = csv::parse_double(f[3], path, line, "light");
    r.voc_ppb = csv::parse_double(f[4], path, line, "voc_ppb");
    r.co2_ppm = csv::parse_double(f[5], path, line, "co2_ppm");
    r.pm25_ugm3 = csv::parse_double(f[6], path, line, "pm25_ugm3");
    if (r.rh_pct < 0.0 || r.rh_pct > 100.0) throw fail("rh_pct outside [0,100]");
    if (r.co2_ppm < 0.0) throw fail("co2_ppm negative");
    if (r.pm25_ugm3 < 0.0) throw fail("pm25_ugm3 negative");
    if (r.voc_ppb < 0.0) throw fail("voc_ppb negative");
    out.push_back(r);
  }
  return out;
}

std::string format_env_csv(const std::vector<EnvRecord>& records) {
  std::string out(kEnvCsvHeader);
  out += '\n';
  for (const auto& r : records) {
    out += csv::join({format_iso8601(r.timestamp), csv::format_fixed(r.temp_c, 6), csv::format_fixed(r.rh_pct, 6),
                      csv::format_fixed(r.light, 6), csv::format_fixed(r.voc_ppb, 6),
                      csv::format_fixed(r.co2_ppm, 6), csv::format_fixed(r.pm25_ugm3, 6)});
    out += '\n';
  }
  return out;
}

void write_env_csv(const std::vector<EnvRecord>& records, const fs::path& path) {
  csv::write_atomic(path, format_env_csv(records));
}

Streams load_streams(const fs::path& env_path, const fs::path& pheno_path) {
  Streams s{read_env_csv(env_path), read_pheno_csv(pheno_path)};
  std::stable_sort(s.env.begin(), s.env.end(),
                   [](const EnvRecord& a, const EnvRecord& b) { return a.timestamp < b.timestamp; });
  for (std::size_t i = 1; i < s.env.size(); ++i) {
    if (s.env[i].timestamp == s.env[i - 1].timestamp) {
      throw Error(ErrorCode::NonMonotonic,
                  env_path.string() + ": duplicate timestamp " + format_iso8601(s.env[i].timestamp));
    }
  }
  std::stable_sort(s.pheno.begin(), s.pheno.end(), [](const PhenotypeRecord& a, const PhenotypeRecord& b) {
    return a.timestamp != b.timestamp ? a.timestamp < b.timestamp : a.object_id < b.object_id;
  });
  for (std::size_t i = 1; i < s.pheno.size(); ++i) {
    if (s.pheno[i].timestamp == s.pheno[i - 1].timestamp && s.pheno[i].object_id == s.pheno[i - 1].object_id) {
      throw Error(ErrorCode::NonMonotonic, pheno_path.string() + ": duplicate timestamp " +
                                               format_iso8601(s.pheno[i].timestamp) + " for object " +
                                               std::to_string(s.pheno[i].object_id));
    }
  }
  return s;
}

// ---------------------------------------------------------------------------
// Alignment

FusedSeries align_streams(const std::vector<EnvRecord>& env, const std::vector<PhenotypeRecord>& pheno_all,
                          std::int64_t step_seconds) {
  if (step_seconds <= 0) throw Error(ErrorCode::UsageError, "grid step must be positive");
  if (env.empty() || pheno_all.empty()) throw Error(ErrorCode::NoOverlap, "both streams must be nonempty");

  // single tracked object: the lowest object id present
  std::int64_t object = pheno_all.front().object_id;
  for (const auto& r : pheno_all) object = std::min(object, r.object_id);
  std::vector<const PhenotypeRecord*> pheno;
  for (const auto& r : pheno_all) {
    if (r.object_id == object) pheno.push_back(&r);
  }

  const std::int64_t env_lo = seconds_since_epoch(env.front().timestamp);
  const std::int64_t env_hi = seconds_since_epoch(env.back().timestamp);
  const std::int64_t ph_lo = seconds_since_epoch(pheno.front()->timestamp);
  const std::int64_t ph_hi = seconds_since_epoch(pheno.back()->timestamp);
  const std::int64_t lo = std::max(env_lo, ph_lo);
  const std::int64_t hi = std::min(env_hi, ph_hi);
  if (lo > hi) throw Error(ErrorCode::NoOverlap, "environment and phenotype time ranges do not overlap");

  const std::size_t n = static_cast<std::size_t>((hi - lo) / step_seconds) + 1;
  FusedSeries out;
  out.start = from_seconds(lo);
  out.step_seconds = step_seconds;
  for (std::string_view name : kFusedChannelOrder) {
    out.channels.push_back(Channel{std::string(name), std::vector<double>(n, 0.0), std::vector<std::uint8_t>(n, 1)});
  }

  // phenotype: bucket means over [t, t+step)
  {
    std::vector<std::array<double, 8>> sums(n, std::array<double, 8>{});
    std::vector<std::size_t> counts(n, 0);
    for (const PhenotypeRecord* r : pheno) {
      const std::int64_t t = seconds_since_epoch(r->timestamp);
      if (t < lo) continue;
      const auto k = static_cast<std::size_t>((t - lo) / step_seconds);
      if (k >= n) continue;
      const std::array<double, 8> v{r->mean_r,
                                    r->mean_g,
                                    r->mean_b,
                                    static_cast<double>(r->mask_area),
                                    static_cast<double>(r->mask_height),
                                    static_cast<double>(r->mask_width),
                                    r->area_to_height,
                                    r->height_to_width};
      for (std::size_t c = 0; c < 8; ++c) sums[k][c] += v[c];
      ++counts[k];
    }
    for (std::size_t k = 0; k < n; ++k) {
      if (counts[k] == 0) continue;
      for (std::size_t c = 0; c < 8; ++c) {
        out.channels[c].values[k] = sums[k][c] / static_cast<double>(counts[k]);
        out.channels[c].missing[k] = 0;
      }
    }
  }

  // environment: nearest sample within 1.5 steps (ties go to the earlier sample)
  {
    std::size_t j = 0;
    for (std::size_t k = 0; k < n; ++k) {
      const std::int64_t t = lo + static_cast<std::int64_t>(k) * step_seconds;
      while (j + 1 < env.size() && seconds_since_epoch(env[j + 1].timestamp) <= t) ++j;
      const EnvRecord* best = nullptr;
      std::int64_t best_dist = 0;
      for (std::size_t cand = j; cand < std::min(j + 2, env.size()); ++cand) {
        const std::int64_t dist = std::llabs(seconds_since_epoch(env[cand].timestamp) - t);
        if (!best || dist < best_dist) {
          best = &env[cand];
          best_dist = dist;
        }
      }
      // 2 * dist <= 3 * step  <=>  dist <= 1.5 step
      if (!best || 2 * best_dist > 3 * step_seconds) continue;
      const std::array<double, 6> v{best->temp_c,  best->rh_pct,  best->light,
                                    best->voc_ppb, best->co2_ppm, best->pm25_ugm3};
      for (std::size_t c = 0; c < 6; ++c) {
        out.channels[8 + c].values[k] = v[c];
        out.channels[8 + c].missing[k] = 0;
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Imputation

FusedSeries impute_spline(const FusedSeries& series) {
  FusedSeries out = series;
  for (Channel& ch : out.channels) {
    const std::size_t n = ch.values.size();
    std::vector<double> xs, ys;
    for (std::size_t i = 0; i < n; ++i) {
      if (!ch.missing[i]) {
        xs.push_back(static_cast<double>(i));
        ys.push_back(ch.values[i]);
      }
    }
    if (xs.size() == n) continue;
    if (xs.size() < 2) {
      throw Error(ErrorCode::TooFewPoints, "channel '" + ch.name + "' has " + std::to_string(xs.size()) +
                                               " observed points; at least 2 needed to impute");
    }
    const CubicSpline spline(xs, ys);
    const auto first = static_cast<std::size_t>(xs.front());
    const auto last = static_cast<std::size_t>(xs.back());
    for (std::size_t i = 0; i < n; ++i) {
      if (!ch.missing[i]) continue;
      if (i < first) {
        ch.values[i] = ys.front();
      } else if (i > last) {
        ch.values[i] = ys.back();
      } else {
        ch.values[i] = spline(static_cast<double>(i));
      }
      ch.missing[i] = 0;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Features and normalization

FusedSeries engineer_features(const FusedSeries& series, FeatureCombo combo) {
  FusedSeries out;
  out.start = series.start;
  out.step_seconds = series.step_seconds;
  std::vector<NormStats> stats;
  for (std::string_view name : combo_channels(combo)) {
    const auto idx = series.index_of(name);
    if (idx < 0) {
      throw Error(ErrorCode::MissingChannel, "combo " + std::string(combo_tag(combo)) + " needs channel '" +
                                                 std::string(name) + "'");
    }
    out.channels.push_back(series.channels[static_cast<std::size_t>(idx)]);
    if (series.norm_stats) stats.push_back((*series.norm_stats)[static_cast<std::size_t>(idx)]);
  }
  if (series.norm_stats) out.norm_stats = std::move(stats);
  return out;
}

std::vector<NormStats> compute_norm_stats(const FusedSeries& series) {
  std::vector<NormStats> stats;
  for (const Channel& ch : series.channels) {
    const double n = static_cast<double>(ch.values.size());
    double mean = 0.0;
    for (double v : ch.values) mean += v;
    mean /= n;
    double var = 0.0;
    for (double v : ch.values) var += (v - mean) * (v - mean);
    var /= n;
    const double sd = std::sqrt(var);
    stats.push_back(NormStats{mean, sd > 0.0 ? sd : 1.0});
  }
  return stats;
}

FusedSeries normalize(const FusedSeries& series, const std::optional<std::vector<NormStats>>& stats) {
  FusedSeries out = series;
  const std::vector<NormStats> use = stats ? *stats : compute_norm_stats(series);
  if (use.size() != series.channels.size()) {
    throw Error(ErrorCode::ShapeMismatch, "normalization stats do not match channel count");
  }
  for (std::size_t c = 0; c < out.channels.size(); ++c) {
    for (double& v : out.channels[c].values) v = (v - use[c].mean) / use[c].std;
  }
  out.norm_stats = use;
  return out;
}

double denormalize(double z, const NormStats& s) { return z * s.std + s.mean; }

// ---------------------------------------------------------------------------
// Windows and splits

WindowSet make_windows(std::size_t n, std::size_t context_len, std::size_t horizon, std::size_t stride,
                       std::size_t lag_margin) {
  if (context_len < 1 || horizon < 1 || stride < 1) {
    throw Error(ErrorCode::UsageError, "context, horizon and stride must be >= 1");
  }
  WindowSet ws;
  ws.context_len = context_len;
  ws.horizon = horizon;
  ws.stride = stride;
  ws.lag_margin = lag_margin;
  const std::size_t fp = ws.footprint();
  if (n < fp) return ws;
  const std::size_t count = (n - fp) / stride + 1;
  ws.starts.reserve(count);
  for (std::size_t i = 0; i < count; ++i) ws.starts.push_back(i * stride);
  return ws;
}

FusedSeries slice_series(const FusedSeries& series, std::size_t begin, std::size_t end) {
  FusedSeries out;
  out.start = series.time_at(begin);
  out.step_seconds = series.step_seconds;
  out.norm_stats = series.norm_stats;
  for (const Channel& ch : series.channels) {
    Channel c;
    c.name = ch.name;
    c.values.assign(ch.values.begin() + static_cast<std::ptrdiff_t>(begin),
                    ch.values.begin() + static_cast<std::ptrdiff_t>(end));
    c.missing.assign(ch.missing.begin() + static_cast<std::ptrdiff_t>(begin),
                     ch.missing.begin() + static_cast<std::ptrdiff_t>(end));
    out.channels.push_back(std::move(c));
  }
  return out;
}

SeriesSplit split_series(const FusedSeries& series, double train_frac, double val_frac) {
  const std::size_t n = series.length();
  const auto n_train = static_cast<std::size_t>(std::floor(train_frac * static_cast<double>(n)));
  const auto n_val = static_cast<std::size_t>(std::floor(val_frac * static_cast<double>(n)));
  return {slice_series(series, 0, n_train), slice_series(series, n_train, n_train + n_val),
          slice_series(series, n_train + n_val, n)};
}

// ---------------------------------------------------------------------------
// Fused CSV

std::string format_fused_csv(const FusedSeries& series) {
  std::vector<std::string> header{"timestamp"};
  for (const Channel& ch : series.channels) header.push_back(ch.name);
  std::string out = csv::join(header) + "\n";
  for (std::size_t i = 0; i < series.length(); ++i) {
    std::vector<std::string> row{format_iso8601(series.time_at(i))};
    for (const Channel& ch : series.channels) {
      row.push_back(ch.missing[i] ? std::string() : csv::format_exact(ch.values[i]));
    }
    out += csv::join(row);
    out += '\n';
  }
  return out;
}

void write_fused_csv(const FusedSeries& series, const fs::path& path) {
  csv::write_atomic(path, format_fused_csv(series));
}

FusedSeries read_fused_csv(const fs::path& path) {
  const csv::Table t = csv::read(path);
  if (t.header.empty() || t.header[0] != "timestamp" || t.header.size() < 2) {
    throw Error(ErrorCode::SchemaMismatch, path.string() + ": fused CSV must start with 'timestamp' and one channel");
  }
  FusedSeries out;
  std::map<std::string, int> seen;
  for (std::size_t c = 1; c < t.header.size(); ++c) {
    if (seen[t.header[c]]++) throw Error(ErrorCode::SchemaMismatch, path.string() + ": duplicate channel " + t.header[c]);
    out.channels.push_back(Channel{t.header[c], {}, {}});
  }
  if (t.rows.empty()) throw Error(ErrorCode::ParseError, path.string() + ": no data rows");
  std::int64_t prev = 0;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto& f = t.rows[r];
    const std::size_t line = t.line_numbers[r];
    std::int64_t ts = 0;
    try {
      ts = seconds_since_epoch(parse_iso8601(f[0]));
    } catch (const Error& e) {
      throw Error(ErrorCode::ParseError, path.string() + ":" + std::to_string(line) + ": " + e.what());
    }
    if (r == 0) {
      out.start = from_seconds(ts);
    } else if (r == 1) {
      out.step_seconds = ts - prev;
      if (out.step_seconds <= 0) {
        throw Error(ErrorCode::NonMonotonic, path.string() + ":" + std::to_string(line) + ": timestamps must increase");
      }
    } else if (ts - prev != out.step_seconds) {
      throw Error(ErrorCode::ParseError, path.string() + ":" + std::to_string(line) + ": irregular grid step");
    }
    prev = ts;
    for (std::size_t c = 1; c < f.size(); ++c) {
      Channel& ch = out.channels[c - 1];
      if (f[c].empty()) {
        ch.values.push_back(0.0);
        ch.missing.push_back(1);
      } else {
        ch.values.push_back(csv::parse_double(f[c], path, line, ch.name));
        ch.missing.push_back(0);
      }
    }
  }
  return out;
}

}  // namespace plantcast
