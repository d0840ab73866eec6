#include "plantcast/synth.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <random>
#include <sstream>

#include "plantcast/csv.hpp"
#include "plantcast/error.hpp"
#include "plantcast/rng.hpp"

namespace plantcast {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr double kMinutesPerDay = 1440.0;

// Daily phase with the peak at 15:00.
double daily_wave(double minute_of_day) { return std::sin(kTwoPi * (minute_of_day - 9.0 * 60.0) / kMinutesPerDay); }

double cycle_value(const CycleConfig& c, double wave, std::normal_distribution<double>& n, Rng& rng) {
  return c.mean + c.amplitude * wave + c.noise_sd * n(rng);
}

double clamp255(double v) { return std::clamp(v, 0.0, 255.0); }

}  // namespace

void TentSimConfig::validate() const {
  if (days < 1) throw Error(ErrorCode::UsageError, "simulation needs at least one day");
  if (tau_minutes <= 0.0) throw Error(ErrorCode::UsageError, "tau_minutes must be positive");
  if (stress_threshold <= 0.0 || stress_threshold >= 1.0) {
    throw Error(ErrorCode::UsageError, "stress threshold must lie in (0,1)");
  }
  if (step_seconds <= 0 || pheno_seconds <= 0 || step_seconds % pheno_seconds != 0) {
    throw Error(ErrorCode::UsageError, "env cadence must be a positive multiple of the camera cadence");
  }
  if (g_base <= 0.0 || g_base > 255.0) throw Error(ErrorCode::UsageError, "g_base must lie in (0,255]");
  if (watering_per_day < 0.0) throw Error(ErrorCode::UsageError, "watering rate must be >= 0");
}

double moisture_step(double m, double dt_minutes, double tau_eff_minutes) noexcept {
  return m * std::exp(-dt_minutes / tau_eff_minutes);
}

double effective_tau(double tau_minutes, double temp_c, double temp_mean, double coupling) noexcept {
  return tau_minutes / (1.0 + coupling * std::max(0.0, temp_c - temp_mean));
}

TentSimResult simulate_tent(const TentSimConfig& cfg) {
  cfg.validate();
  TentSimResult out;
  Rng water_rng = make_rng(cfg.seed, 1);
  Rng temp_rng = make_rng(cfg.seed, 2);
  Rng env_rng = make_rng(cfg.seed, 3);
  Rng pheno_rng = make_rng(cfg.seed, 4);
  std::normal_distribution<double> normal(0.0, 1.0);

  const std::int64_t total_seconds = static_cast<std::int64_t>(cfg.days) * 86400;
  const double dt_min = static_cast<double>(cfg.pheno_seconds) / 60.0;
  const std::int64_t env_every = cfg.step_seconds / cfg.pheno_seconds;

  // Next watering instant, in seconds from start.
  std::exponential_distribution<double> gap(cfg.watering_per_day > 0.0 ? cfg.watering_per_day / 86400.0 : 1.0);
  double next_water = cfg.watering_per_day > 0.0 ? gap(water_rng) : std::numeric_limits<double>::infinity();

  // Temperature anomaly: AR(1) with the configured correlation time and
  // stationary standard deviation temp.noise_sd.
  const double rho = std::exp(-dt_min / cfg.temp_noise_minutes);
  const double innov = cfg.temp.noise_sd * std::sqrt(1.0 - rho * rho);
  double anomaly = cfg.temp.noise_sd * normal(temp_rng);

  const double g_ref = cfg.g_base * 0.85;
  double m = cfg.initial_moisture;
  const std::int64_t ticks = total_seconds / cfg.pheno_seconds;
  for (std::int64_t k = 0; k < ticks; ++k) {
    const std::int64_t sec = k * cfg.pheno_seconds;
    const Timestamp ts = cfg.start + std::chrono::seconds{sec};
    const double minute_of_day = std::fmod(static_cast<double>(seconds_since_epoch(ts)) / 60.0, kMinutesPerDay);
    const double wave = daily_wave(minute_of_day);

    if (k > 0) {
      anomaly = rho * anomaly + innov * normal(temp_rng);
    }
    const double temp = cfg.temp.mean + cfg.temp.amplitude * wave + anomaly;

    if (k > 0) {
      const double tau_eff = effective_tau(cfg.tau_minutes, temp, cfg.temp.mean, cfg.temp_coupling);
      m = moisture_step(m, dt_min, tau_eff);
    }
    while (static_cast<double>(sec) >= next_water) {
      m = 1.0;
      out.waterings.push_back(ts);
      next_water += gap(water_rng);
    }

    const bool stressed = m < cfg.stress_threshold;
    if (k % env_every == 0) {
      EnvRecord e;
      e.timestamp = ts;
      e.temp_c = temp;
      e.rh_pct = std::clamp(cycle_value(cfg.rh, -wave, normal, env_rng) + cfg.rh_moisture_coupling * (m - 0.5),
                            0.0, 100.0);
      e.light = std::max(0.0, cycle_value(cfg.light, wave, normal, env_rng));
      e.voc_ppb = std::max(0.0, cycle_value(cfg.voc, wave, normal, env_rng));
      e.co2_ppm = std::max(0.0, cycle_value(cfg.co2, -wave, normal, env_rng));
      e.pm25_ugm3 = std::max(0.0, cycle_value(cfg.pm25, wave, normal, env_rng));
      out.env.push_back(e);
      out.stress.push_back({ts, m, stressed});
    }

    const double g_clean = cfg.g_base * (0.7 + 0.3 * m);
    PhenotypeRecord p;
    p.timestamp = ts;
    p.object_id = 0;
    p.mean_g = clamp255(g_clean + cfg.g_noise_sd * normal(pheno_rng));
    p.mean_r = clamp255(90.0 - cfg.rb_coupling * (g_clean - g_ref) + cfg.rb_noise_sd * normal(pheno_rng));
    p.mean_b = clamp255(60.0 - cfg.rb_coupling * (g_clean - g_ref) + cfg.rb_noise_sd * normal(pheno_rng));

    const double t_days = static_cast<double>(sec) / 86400.0;
    const double logistic = 1.0 / (1.0 + std::exp(-(t_days - cfg.area_midpoint_days) / cfg.area_scale_days));
    double area = cfg.area_max * (cfg.area_initial_fraction + (1.0 - cfg.area_initial_fraction) * logistic);
    if (stressed) area *= 0.98;
    p.mask_area = std::max<std::int64_t>(1, std::llround(area));
    // Bounding box: fill factor 0.6, canopy gets wider than tall as it grows.
    const double aspect = 1.3 - 0.4 * logistic;  // height / width
    const double box = static_cast<double>(p.mask_area) / 0.6;
    p.mask_height = std::max<std::int64_t>(1, std::llround(std::sqrt(box * aspect)));
    const double h = static_cast<double>(p.mask_height);
    p.mask_width = static_cast<std::int64_t>(std::max(std::ceil(static_cast<double>(p.mask_area) / h), std::round(box / h)));
    p.area_to_height = static_cast<double>(p.mask_area) / static_cast<double>(p.mask_height);
    p.height_to_width = static_cast<double>(p.mask_height) / static_cast<double>(p.mask_width);
    out.pheno.push_back(p);
    out.moisture.push_back(m);
    out.g_clean.push_back(g_clean);
  }
  return out;
}

std::string format_stress_csv(const std::vector<StressRow>& rows) {
  std::ostringstream out;
  out << "timestamp,moisture,stressed\n";
  for (const StressRow& r : rows) {
    out << format_iso8601(r.timestamp) << ',' << csv::format_fixed(r.moisture, 6) << ',' << (r.stressed ? 1 : 0)
        << '\n';
  }
  return out.str();
}

void write_tent(const TentSimResult& sim, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::IoFailure, "cannot create " + dir.string() + ": " + ec.message());
  write_env_csv(sim.env, dir / "env.csv");
  write_pheno_csv(sim.pheno, dir / "pheno.csv");
  csv::write_atomic(dir / "stress.csv", format_stress_csv(sim.stress));
}

std::vector<double> generate_ar1(double phi, double sigma, double x0, std::size_t length, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> x(length);
  if (length == 0) return x;
  x[0] = x0;
  for (std::size_t t = 1; t < length; ++t) x[t] = phi * x[t - 1] + sigma * normal(rng);
  return x;
}

void zscore(std::vector<double>& v) {
  if (v.empty()) return;
  const double n = static_cast<double>(v.size());
  const double mean = std::accumulate(v.begin(), v.end(), 0.0) / n;
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  const double sd = std::sqrt(ss / n);
  for (double& x : v) x = sd > 0.0 ? (x - mean) / sd : 0.0;
}

std::vector<CorpusSeries> pretrain_corpus(std::uint64_t seed, const CorpusConfig& cfg) {
  if (cfg.n_series < 1) throw Error(ErrorCode::UsageError, "corpus needs at least one series");
  std::vector<CorpusSeries> out;
  out.reserve(cfg.n_series);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (std::size_t s = 0; s < cfg.n_series; ++s) {
    Rng rng = make_rng(seed, s);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const std::size_t len = cfg.length;

    // Covariates first: persistent AR(1) processes, some of which push the target.
    std::vector<std::vector<double>> cov(cfg.n_covariates);
    std::vector<double> drive(len, 0.0);
    for (auto& c : cov) {
      const double phi = 0.9 + 0.09 * unit(rng);
      c = generate_ar1(phi, std::sqrt(1.0 - phi * phi), normal(rng), len, rng);
      if (unit(rng) < cfg.driver_fraction) {
        const double beta = cfg.driver_strength * (unit(rng) < 0.5 ? -1.0 : 1.0) * (0.5 + unit(rng));
        for (std::size_t t = 0; t < len; ++t) drive[t] += beta * c[t];
      }
    }

    CorpusSeries cs;
    cs.kind = static_cast<CorpusKind>(s % 4);
    std::vector<double> x(len, 0.0);
    const double noise = 0.05 + 0.25 * unit(rng);
    switch (cs.kind) {
      case CorpusKind::Ar1: {
        const double phi = 0.5 + 0.45 * unit(rng);
        for (std::size_t t = 1; t < len; ++t) x[t] = phi * x[t - 1] + drive[t - 1] + normal(rng);
        break;
      }
      case CorpusKind::SineTrend: {
        const double period = 12.0 + 100.0 * unit(rng);
        const double phase = kTwoPi * unit(rng);
        const double trend = (unit(rng) - 0.5) * 4.0 / static_cast<double>(len);
        double level = 0.0;
        for (std::size_t t = 0; t < len; ++t) {
          if (t > 0) level = 0.9 * level + drive[t - 1];
          x[t] = std::sin(kTwoPi * static_cast<double>(t) / period + phase) + trend * static_cast<double>(t) +
                 level + noise * normal(rng);
        }
        break;
      }
      case CorpusKind::StepChange: {
        double level = normal(rng), carry = 0.0;
        const double rate = 1.0 / (50.0 + 150.0 * unit(rng));
        for (std::size_t t = 0; t < len; ++t) {
          if (unit(rng) < rate) level = normal(rng) * 1.5;
          if (t > 0) carry = 0.9 * carry + drive[t - 1];
          x[t] = level + carry + noise * normal(rng);
        }
        break;
      }
      case CorpusKind::DampedOscillation: {
        const double r = 0.85 + 0.13 * unit(rng);
        const double theta = kTwoPi / (6.0 + 40.0 * unit(rng));
        const double a1 = 2.0 * r * std::cos(theta), a2 = -r * r;
        x[0] = normal(rng);
        for (std::size_t t = 1; t < len; ++t) {
          const double prev2 = t >= 2 ? x[t - 2] : 0.0;
          x[t] = a1 * x[t - 1] + a2 * prev2 + drive[t - 1] + 0.3 * normal(rng);
        }
        break;
      }
    }
    zscore(x);
    for (auto& c : cov) zscore(c);
    cs.data.target = std::move(x);
    cs.data.covariates = std::move(cov);
    out.push_back(std::move(cs));
  }
  return out;
}

}  // namespace plantcast
