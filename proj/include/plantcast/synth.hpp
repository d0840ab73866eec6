#pragma once
// Synthetic grow tent: daily environment cycles, Poisson watering, soil
// moisture decay sped up by heat, and a green-channel response to moisture.
// Also the generic multi-domain corpus used for pretraining.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "plantcast/fusion.hpp"
#include "plantcast/model.hpp"
#include "plantcast/rng.hpp"

namespace plantcast {

struct CycleConfig {
  double mean = 0.0;
  double amplitude = 0.0;
  double noise_sd = 0.0;
};

struct TentSimConfig {
  std::uint64_t seed = 0;
  std::size_t days = 30;
  std::int64_t step_seconds = 60;   // env cadence
  std::int64_t pheno_seconds = 10;  // camera cadence
  Timestamp start = from_seconds(1704067200);  // 2024-01-01T00:00:00Z

  double tau_minutes = 1440.0;
  double watering_per_day = 0.8;
  double stress_threshold = 0.3;
  double initial_moisture = 1.0;
  // tau_eff = tau / (1 + temp_coupling · max(0, T - mean T))
  double temp_coupling = 0.5;

  double g_base = 170.0;
  double g_noise_sd = 1.5;
  double rb_coupling = 0.15;  // r and b move against g by this fraction
  double rb_noise_sd = 1.0;

  double area_max = 40000.0;
  double area_midpoint_days = 10.0;
  double area_scale_days = 4.0;
  double area_initial_fraction = 0.15;

  CycleConfig temp{24.0, 3.0, 1.5};
  double temp_noise_minutes = 240.0;  // correlation time of the temperature anomaly
  CycleConfig rh{55.0, 8.0, 1.0};
  double rh_moisture_coupling = 10.0;  // %RH per unit moisture (evaporation)
  CycleConfig light{300.0, 250.0, 10.0};
  CycleConfig voc{120.0, 30.0, 8.0};
  CycleConfig co2{650.0, 80.0, 15.0};
  CycleConfig pm25{8.0, 3.0, 1.0};

  void validate() const;
};

struct StressRow {
  Timestamp timestamp{};
  double moisture = 0.0;
  bool stressed = false;
};

struct TentSimResult {
  std::vector<EnvRecord> env;
  std::vector<PhenotypeRecord> pheno;
  std::vector<StressRow> stress;     // env cadence
  std::vector<double> moisture;      // per phenotype row
  std::vector<double> g_clean;       // per phenotype row, before noise
  std::vector<Timestamp> waterings;
};

// Exact decay of moisture over dt minutes at effective time constant tau_eff.
double moisture_step(double m, double dt_minutes, double tau_eff_minutes) noexcept;
double effective_tau(double tau_minutes, double temp_c, double temp_mean, double coupling) noexcept;

TentSimResult simulate_tent(const TentSimConfig& cfg);

std::string format_stress_csv(const std::vector<StressRow>& rows);

// Writes env.csv, pheno.csv and stress.csv into `dir`.
void write_tent(const TentSimResult& sim, const std::filesystem::path& dir);

enum class CorpusKind { Ar1, SineTrend, StepChange, DampedOscillation };

struct CorpusConfig {
  std::size_t n_series = 64;
  std::size_t length = 600;
  std::size_t n_covariates = 0;
  // Probability that a covariate drives the target; the rest are noise.
  double driver_fraction = 0.5;
  double driver_strength = 0.3;
};

struct CorpusSeries {
  CorpusKind kind = CorpusKind::Ar1;
  SeriesData data;  // z-scored target and covariates
};

// x[t] = phi·x[t-1] + sigma·e[t], starting at x0.
std::vector<double> generate_ar1(double phi, double sigma, double x0, std::size_t length, Rng& rng);

// Population z-score in place; constant input becomes all zeros.
void zscore(std::vector<double>& v);

std::vector<CorpusSeries> pretrain_corpus(std::uint64_t seed, const CorpusConfig& cfg);

}  // namespace plantcast
