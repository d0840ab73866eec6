#pragma once
// JSON run configuration. Sections mirror the C++ structs field by field;
// every key is optional and unknown keys are rejected.
//
//   {"model": {...ModelConfig...}, "train": {...}, "data": {...},
//    "forecast": {"n_samples": 100}, "pretrain": {...}}
//
// A document without a "model" key is read as a bare ModelConfig.

#include <cstdint>
#include <filesystem>
#include <string>

#include "plantcast/model.hpp"
#include "plantcast/synth.hpp"
#include "plantcast/train.hpp"

namespace plantcast {

struct DataConfig {
  std::int64_t grid_seconds = 60;
  std::size_t context_len = 64;
  std::size_t horizon = 24;
  std::size_t train_stride = 1;
  std::size_t eval_stride = 24;
};

struct ForecastConfig {
  std::size_t n_samples = 100;
};

struct PretrainConfig {
  std::uint64_t corpus_seed = 0;
  CorpusConfig corpus;
  std::size_t stride = 8;
};

struct RunConfig {
  ModelConfig model;
  TrainConfig train;
  DataConfig data;
  ForecastConfig forecast;
  PretrainConfig pretrain;
};

// Throws ParseError naming the offending key.
RunConfig parse_config(const std::string& json_text);
RunConfig load_config(const std::filesystem::path& path);
std::string config_to_json(const RunConfig& cfg);

std::string_view loss_mode_name(LossMode m) noexcept;

}  // namespace plantcast
