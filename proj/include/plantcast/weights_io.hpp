#pragma once
// LLW1 weight files: "LLW1", u32 tensor count, then per tensor u16 name
// length, name bytes, u8 rank, rank × u32 dims and f32 values, all
// little-endian. Tensors are written in name order.

#include <filesystem>
#include <vector>

#include "plantcast/model.hpp"

namespace plantcast {

std::vector<unsigned char> encode_llw(const nn::ParamMap& tensors);
nn::ParamMap decode_llw(const std::vector<unsigned char>& bytes);

void write_llw(const nn::ParamMap& tensors, const std::filesystem::path& path);
nn::ParamMap read_llw(const std::filesystem::path& path);

// A model file carries its config as two extra tensors, "meta.lags" and
// "meta.config", so forecasting needs nothing but the file.
void save_model(const ModelConfig& cfg, const Weights& w, const std::filesystem::path& path);
std::pair<ModelConfig, Weights> load_model(const std::filesystem::path& path);

// Rounds every value through f32, matching what a save/load cycle yields.
Weights quantize_f32(const Weights& w);

}  // namespace plantcast
