#include "plantcast/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "plantcast/error.hpp"

namespace plantcast {

using nlohmann::json;

namespace {

[[noreturn]] void bad(const std::string& where, const std::string& what) {
  throw Error(ErrorCode::ParseError, "config " + where + ": " + what);
}

void only_keys(const json& j, const std::string& where, std::initializer_list<const char*> keys) {
  if (!j.is_object()) bad(where, "expected an object");
  std::set<std::string> allowed(keys.begin(), keys.end());
  for (const auto& [k, _] : j.items()) {
    if (!allowed.contains(k)) bad(where, "unknown key '" + k + "'");
  }
}

template <typename T>
void read(const json& j, const std::string& where, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    if constexpr (std::is_unsigned_v<T>) {
      const auto v = j.at(key).get<std::int64_t>();
      if (v < 0) bad(where + "." + key, "must be >= 0");
      out = static_cast<T>(v);
    } else {
      out = j.at(key).get<T>();
    }
  } catch (const json::exception& e) {
    bad(where + "." + key, e.what());
  }
}

void read_model(const json& j, ModelConfig& m) {
  const std::string w = "model";
  only_keys(j, w, {"lag_set", "d_model", "n_heads", "M", "dropout_p", "n_covariates", "loss_mode", "rope_base",
                   "positional_encoding"});
  if (j.contains("lag_set")) {
    try {
      m.lag_set.lags = j.at("lag_set").get<std::vector<std::size_t>>();
    } catch (const json::exception& e) {
      bad(w + ".lag_set", e.what());
    }
  }
  read(j, w, "d_model", m.d_model);
  read(j, w, "n_heads", m.n_heads);
  read(j, w, "M", m.M);
  read(j, w, "dropout_p", m.dropout_p);
  read(j, w, "n_covariates", m.n_covariates);
  read(j, w, "rope_base", m.rope_base);
  if (j.contains("loss_mode")) {
    std::string s;
    read(j, w, "loss_mode", s);
    if (s == "student_t_nll") m.loss_mode = LossMode::StudentTNll;
    else if (s == "mse_on_mean") m.loss_mode = LossMode::MseOnMean;
    else bad(w + ".loss_mode", "expected student_t_nll or mse_on_mean, got '" + s + "'");
  }
  if (j.contains("positional_encoding")) {
    std::string s;
    read(j, w, "positional_encoding", s);
    if (s == "rotary") m.positional_encoding = PositionalEncoding::Rotary;
    else if (s == "sinusoidal") m.positional_encoding = PositionalEncoding::Sinusoidal;
    else bad(w + ".positional_encoding", "expected rotary or sinusoidal, got '" + s + "'");
  }
}

void read_train(const json& j, TrainConfig& t) {
  const std::string w = "train";
  only_keys(j, w, {"lr0", "beta1", "beta2", "adam_eps", "weight_decay", "max_epochs", "patience", "batch_size",
                   "seed", "max_sequences_per_epoch"});
  read(j, w, "lr0", t.lr0);
  read(j, w, "beta1", t.adam.beta1);
  read(j, w, "beta2", t.adam.beta2);
  read(j, w, "adam_eps", t.adam.eps);
  read(j, w, "weight_decay", t.adam.weight_decay);
  read(j, w, "max_epochs", t.max_epochs);
  read(j, w, "patience", t.patience);
  read(j, w, "batch_size", t.batch_size);
  read(j, w, "seed", t.seed);
  read(j, w, "max_sequences_per_epoch", t.max_sequences_per_epoch);
  if (t.patience < 1) bad(w + ".patience", "must be >= 1");
  if (t.lr0 <= 0.0) bad(w + ".lr0", "must be > 0");
  if (t.batch_size < 1) bad(w + ".batch_size", "must be >= 1");
}

void read_data(const json& j, DataConfig& d) {
  const std::string w = "data";
  only_keys(j, w, {"grid_seconds", "context_len", "horizon", "train_stride", "eval_stride"});
  read(j, w, "grid_seconds", d.grid_seconds);
  read(j, w, "context_len", d.context_len);
  read(j, w, "horizon", d.horizon);
  read(j, w, "train_stride", d.train_stride);
  read(j, w, "eval_stride", d.eval_stride);
  if (d.grid_seconds <= 0) bad(w + ".grid_seconds", "must be > 0");
  if (d.context_len < 1 || d.horizon < 1 || d.train_stride < 1 || d.eval_stride < 1) {
    bad(w, "context_len, horizon and strides must be >= 1");
  }
}

void read_pretrain(const json& j, PretrainConfig& p) {
  const std::string w = "pretrain";
  only_keys(j, w, {"corpus_seed", "n_series", "length", "driver_fraction", "driver_strength", "stride"});
  read(j, w, "corpus_seed", p.corpus_seed);
  read(j, w, "n_series", p.corpus.n_series);
  read(j, w, "length", p.corpus.length);
  read(j, w, "driver_fraction", p.corpus.driver_fraction);
  read(j, w, "driver_strength", p.corpus.driver_strength);
  read(j, w, "stride", p.stride);
  if (p.stride < 1) bad(w + ".stride", "must be >= 1");
}

}  // namespace

std::string_view loss_mode_name(LossMode m) noexcept {
  return m == LossMode::StudentTNll ? "student_t_nll" : "mse_on_mean";
}

RunConfig parse_config(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::ParseError, std::string("config is not valid JSON: ") + e.what());
  }
  RunConfig cfg;
  if (!j.is_object()) bad("root", "expected an object");
  if (!j.contains("model")) {
    read_model(j, cfg.model);
  } else {
    only_keys(j, "root", {"model", "train", "data", "forecast", "pretrain"});
    read_model(j.at("model"), cfg.model);
    if (j.contains("train")) read_train(j.at("train"), cfg.train);
    if (j.contains("data")) read_data(j.at("data"), cfg.data);
    if (j.contains("forecast")) {
      only_keys(j.at("forecast"), "forecast", {"n_samples"});
      read(j.at("forecast"), "forecast", "n_samples", cfg.forecast.n_samples);
      if (cfg.forecast.n_samples < 2) bad("forecast.n_samples", "must be >= 2");
    }
    if (j.contains("pretrain")) read_pretrain(j.at("pretrain"), cfg.pretrain);
  }
  cfg.train.loss_mode = cfg.model.loss_mode;
  try {
    cfg.model.validate();
  } catch (const Error& e) {
    bad("model", e.what());
  }
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoFailure, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  try {
    return parse_config(ss.str());
  } catch (const Error& e) {
    throw Error(e.code(), path.string() + ": " + e.what());
  }
}

std::string config_to_json(const RunConfig& c) {
  json j;
  j["model"] = {{"lag_set", c.model.lag_set.lags},
                {"d_model", c.model.d_model},
                {"n_heads", c.model.n_heads},
                {"M", c.model.M},
                {"dropout_p", c.model.dropout_p},
                {"n_covariates", c.model.n_covariates},
                {"loss_mode", std::string(loss_mode_name(c.model.loss_mode))},
                {"rope_base", c.model.rope_base},
                {"positional_encoding",
                 c.model.positional_encoding == PositionalEncoding::Rotary ? "rotary" : "sinusoidal"}};
  j["train"] = {{"lr0", c.train.lr0},
                {"beta1", c.train.adam.beta1},
                {"beta2", c.train.adam.beta2},
                {"adam_eps", c.train.adam.eps},
                {"weight_decay", c.train.adam.weight_decay},
                {"max_epochs", c.train.max_epochs},
                {"patience", c.train.patience},
                {"batch_size", c.train.batch_size},
                {"seed", c.train.seed},
                {"max_sequences_per_epoch", c.train.max_sequences_per_epoch}};
  j["data"] = {{"grid_seconds", c.data.grid_seconds},
               {"context_len", c.data.context_len},
               {"horizon", c.data.horizon},
               {"train_stride", c.data.train_stride},
               {"eval_stride", c.data.eval_stride}};
  j["forecast"] = {{"n_samples", c.forecast.n_samples}};
  j["pretrain"] = {{"corpus_seed", c.pretrain.corpus_seed},
                   {"n_series", c.pretrain.corpus.n_series},
                   {"length", c.pretrain.corpus.length},
                   {"driver_fraction", c.pretrain.corpus.driver_fraction},
                   {"driver_strength", c.pretrain.corpus.driver_strength},
                   {"stride", c.pretrain.stride}};
  return j.dump(2) + "\n";
}

}  // namespace plantcast
