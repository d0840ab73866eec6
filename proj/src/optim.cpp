#include "plantcast/optim.hpp"

#include <cmath>
#include <numbers>

#include "plantcast/error.hpp"

namespace plantcast {

void adam_step(nn::ParamMap& params, const nn::ParamMap& grads, AdamState& state, std::size_t t, double lr,
               const AdamConfig& cfg) {
  if (t < 1) throw Error(ErrorCode::UsageError, "adam step index starts at 1");
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(t));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(t));
  for (auto& [name, p] : params) {
    const auto git = grads.find(name);
    if (git == grads.end() || !git->second.same_shape(p)) {
      throw Error(ErrorCode::ShapeMismatch, "gradient for '" + name + "' is missing or mis-shaped");
    }
    auto [mit, m_new] = state.m.try_emplace(name, p.shape(), 0.0);
    auto [vit, v_new] = state.v.try_emplace(name, p.shape(), 0.0);
    (void)m_new;
    (void)v_new;
    auto pv = p.values();
    auto gv = git->second.values();
    auto mv = mit->second.values();
    auto vv = vit->second.values();
    for (std::size_t i = 0; i < pv.size(); ++i) {
      const double g = gv[i] + cfg.weight_decay * pv[i];
      mv[i] = cfg.beta1 * mv[i] + (1.0 - cfg.beta1) * g;
      vv[i] = cfg.beta2 * vv[i] + (1.0 - cfg.beta2) * g * g;
      const double mhat = mv[i] / bc1;
      const double vhat = vv[i] / bc2;
      pv[i] -= lr * mhat / (std::sqrt(vhat) + cfg.eps);
    }
  }
}

double cosine_lr(std::size_t epoch, std::size_t max_epochs, double lr0) {
  if (max_epochs == 0) return lr0;
  if (epoch >= max_epochs) return 0.0;
  return 0.5 * lr0 * (1.0 + std::cos(std::numbers::pi * static_cast<double>(epoch) / static_cast<double>(max_epochs)));
}

EarlyStopping::EarlyStopping(std::size_t patience, double min_delta) : patience_(patience), min_delta_(min_delta) {
  if (patience < 1) throw Error(ErrorCode::UsageError, "patience must be >= 1");
}

bool EarlyStopping::observe(double val_loss) {
  const std::size_t epoch = seen_++;
  if (epoch == 0 || val_loss <= best_ - min_delta_) {
    best_ = val_loss;
    best_epoch_ = epoch;
    stale_ = 0;
    return true;
  }
  ++stale_;
  return false;
}

}  // namespace plantcast
