#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "plantcast/graph.hpp"

namespace plantcast {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 1e-4;  // L2 term folded into the gradient
};

struct AdamState {
  nn::ParamMap m;
  nn::ParamMap v;
};

// One bias-corrected Adam update at step t >= 1. Every parameter needs a
// gradient of the same shape, else ShapeMismatch.
void adam_step(nn::ParamMap& params, const nn::ParamMap& grads, AdamState& state, std::size_t t, double lr,
               const AdamConfig& cfg);

// 0.5·lr0·(1 + cos(π·epoch/max_epochs))
double cosine_lr(std::size_t epoch, std::size_t max_epochs, double lr0);

// Patience-based stopping on a validation loss sequence. Epoch 0 is the
// initial evaluation; a later epoch improves only if it beats the best so far
// by at least min_delta.
class EarlyStopping {
 public:
  explicit EarlyStopping(std::size_t patience, double min_delta = 1e-6);

  // Returns true when this loss is a new best.
  bool observe(double val_loss);
  bool should_stop() const noexcept { return stale_ >= patience_; }
  std::size_t best_epoch() const noexcept { return best_epoch_; }
  double best_loss() const noexcept { return best_; }
  std::size_t epochs_seen() const noexcept { return seen_; }

 private:
  std::size_t patience_;
  double min_delta_;
  double best_ = 0.0;
  std::size_t best_epoch_ = 0;
  std::size_t stale_ = 0;
  std::size_t seen_ = 0;
};

}  // namespace plantcast
