#include "rftlab/optimizer.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace rftlab::train {

void OptimizerConfig::validate() const {
  if (!(learning_rate > 0.0)) throw std::invalid_argument("optimizer: learning_rate must be > 0");
  if (weight_decay < 0.0) throw std::invalid_argument("optimizer: weight_decay must be >= 0");
  if (momentum < 0.0 || momentum >= 1.0) throw std::invalid_argument("optimizer: momentum in [0,1)");
  if (beta1 < 0.0 || beta1 >= 1.0) throw std::invalid_argument("optimizer: beta1 in [0,1)");
  if (beta2 < 0.0 || beta2 >= 1.0) throw std::invalid_argument("optimizer: beta2 in [0,1)");
  if (warmup_epochs < 0) throw std::invalid_argument("optimizer: warmup_epochs must be >= 0");
  if (batch_size == 0) throw std::invalid_argument("optimizer: batch_size must be positive");
}

double scheduled_lr(const OptimizerConfig& cfg, long step, long total_steps, long warmup_steps) {
  if (step < 0 || total_steps <= 0) throw std::invalid_argument("scheduled_lr: bad step range");
  if (!cfg.cosine_schedule) return cfg.learning_rate;
  if (warmup_steps > 0 && step < warmup_steps) {
    return cfg.learning_rate * static_cast<double>(step + 1) / static_cast<double>(warmup_steps);
  }
  const long span = total_steps - 1 - warmup_steps;
  if (span <= 0) return cfg.learning_rate;
  const double progress = static_cast<double>(step - warmup_steps) / static_cast<double>(span);
  return cfg.learning_rate * 0.5 * (1.0 + std::cos(3.14159265358979323846 * progress));
}

const char* optimizer_kind_name(OptimizerConfig::Kind k) {
  return k == OptimizerConfig::Kind::AdamLike ? "adam_like" : "sgd_momentum";
}

OptimizerConfig::Kind optimizer_kind_from_name(const std::string& name) {
  if (name == "adam_like") return OptimizerConfig::Kind::AdamLike;
  if (name == "sgd_momentum") return OptimizerConfig::Kind::SgdMomentum;
  throw std::invalid_argument("unknown optimizer kind '" + name + "'");
}

}  // namespace rftlab::train
