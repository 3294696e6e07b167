#pragma once

#include <cstddef>
#include <string>

namespace rftlab::train {

struct OptimizerConfig {
  enum class Kind { SgdMomentum, AdamLike };

  Kind kind = Kind::AdamLike;
  double learning_rate = 1e-3;
  double weight_decay = 0.0;
  double momentum = 0.9;   // sgd_momentum
  double beta1 = 0.9;      // adam_like
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  bool cosine_schedule = true;
  int warmup_epochs = 0;
  std::size_t batch_size = 64;

  void validate() const;
};

/// Learning rate at optimizer step `step` of `total_steps`: linear warmup to
/// the peak, then cosine decay reaching exactly zero at the last step.
double scheduled_lr(const OptimizerConfig& cfg, long step, long total_steps, long warmup_steps);

const char* optimizer_kind_name(OptimizerConfig::Kind k);
OptimizerConfig::Kind optimizer_kind_from_name(const std::string& name);

}  // namespace rftlab::train
