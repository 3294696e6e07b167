#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "rftlab/attacks.hpp"
#include "rftlab/models.hpp"
#include "rftlab/optimizer.hpp"
#include "rftlab/rng.hpp"
#include "rftlab/schedule.hpp"
#include "rftlab/tasks.hpp"

namespace rftlab::train {

/// Gradients mirroring the ModelState parameter layout.
struct ModelGrads {
  std::vector<models::Layer> backbone;
  models::Layer head;
};

ModelGrads zeros_like(const models::ModelState& state);

long steps_per_epoch(std::size_t train_size, std::size_t batch_size);

/// Stateful optimizer: holds moment buffers and the step counter driving the
/// warmup + cosine learning-rate schedule. Throws on non-finite gradients.
class Optimizer {
 public:
  Optimizer(OptimizerConfig cfg, const models::ModelState& state, long total_steps,
            int warmup_epochs_to_steps_hint);

  void step(models::ModelState& state, const ModelGrads& grads);

  double last_lr() const { return last_lr_; }
  long steps_taken() const { return step_index_; }
  const OptimizerConfig& config() const { return cfg_; }

 private:
  void update_tensor(Tensor& p, Tensor& m1, Tensor& m2, const Tensor& g, double lr);

  OptimizerConfig cfg_;
  ModelGrads moment1_;  // sgd velocity or adam first moment
  ModelGrads moment2_;  // adam second moment
  long step_index_ = 0;
  long total_steps_ = 1;
  long warmup_steps_ = 0;
  double last_lr_ = 0.0;
};

/// One training epoch: per batch, craft adversarial inputs at eps_t (skipped
/// entirely when eps_t == 0) and take one optimizer step on the cross-entropy
/// of the perturbed batch. Returns the mean training loss.
struct TrainStats {
  std::size_t attack_invocations = 0;
};

double train_epoch(models::ModelState& state, const tasks::Dataset& data, double eps_t,
                   const attacks::AttackConfig& attack_cfg, Optimizer& opt, Rng& shuffle_rng,
                   TrainStats* stats);

/// Per-epoch diagnostics recorded during robust fine-tuning.
struct EpochTrace {
  int epoch = 0;
  double train_eps = 0.0;
  double train_loss = 0.0;
  double val_clean_acc = 0.0;
  double val_adv_acc_at_goal = 0.0;
  double val_clean_loss = 0.0;
  double val_adv_loss = 0.0;
};

struct RunOptions {
  int eval_every = 1;   // validation cadence in epochs (last epoch always runs)
  int eval_steps = 10;  // PGD steps for per-epoch validation at eps_goal
};

struct RunResult {
  models::ModelState state;
  std::vector<EpochTrace> trace;
  bool aborted = false;
  std::string abort_reason;
  TrainStats stats;
};

/// Robust fine-tuning: epochs t = 0..T-1 train at eps(t) from the schedule;
/// validation clean and adversarial accuracy at eps_goal are recorded each
/// epoch. `state` must arrive with a freshly initialized head (reinit_head).
/// A non-finite loss or gradient aborts the run, returning the partial trace.
RunResult run_rft(const models::ModelState& state, const tasks::TaskData& task,
                  const schedule::ScheduleSpec& sched, const attacks::AttackConfig& attack_cfg,
                  const OptimizerConfig& optimizer_cfg, std::uint64_t seed,
                  const RunOptions& options = RunOptions{});

}  // namespace rftlab::train
