#include "rftlab/trainloop.hpp"

#include <cmath>
#include <stdexcept>

#include "rftlab/kernels.hpp"
#include "rftlab/tape.hpp"

namespace rftlab::train {

ModelGrads zeros_like(const models::ModelState& state) {
  ModelGrads g;
  for (const models::Layer& l : state.backbone) {
    g.backbone.push_back({Tensor(l.w.shape()), Tensor(l.b.shape())});
  }
  g.head = {Tensor(state.head.w.shape()), Tensor(state.head.b.shape())};
  return g;
}

long steps_per_epoch(std::size_t train_size, std::size_t batch_size) {
  return static_cast<long>((train_size + batch_size - 1) / batch_size);
}

// ===========================================================================
// Optimizer
// ===========================================================================

Optimizer::Optimizer(OptimizerConfig cfg, const models::ModelState& state, long total_steps,
                     int warmup_epochs_to_steps_hint)
    : cfg_(cfg),
      moment1_(zeros_like(state)),
      moment2_(zeros_like(state)),
      total_steps_(total_steps > 0 ? total_steps : 1) {
  cfg_.validate();
  warmup_steps_ = static_cast<long>(cfg_.warmup_epochs) * warmup_epochs_to_steps_hint;
  if (warmup_steps_ >= total_steps_) warmup_steps_ = 0;
}

void Optimizer::update_tensor(Tensor& p, Tensor& m1, Tensor& m2, const Tensor& g, double lr) {
  if (!g.all_finite()) throw std::runtime_error("optimizer: non-finite gradient, aborting run");
  if (cfg_.kind == OptimizerConfig::Kind::AdamLike) {
    const double t = static_cast<double>(step_index_ + 1);
    const double bias_c1 = 1.0 - std::pow(cfg_.beta1, t);
    const double bias_c2 = 1.0 - std::pow(cfg_.beta2, t);
    kernels::adamw_update(p.data(), m1.data(), m2.data(), g.data(), p.numel(), lr, cfg_.beta1,
                          cfg_.beta2, cfg_.adam_eps, cfg_.weight_decay, bias_c1, bias_c2);
  } else {
    kernels::sgd_momentum_update(p.data(), m1.data(), g.data(), p.numel(), lr, cfg_.momentum,
                                 cfg_.weight_decay);
  }
}

void Optimizer::step(models::ModelState& state, const ModelGrads& grads) {
  const double lr = scheduled_lr(cfg_, step_index_, total_steps_, warmup_steps_);
  last_lr_ = lr;
  for (std::size_t i = 0; i < state.backbone.size(); ++i) {
    update_tensor(state.backbone[i].w, moment1_.backbone[i].w, moment2_.backbone[i].w,
                  grads.backbone[i].w, lr);
    update_tensor(state.backbone[i].b, moment1_.backbone[i].b, moment2_.backbone[i].b,
                  grads.backbone[i].b, lr);
  }
  update_tensor(state.head.w, moment1_.head.w, moment2_.head.w, grads.head.w, lr);
  update_tensor(state.head.b, moment1_.head.b, moment2_.head.b, grads.head.b, lr);
  ++step_index_;
}

// ===========================================================================
// Epoch loop
// ===========================================================================

namespace {

struct Batch {
  Tensor x;
  std::vector<int> y;
};

Batch slice_batch(const tasks::Dataset& data, const std::vector<std::size_t>& order,
                  std::size_t begin, std::size_t end) {
  std::vector<std::size_t> rows(order.begin() + begin, order.begin() + end);
  Batch b;
  b.x = gather_rows(data.x, rows);
  b.y.reserve(rows.size());
  for (std::size_t r : rows) b.y.push_back(data.y[r]);
  return b;
}

ModelGrads collect_grads(const Tape& tape, const models::TapedForward& tf) {
  ModelGrads g;
  for (const auto& [w, b] : tf.backbone) {
    g.backbone.push_back({tape.grad(w), tape.grad(b)});
  }
  g.head = {tape.grad(tf.head.first), tape.grad(tf.head.second)};
  return g;
}

}  // namespace

double train_epoch(models::ModelState& state, const tasks::Dataset& data, double eps_t,
                   const attacks::AttackConfig& attack_cfg, Optimizer& opt, Rng& shuffle_rng,
                   TrainStats* stats) {
  if (eps_t < 0.0) throw std::invalid_argument("train_epoch: eps_t must be >= 0");
  const std::size_t n = data.size();
  const std::size_t bs = opt.config().batch_size;
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  shuffle_rng.shuffle(order);

  double loss_sum = 0.0;
  std::size_t batches = 0;
  for (std::size_t begin = 0; begin < n; begin += bs) {
    const std::size_t end = begin + bs < n ? begin + bs : n;
    Batch batch = slice_batch(data, order, begin, end);

    Tensor x_train = batch.x;
    if (eps_t > 0.0) {
      attacks::AttackConfig cfg = attack_cfg;
      cfg.epsilon = eps_t;
      cfg.step_size = 0.0;  // default 2*eps/steps at the current strength
      cfg.seed = derive_seed(attack_cfg.seed, kSeedAttack,
                             static_cast<std::uint64_t>(opt.steps_taken()));
      x_train = attacks::pgd(state, batch.x, batch.y, cfg);
      if (stats) ++stats->attack_invocations;
    }

    Tape tape;
    models::TapedForward tf = models::forward_on_tape(tape, state, x_train);
    NodeId loss = tape.softmax_cross_entropy(tf.logits, batch.y);
    const double loss_value = tape.value(loss)[0];
    if (!std::isfinite(loss_value)) {
      throw std::runtime_error("train_epoch: non-finite loss, aborting run");
    }
    tape.backward(loss);
    ModelGrads grads = collect_grads(tape, tf);
    opt.step(state, grads);

    loss_sum += loss_value;
    ++batches;
  }
  return loss_sum / static_cast<double>(batches);
}

// ===========================================================================
// Robust fine-tuning
// ===========================================================================

namespace {

double mean_xent(const models::ModelState& state, const Tensor& x, const std::vector<int>& y) {
  return ops::softmax_cross_entropy(models::forward(state, x), y).loss;
}

double clean_accuracy(const models::ModelState& state, const tasks::Dataset& ds) {
  return models::accuracy(state, ds.x, ds.y);
}

}  // namespace

RunResult run_rft(const models::ModelState& initial_state, const tasks::TaskData& task,
                  const schedule::ScheduleSpec& sched, const attacks::AttackConfig& attack_cfg,
                  const OptimizerConfig& optimizer_cfg, std::uint64_t seed,
                  const RunOptions& options) {
  sched.validate();
  optimizer_cfg.validate();

  RunResult result;
  result.state = initial_state;

  const int total_epochs = sched.total_epochs;
  const long spe = steps_per_epoch(task.train.size(), optimizer_cfg.batch_size);
  Optimizer opt(optimizer_cfg, result.state, spe * total_epochs, static_cast<int>(spe));
  Rng shuffle_rng(derive_seed(seed, kSeedShuffle));

  attacks::AttackConfig train_attack = attack_cfg;
  train_attack.seed = seed;

  for (int t = 0; t < total_epochs; ++t) {
    const double eps_t = schedule::epsilon_at(sched, t);
    EpochTrace row;
    row.epoch = t;
    row.train_eps = eps_t;
    try {
      row.train_loss =
          train_epoch(result.state, task.train, eps_t, train_attack, opt, shuffle_rng,
                      &result.stats);
    } catch (const std::runtime_error& err) {
      result.aborted = true;
      result.abort_reason = err.what();
      break;
    }

    const bool eval_now = options.eval_every <= 1 || t % options.eval_every == 0 ||
                          t == total_epochs - 1;
    if (!eval_now && !result.trace.empty()) {
      // Carry the last evaluation forward on skipped epochs.
      const EpochTrace& prev = result.trace.back();
      row.val_clean_acc = prev.val_clean_acc;
      row.val_adv_acc_at_goal = prev.val_adv_acc_at_goal;
      row.val_clean_loss = prev.val_clean_loss;
      row.val_adv_loss = prev.val_adv_loss;
    }
    if (eval_now) {
      row.val_clean_acc = clean_accuracy(result.state, task.val);
      row.val_clean_loss = mean_xent(result.state, task.val.x, task.val.y);
      if (sched.eps_goal > 0.0) {
        attacks::AttackConfig eval_cfg = attack_cfg;
        eval_cfg.epsilon = sched.eps_goal;
        eval_cfg.steps = options.eval_steps;
        eval_cfg.step_size = 0.0;
        eval_cfg.seed = derive_seed(seed, kSeedEval, static_cast<std::uint64_t>(t));
        Tensor x_adv = attacks::pgd(result.state, task.val.x, task.val.y, eval_cfg);
        row.val_adv_acc_at_goal = models::accuracy(result.state, x_adv, task.val.y);
        row.val_adv_loss = mean_xent(result.state, x_adv, task.val.y);
      } else {
        row.val_adv_acc_at_goal = row.val_clean_acc;
        row.val_adv_loss = row.val_clean_loss;
      }
    }
    result.trace.push_back(row);
  }
  return result;
}

}  // namespace rftlab::train
