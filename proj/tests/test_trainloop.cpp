#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstring>

#include "rftlab/kernels.hpp"
#include "rftlab/metrics.hpp"
#include "rftlab/models.hpp"
#include "rftlab/rng.hpp"
#include "rftlab/tape.hpp"
#include "rftlab/tasks.hpp"
#include "rftlab/trainloop.hpp"

using namespace rftlab;
using models::ModelState;
using train::OptimizerConfig;

namespace {

tasks::TaskData toy_task(std::uint64_t seed = 3) {
  tasks::SyntheticTaskSpec spec;
  spec.input_dim = 8;
  spec.num_classes = 4;
  spec.class_separation = 0.10;
  spec.samples_per_class = 30;
  spec.noise_scale = 0.02;
  spec.seed = seed;
  return tasks::generate(spec);
}

models::ModelSpec toy_model_spec() {
  models::ModelSpec spec;
  spec.input_dim = 8;
  spec.hidden_dims = {12, 8};
  spec.repr_dim = 8;
  spec.num_classes = 4;
  return spec;
}

bool states_equal(const ModelState& a, const ModelState& b) {
  auto eq = [](const Tensor& x, const Tensor& y) {
    return x.same_shape(y) && std::memcmp(x.data(), y.data(), x.numel() * sizeof(double)) == 0;
  };
  for (std::size_t i = 0; i < a.backbone.size(); ++i) {
    if (!eq(a.backbone[i].w, b.backbone[i].w) || !eq(a.backbone[i].b, b.backbone[i].b)) {
      return false;
    }
  }
  return eq(a.head.w, b.head.w) && eq(a.head.b, b.head.b);
}

}  // namespace

// ---------------------------------------------------------------------------
// Optimizer update rules
// ---------------------------------------------------------------------------

TEST_CASE("zero gradients leave parameters unchanged when weight decay is off") {
  ModelState state = models::init_random(toy_model_spec(), 4);
  ModelState before = state;
  train::ModelGrads grads = train::zeros_like(state);

  for (OptimizerConfig::Kind kind :
       {OptimizerConfig::Kind::AdamLike, OptimizerConfig::Kind::SgdMomentum}) {
    OptimizerConfig cfg;
    cfg.kind = kind;
    cfg.weight_decay = 0.0;
    cfg.cosine_schedule = false;
    train::Optimizer opt(cfg, state, 10, 1);
    ModelState working = state;
    for (int i = 0; i < 5; ++i) opt.step(working, grads);
    CHECK(states_equal(working, before));
  }
}

TEST_CASE("sgd converges to the minimum of a 1-D quadratic") {
  // f(p) = 0.5 (p - 2)^2, gradient p - 2; closed-form minimum at 2.
  double p = 5.0, vel = 0.0;
  for (int i = 0; i < 300; ++i) {
    const double g = p - 2.0;
    kernels::sgd_momentum_update(&p, &vel, &g, 1, 0.1, 0.0, 0.0);
  }
  CHECK(std::abs(p - 2.0) < 1e-6);

  // Same with momentum.
  p = 5.0;
  vel = 0.0;
  for (int i = 0; i < 300; ++i) {
    const double g = p - 2.0;
    kernels::sgd_momentum_update(&p, &vel, &g, 1, 0.05, 0.9, 0.0);
  }
  CHECK(std::abs(p - 2.0) < 1e-6);
}

TEST_CASE("adam-like update moves toward the quadratic minimum") {
  double p = 5.0, m = 0.0, v = 0.0;
  for (int i = 0; i < 2000; ++i) {
    const double g = p - 2.0;
    const double t = static_cast<double>(i + 1);
    kernels::adamw_update(&p, &m, &v, &g, 1, 0.05, 0.9, 0.999, 1e-8, 0.0,
                          1.0 - std::pow(0.9, t), 1.0 - std::pow(0.999, t));
  }
  CHECK(std::abs(p - 2.0) < 1e-4);
}

TEST_CASE("cosine learning rate: warmup ramp and near-zero endpoint") {
  OptimizerConfig cfg;
  cfg.learning_rate = 0.01;
  cfg.cosine_schedule = true;

  const long total = 500;
  const long warmup = 50;
  CHECK(train::scheduled_lr(cfg, 0, total, warmup) == doctest::Approx(0.01 / 50.0));
  CHECK(train::scheduled_lr(cfg, warmup, total, warmup) == doctest::Approx(0.01));
  CHECK(train::scheduled_lr(cfg, total - 1, total, warmup) <= 1e-8 * cfg.learning_rate);

  double prev = train::scheduled_lr(cfg, warmup, total, warmup);
  for (long s = warmup + 1; s < total; ++s) {
    const double lr = train::scheduled_lr(cfg, s, total, warmup);
    CHECK(lr <= prev + 1e-18);
    prev = lr;
  }

  cfg.cosine_schedule = false;
  CHECK(train::scheduled_lr(cfg, 123, total, warmup) == 0.01);
}

TEST_CASE("non-finite gradients abort the step") {
  ModelState state = models::init_random(toy_model_spec(), 4);
  train::ModelGrads grads = train::zeros_like(state);
  grads.head.w[0] = std::numeric_limits<double>::quiet_NaN();
  OptimizerConfig cfg;
  train::Optimizer opt(cfg, state, 10, 1);
  CHECK_THROWS_AS(opt.step(state, grads), std::runtime_error);
}

// ---------------------------------------------------------------------------
// train_epoch
// ---------------------------------------------------------------------------

TEST_CASE("eps 0 training reproduces an independent clean-training loop") {
  tasks::TaskData task = toy_task();
  ModelState state = models::init_random(toy_model_spec(), 10);

  OptimizerConfig cfg;
  cfg.kind = OptimizerConfig::Kind::AdamLike;
  cfg.learning_rate = 2e-3;
  cfg.weight_decay = 1e-4;
  cfg.cosine_schedule = false;
  cfg.batch_size = 32;

  // Implementation path.
  ModelState impl_state = state;
  train::Optimizer opt(cfg, impl_state, 100, 1);
  Rng shuffle_rng(derive_seed(99, kSeedShuffle));
  attacks::AttackConfig no_attack;
  for (int epoch = 0; epoch < 3; ++epoch) {
    train::train_epoch(impl_state, task.train, 0.0, no_attack, opt, shuffle_rng, nullptr);
  }

  // Reference loop written against the primitives directly.
  ModelState ref_state = state;
  std::vector<Tensor> m1, m2;
  auto add_moments = [&](const Tensor& t) {
    m1.push_back(Tensor(t.shape()));
    m2.push_back(Tensor(t.shape()));
  };
  for (const models::Layer& l : ref_state.backbone) {
    add_moments(l.w);
    add_moments(l.b);
  }
  add_moments(ref_state.head.w);
  add_moments(ref_state.head.b);

  Rng ref_shuffle(derive_seed(99, kSeedShuffle));
  long step_count = 0;
  for (int epoch = 0; epoch < 3; ++epoch) {
    std::vector<std::size_t> order(task.train.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    ref_shuffle.shuffle(order);
    for (std::size_t begin = 0; begin < order.size(); begin += cfg.batch_size) {
      const std::size_t end = std::min(begin + cfg.batch_size, order.size());
      std::vector<std::size_t> rows(order.begin() + begin, order.begin() + end);
      Tensor x = gather_rows(task.train.x, rows);
      std::vector<int> y;
      for (std::size_t r : rows) y.push_back(task.train.y[r]);

      Tape tape;
      models::TapedForward tf = models::forward_on_tape(tape, ref_state, x);
      tape.backward(tape.softmax_cross_entropy(tf.logits, y));

      std::vector<Tensor*> params;
      std::vector<Tensor> grads;
      for (std::size_t li = 0; li < ref_state.backbone.size(); ++li) {
        params.push_back(&ref_state.backbone[li].w);
        grads.push_back(tape.grad(tf.backbone[li].first));
        params.push_back(&ref_state.backbone[li].b);
        grads.push_back(tape.grad(tf.backbone[li].second));
      }
      params.push_back(&ref_state.head.w);
      grads.push_back(tape.grad(tf.head.first));
      params.push_back(&ref_state.head.b);
      grads.push_back(tape.grad(tf.head.second));

      const double t = static_cast<double>(step_count + 1);
      for (std::size_t pi = 0; pi < params.size(); ++pi) {
        kernels::adamw_update(params[pi]->data(), m1[pi].data(), m2[pi].data(), grads[pi].data(),
                              params[pi]->numel(), cfg.learning_rate, cfg.beta1, cfg.beta2,
                              cfg.adam_eps, cfg.weight_decay, 1.0 - std::pow(cfg.beta1, t),
                              1.0 - std::pow(cfg.beta2, t));
      }
      ++step_count;
    }
  }

  CHECK(states_equal(impl_state, ref_state));
}

TEST_CASE("one clean epoch reduces the training loss on a separable task") {
  tasks::TaskData task = toy_task();
  ModelState state = models::init_random(toy_model_spec(), 11);
  OptimizerConfig cfg;
  cfg.learning_rate = 3e-3;
  cfg.cosine_schedule = false;
  cfg.batch_size = 32;
  train::Optimizer opt(cfg, state, 100, 1);
  Rng shuffle_rng(derive_seed(1, kSeedShuffle));
  attacks::AttackConfig no_attack;

  const double before = ops::softmax_cross_entropy(models::forward(state, task.train.x),
                                                   task.train.y)
                            .loss;
  for (int epoch = 0; epoch < 2; ++epoch) {
    train::train_epoch(state, task.train, 0.0, no_attack, opt, shuffle_rng, nullptr);
  }
  const double after =
      ops::softmax_cross_entropy(models::forward(state, task.train.x), task.train.y).loss;
  CHECK(after < before);
}

TEST_CASE("adversarial training loss dominates the clean loss at equal parameters") {
  tasks::TaskData task = toy_task();
  ModelState state = models::init_random(toy_model_spec(), 12);
  // A few clean epochs so gradients are informative.
  OptimizerConfig cfg;
  cfg.learning_rate = 3e-3;
  cfg.cosine_schedule = false;
  cfg.batch_size = 32;
  {
    train::Optimizer opt(cfg, state, 200, 1);
    Rng shuffle_rng(derive_seed(2, kSeedShuffle));
    attacks::AttackConfig no_attack;
    for (int epoch = 0; epoch < 5; ++epoch) {
      train::train_epoch(state, task.train, 0.0, no_attack, opt, shuffle_rng, nullptr);
    }
  }

  attacks::AttackConfig attack;
  attack.epsilon = 0.06;
  attack.steps = 7;
  attack.seed = 5;
  Tensor x_adv = attacks::pgd(state, task.train.x, task.train.y, attack);
  const double clean_loss =
      ops::softmax_cross_entropy(models::forward(state, task.train.x), task.train.y).loss;
  const double adv_loss =
      ops::softmax_cross_entropy(models::forward(state, x_adv), task.train.y).loss;
  CHECK(adv_loss >= clean_loss);
}

// ---------------------------------------------------------------------------
// run_rft
// ---------------------------------------------------------------------------

TEST_CASE("two-hinge run records the definitional eps trace") {
  tasks::TaskData task = toy_task();
  ModelState backbone = models::init_random(toy_model_spec(), 20);
  ModelState state = models::reinit_head(backbone, 4, 21);

  schedule::ScheduleSpec sched;
  sched.eps_goal = 0.04;
  sched.total_epochs = 10;
  sched.variant = schedule::Variant::TwoHinge;
  sched.t1 = 3;
  sched.t2 = 7;

  attacks::AttackConfig attack;
  attack.steps = 3;
  OptimizerConfig cfg;
  cfg.batch_size = 32;
  cfg.learning_rate = 2e-3;

  train::RunOptions options;
  options.eval_steps = 3;
  train::RunResult result = train::run_rft(state, task, sched, attack, cfg, 7, options);
  REQUIRE(result.trace.size() == 10);
  for (int t = 0; t < 10; ++t) {
    CHECK(result.trace[t].train_eps == schedule::epsilon_at(sched, t));
  }
  CHECK(result.trace[0].train_eps == 0.0);
  CHECK(result.trace[9].train_eps == 0.04);
  CHECK_FALSE(result.aborted);
}

TEST_CASE("identical config and seed give a bitwise-identical trace") {
  tasks::TaskData task = toy_task();
  ModelState state = models::reinit_head(models::init_random(toy_model_spec(), 30), 4, 31);

  schedule::ScheduleSpec sched = schedule::preset("scheduler", 0.05, 8);
  attacks::AttackConfig attack;
  attack.steps = 3;
  OptimizerConfig cfg;
  cfg.batch_size = 32;

  train::RunOptions options;
  options.eval_steps = 3;
  train::RunResult a = train::run_rft(state, task, sched, attack, cfg, 9, options);
  train::RunResult b = train::run_rft(state, task, sched, attack, cfg, 9, options);
  REQUIRE(a.trace.size() == b.trace.size());
  for (std::size_t i = 0; i < a.trace.size(); ++i) {
    CHECK(a.trace[i].train_eps == b.trace[i].train_eps);
    CHECK(a.trace[i].train_loss == b.trace[i].train_loss);
    CHECK(a.trace[i].val_clean_acc == b.trace[i].val_clean_acc);
    CHECK(a.trace[i].val_adv_acc_at_goal == b.trace[i].val_adv_acc_at_goal);
    CHECK(a.trace[i].val_clean_loss == b.trace[i].val_clean_loss);
    CHECK(a.trace[i].val_adv_loss == b.trace[i].val_adv_loss);
  }
  CHECK(states_equal(a.state, b.state));
}

TEST_CASE("zero-eps epochs never invoke the attack") {
  tasks::TaskData task = toy_task();
  ModelState state = models::reinit_head(models::init_random(toy_model_spec(), 40), 4, 41);

  schedule::ScheduleSpec fix0;
  fix0.eps_goal = 0.0;
  fix0.total_epochs = 4;
  fix0.variant = schedule::Variant::Fix;

  attacks::AttackConfig attack;
  OptimizerConfig cfg;
  cfg.batch_size = 32;
  train::RunOptions options;
  train::RunResult result = train::run_rft(state, task, fix0, attack, cfg, 1, options);
  CHECK(result.stats.attack_invocations == 0);

  // Validation adv accuracy equals clean accuracy when the goal is zero.
  for (const train::EpochTrace& row : result.trace) {
    CHECK(row.val_adv_acc_at_goal == row.val_clean_acc);
  }

  // With a ramp, only post-T1 epochs attack.
  schedule::ScheduleSpec ramp;
  ramp.eps_goal = 0.04;
  ramp.total_epochs = 4;
  ramp.variant = schedule::Variant::TwoHinge;
  ramp.t1 = 2;
  ramp.t2 = 4;
  attacks::AttackConfig attack3;
  attack3.steps = 3;
  train::RunOptions options3;
  options3.eval_steps = 3;
  train::RunResult ramped = train::run_rft(state, task, ramp, attack3, cfg, 1, options3);
  const long steps_per = train::steps_per_epoch(task.train.size(), cfg.batch_size);
  // Epochs 0..2 have eps 0 (alpha(2) = 0 at the hinge); epoch 3 attacks.
  CHECK(ramped.stats.attack_invocations == static_cast<std::size_t>(steps_per));
}

TEST_CASE("standard fine-tuning adapts immediately on an easy task") {
  tasks::TaskData task = toy_task(8);
  ModelState backbone = models::init_random(toy_model_spec(), 50);
  ModelState state = models::reinit_head(backbone, 4, 51);

  schedule::ScheduleSpec fix0;
  fix0.eps_goal = 0.0;
  fix0.total_epochs = 6;
  fix0.variant = schedule::Variant::Fix;

  attacks::AttackConfig attack;
  OptimizerConfig cfg;
  cfg.batch_size = 32;
  cfg.learning_rate = 3e-3;
  train::RunResult result = train::run_rft(state, task, fix0, attack, cfg, 2);
  // Above-chance validation accuracy from the very first epoch.
  CHECK(result.trace[0].val_clean_acc > 1.0 / 4.0);
  const auto delay = metrics::delay_epoch(result.trace, 1.0 / 4.0 + 0.05);
  REQUIRE(delay.has_value());
  CHECK(*delay == 0);
}

TEST_CASE("validation never mutates the model") {
  tasks::TaskData task = toy_task();
  ModelState state = models::reinit_head(models::init_random(toy_model_spec(), 60), 4, 61);
  ModelState before = state;
  attacks::AttackConfig eval_cfg;
  eval_cfg.epsilon = 0.05;
  eval_cfg.steps = 5;
  (void)metrics::robust_accuracy(state, task.val, 0.05, eval_cfg);
  CHECK(states_equal(state, before));
}

TEST_CASE("a NaN mid-run aborts with the partial trace preserved") {
  tasks::TaskData task = toy_task();
  ModelState state = models::reinit_head(models::init_random(toy_model_spec(), 70), 4, 71);
  // Poison the head so the first loss is NaN (inf logit, inf - inf in the
  // max-subtraction).
  state.head.b[0] = std::numeric_limits<double>::infinity();

  schedule::ScheduleSpec fix0;
  fix0.eps_goal = 0.0;
  fix0.total_epochs = 5;
  fix0.variant = schedule::Variant::Fix;
  attacks::AttackConfig attack;
  OptimizerConfig cfg;
  cfg.batch_size = 32;
  train::RunResult result = train::run_rft(state, task, fix0, attack, cfg, 3);
  CHECK(result.aborted);
  CHECK(result.trace.size() < 5);
  CHECK_FALSE(result.abort_reason.empty());
}
