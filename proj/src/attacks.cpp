#include "rftlab/attacks.hpp"

#include <cassert>
#include <cmath>
#include <stdexcept>

#include "rftlab/kernels.hpp"
#include "rftlab/rng.hpp"
#include "rftlab/tape.hpp"

namespace rftlab::attacks {

double AttackConfig::effective_step() const {
  if (step_size > 0.0) return step_size;
  return steps > 0 ? 2.0 * epsilon / static_cast<double>(steps) : 0.0;
}

void AttackConfig::validate() const {
  if (epsilon < 0.0 || epsilon > 1.0) throw std::invalid_argument("attack: epsilon in [0, 1]");
  if (steps <= 0) throw std::invalid_argument("attack: steps must be positive");
  if (epsilon > 0.0 && effective_step() > 2.0 * epsilon + 1e-15) {
    throw std::invalid_argument("attack: step_size must be <= 2*epsilon");
  }
}

namespace {

// Hard invariant on every attack output: inside the eps-ball and the unit box.
void check_output(const Tensor& x_adv, const Tensor& x, double eps) {
#ifndef NDEBUG
  for (std::size_t i = 0; i < x.numel(); ++i) {
    assert(std::abs(x_adv[i] - x[i]) <= eps + 1e-12);
    assert(x_adv[i] >= 0.0 && x_adv[i] <= 1.0);
  }
#else
  (void)x_adv;
  (void)x;
  (void)eps;
#endif
}

}  // namespace

Tensor input_gradient(const models::ModelState& state, const Tensor& x,
                      const std::vector<int>& y) {
  Tape tape;
  models::TapedForward tf = models::forward_on_tape(tape, state, x);
  NodeId loss = tape.softmax_cross_entropy(tf.logits, y);
  tape.backward(loss);
  return tape.grad(tf.input);
}

Tensor fgsm(const models::ModelState& state, const Tensor& x, const std::vector<int>& y,
            double epsilon) {
  if (epsilon == 0.0) return x;
  Tensor g = input_gradient(state, x, y);
  Tensor x_adv(x.shape());
  kernels::sign_scale_add(x_adv.data(), x.data(), g.data(), epsilon, x.numel());
  kernels::clip_linf_box(x_adv.data(), x.data(), epsilon, x.numel());
  check_output(x_adv, x, epsilon);
  return x_adv;
}

Tensor pgd(const models::ModelState& state, const Tensor& x, const std::vector<int>& y,
           const AttackConfig& cfg) {
  cfg.validate();
  if (cfg.epsilon == 0.0) return x;

  Tensor x_adv = x;
  if (cfg.random_start) {
    Rng rng(derive_seed(cfg.seed, kSeedAttack));
    for (std::size_t i = 0; i < x_adv.numel(); ++i) {
      x_adv[i] = x[i] + rng.uniform(-cfg.epsilon, cfg.epsilon);
    }
    kernels::clip_linf_box(x_adv.data(), x.data(), cfg.epsilon, x.numel());
  }

  const double step = cfg.effective_step();
  for (int it = 0; it < cfg.steps; ++it) {
    Tensor g = input_gradient(state, x_adv, y);
    kernels::sign_scale_add(x_adv.data(), x_adv.data(), g.data(), step, x_adv.numel());
    kernels::clip_linf_box(x_adv.data(), x.data(), cfg.epsilon, x_adv.numel());
  }
  check_output(x_adv, x, cfg.epsilon);
  return x_adv;
}

Tensor project_linf(const Tensor& x_adv, const Tensor& x_ref, double epsilon) {
  if (!x_adv.same_shape(x_ref)) throw ShapeError("project_linf: shape mismatch");
  Tensor out = x_adv;
  kernels::clip_linf_box(out.data(), x_ref.data(), epsilon, out.numel());
  return out;
}

}  // namespace rftlab::attacks
