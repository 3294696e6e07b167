#pragma once

#include <cstdint>
#include <vector>

#include "rftlab/models.hpp"
#include "rftlab/tensor.hpp"

namespace rftlab::attacks {

/// l-inf attack budget and iteration settings. step_size == 0 means the
/// default 2*epsilon/steps.
struct AttackConfig {
  double epsilon = 0.0;
  int steps = 7;
  double step_size = 0.0;
  bool random_start = true;
  std::uint64_t seed = 0;

  double effective_step() const;
  void validate() const;
};

/// Mean-batch cross-entropy gradient with respect to the input.
Tensor input_gradient(const models::ModelState& state, const Tensor& x,
                      const std::vector<int>& y);

/// Single signed-gradient step: clip01(x + eps * sign(grad_x L)).
Tensor fgsm(const models::ModelState& state, const Tensor& x, const std::vector<int>& y,
            double epsilon);

/// Iterated signed-gradient ascent, projecting onto the eps-ball around x
/// intersected with [0,1]^d after every step. Returns the final iterate.
/// eps == 0 returns the input bitwise.
Tensor pgd(const models::ModelState& state, const Tensor& x, const std::vector<int>& y,
           const AttackConfig& cfg);

/// Elementwise clamp of x_adv into [x_ref - eps, x_ref + eps], then [0, 1].
Tensor project_linf(const Tensor& x_adv, const Tensor& x_ref, double epsilon);

}  // namespace rftlab::attacks
