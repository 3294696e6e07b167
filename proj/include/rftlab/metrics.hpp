#pragma once

#include <optional>
#include <span>
#include <vector>

#include "rftlab/attacks.hpp"
#include "rftlab/models.hpp"
#include "rftlab/tasks.hpp"
#include "rftlab/trainloop.hpp"

namespace rftlab::metrics {

/// Accuracy sampled on an eps grid: starts at 0 (clean accuracy), ends at the
/// evaluation goal, strictly increasing.
struct RobustnessCurve {
  std::vector<double> eps_grid;
  std::vector<double> accuracy;

  double eps_goal() const { return eps_grid.back(); }
  void validate() const;
};

/// Fraction of examples still classified correctly under a PGD perturbation
/// of budget eps; eps == 0 is plain accuracy.
double robust_accuracy(const models::ModelState& state, const tasks::Dataset& data, double eps,
                       const attacks::AttackConfig& attack_cfg);

/// robust_accuracy evaluated independently at each grid point
/// {0, step, 2*step, ...}; a final point is clamped to eps_goal when step
/// does not divide it. eps_goal == 0 yields the single-point clean curve.
RobustnessCurve accuracy_curve(const models::ModelState& state, const tasks::Dataset& data,
                               double eps_goal, double step,
                               const attacks::AttackConfig& attack_cfg);

/// Mean accuracy under eps drawn uniformly from [0, eps_goal]: the normalized
/// trapezoidal area under the curve. Optional per-interval weights give a
/// piecewise-constant perturbation density (default uniform).
double expected_robustness(const RobustnessCurve& curve,
                           std::span<const double> interval_weights = {});

/// adv <= e_adv <= clean; the report-level sanity gate for summary rows.
bool ordering_check(double clean, double adv, double e_adv);

/// Smallest epoch with validation clean accuracy strictly above the
/// threshold; nullopt when it is never exceeded.
std::optional<int> delay_epoch(const std::vector<train::EpochTrace>& trace,
                               double threshold = 0.05);

/// Smallest epoch with validation clean accuracy at or above
/// fraction * (final validation clean accuracy).
int adaptation_phase_epoch(const std::vector<train::EpochTrace>& trace, double fraction = 0.9);

double pearson_correlation(std::span<const double> xs, std::span<const double> ys);

}  // namespace rftlab::metrics
