#include "rftlab/metrics.hpp"

#include <cmath>
#include <stdexcept>

#include "rftlab/rng.hpp"

namespace rftlab::metrics {

void RobustnessCurve::validate() const {
  if (eps_grid.empty() || eps_grid.size() != accuracy.size()) {
    throw std::invalid_argument("curve: grid and accuracy lengths must match and be non-empty");
  }
  if (eps_grid.front() != 0.0) throw std::invalid_argument("curve: grid must start at 0");
  for (std::size_t i = 1; i < eps_grid.size(); ++i) {
    if (!(eps_grid[i] > eps_grid[i - 1])) {
      throw std::invalid_argument("curve: grid must be strictly increasing");
    }
  }
  for (double a : accuracy) {
    if (a < 0.0 || a > 1.0) throw std::invalid_argument("curve: accuracy outside [0, 1]");
  }
}

double robust_accuracy(const models::ModelState& state, const tasks::Dataset& data, double eps,
                       const attacks::AttackConfig& attack_cfg) {
  if (data.size() == 0) throw std::invalid_argument("robust_accuracy: empty dataset");
  if (eps < 0.0) throw std::invalid_argument("robust_accuracy: eps must be >= 0");
  if (eps == 0.0) return models::accuracy(state, data.x, data.y);
  attacks::AttackConfig cfg = attack_cfg;
  cfg.epsilon = eps;
  cfg.step_size = 0.0;
  Tensor x_adv = attacks::pgd(state, data.x, data.y, cfg);
  return models::accuracy(state, x_adv, data.y);
}

RobustnessCurve accuracy_curve(const models::ModelState& state, const tasks::Dataset& data,
                               double eps_goal, double step,
                               const attacks::AttackConfig& attack_cfg) {
  if (eps_goal < 0.0) throw std::invalid_argument("accuracy_curve: eps_goal must be >= 0");
  RobustnessCurve curve;
  curve.eps_grid.push_back(0.0);
  if (eps_goal > 0.0) {
    if (!(step > 0.0)) throw std::invalid_argument("accuracy_curve: step must be > 0");
    for (std::size_t i = 1; static_cast<double>(i) * step < eps_goal - 1e-15; ++i) {
      curve.eps_grid.push_back(static_cast<double>(i) * step);
    }
    curve.eps_grid.push_back(eps_goal);
  }
  for (std::size_t i = 0; i < curve.eps_grid.size(); ++i) {
    attacks::AttackConfig cfg = attack_cfg;
    cfg.seed = derive_seed(attack_cfg.seed, kSeedEval, i);
    curve.accuracy.push_back(robust_accuracy(state, data, curve.eps_grid[i], cfg));
  }
  curve.validate();
  return curve;
}

double expected_robustness(const RobustnessCurve& curve,
                           std::span<const double> interval_weights) {
  curve.validate();
  const std::size_t intervals = curve.eps_grid.size() - 1;
  if (intervals == 0) {
    throw std::invalid_argument(
        "expected_robustness: single-point curve (eps_goal = 0); use clean accuracy");
  }
  if (!interval_weights.empty() && interval_weights.size() != intervals) {
    throw std::invalid_argument("expected_robustness: one weight per grid interval required");
  }
  double area = 0.0;
  double mass = 0.0;
  for (std::size_t i = 0; i < intervals; ++i) {
    const double w = interval_weights.empty() ? 1.0 : interval_weights[i];
    if (w < 0.0) throw std::invalid_argument("expected_robustness: negative weight");
    const double width = curve.eps_grid[i + 1] - curve.eps_grid[i];
    area += w * width * 0.5 * (curve.accuracy[i] + curve.accuracy[i + 1]);
    mass += w * width;
  }
  if (!(mass > 0.0)) throw std::invalid_argument("expected_robustness: zero total weight");
  return area / mass;
}

bool ordering_check(double clean, double adv, double e_adv) {
  return adv <= e_adv && e_adv <= clean;
}

std::optional<int> delay_epoch(const std::vector<train::EpochTrace>& trace, double threshold) {
  if (trace.empty()) throw std::invalid_argument("delay_epoch: empty trace");
  for (const train::EpochTrace& row : trace) {
    if (row.val_clean_acc > threshold) return row.epoch;
  }
  return std::nullopt;
}

int adaptation_phase_epoch(const std::vector<train::EpochTrace>& trace, double fraction) {
  if (trace.empty()) throw std::invalid_argument("adaptation_phase_epoch: empty trace");
  const double target = fraction * trace.back().val_clean_acc;
  for (const train::EpochTrace& row : trace) {
    if (row.val_clean_acc >= target) return row.epoch;
  }
  return trace.back().epoch;
}

double pearson_correlation(std::span<const double> xs, std::span<const double> ys) {
  if (xs.size() != ys.size() || xs.size() < 3) {
    throw std::invalid_argument("pearson: need two equal-length series of >= 3 points");
  }
  const double n = static_cast<double>(xs.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double dx = xs[i] - mx;
    const double dy = ys[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (!(sxx > 0.0) || !(syy > 0.0)) {
    throw std::invalid_argument("pearson: degenerate variance");
  }
  return sxy / std::sqrt(sxx * syy);
}

}  // namespace rftlab::metrics
