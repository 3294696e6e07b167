#pragma once

#include <cstdint>
#include <string>

namespace rftlab::schedule {

enum class Variant { Fix, TwoHinge, Uniform };

/// Per-epoch perturbation strength eps(t) = alpha(t) * eps_goal.
///
/// Variants:
///   fix       - alpha(t) = 1 for all t (constant eps_goal)
///   two_hinge - 0 until T1, linear ramp to 1 at T2, 1 afterwards;
///               T1 == T2 degenerates to a hard switch at T1
///   uniform   - one draw from U[0, eps_goal) per epoch, seeded
struct ScheduleSpec {
  double eps_goal = 0.0;
  int total_epochs = 50;
  Variant variant = Variant::Fix;
  int t1 = 0;
  int t2 = 0;
  std::uint64_t seed = 0;  // uniform variant only

  void validate() const;
};

/// Exact piecewise-linear ramp value in [0, 1]. Hinge values are exact:
/// alpha(T1) == 0.0 and alpha(T2) == 1.0, no float drift.
double alpha(const ScheduleSpec& spec, int t);

double epsilon_at(const ScheduleSpec& spec, int t);

/// Named presets. T1/T2 scale with total_epochs, preserving the 24% / 74%
/// fractions of the 50-epoch reference configuration (12 and 37).
///   fix         T1 = T2 = 0, constant eps
///   scheduler   T1 = round(0.24 T), T2 = round(0.74 T)
///   warmup      T1 = 0, T2 = round(0.74 T)
///   end_to_end  T1 = 0, T2 = T
///   hard_switch T1 = T2 = round(0.5 T)
///   uniform     per-epoch uniform draws
ScheduleSpec preset(const std::string& name, double eps_goal, int total_epochs);

const char* variant_name(Variant v);

}  // namespace rftlab::schedule
