#include "rftlab/schedule.hpp"

#include <cmath>
#include <stdexcept>

#include "rftlab/rng.hpp"

namespace rftlab::schedule {

void ScheduleSpec::validate() const {
  if (eps_goal < 0.0) throw std::invalid_argument("schedule: eps_goal must be >= 0");
  if (total_epochs <= 0) throw std::invalid_argument("schedule: total_epochs must be positive");
  if (t1 < 0 || t2 < t1) throw std::invalid_argument("schedule: need 0 <= T1 <= T2");
  if (t2 > total_epochs) throw std::invalid_argument("schedule: T2 must be <= total_epochs");
  if (variant == Variant::Fix && (t1 != 0 || t2 != 0)) {
    throw std::invalid_argument("schedule: fix variant requires T1 = T2 = 0");
  }
}

namespace {

void check_epoch(const ScheduleSpec& spec, int t) {
  if (t < 0 || t >= spec.total_epochs) {
    throw std::out_of_range("schedule: epoch index out of range");
  }
}

}  // namespace

double alpha(const ScheduleSpec& spec, int t) {
  spec.validate();
  check_epoch(spec, t);
  switch (spec.variant) {
    case Variant::Fix:
      return 1.0;
    case Variant::TwoHinge:
      if (spec.t1 == spec.t2) return t < spec.t1 ? 0.0 : 1.0;
      if (t < spec.t1) return 0.0;
      if (t >= spec.t2) return 1.0;
      return static_cast<double>(t - spec.t1) / static_cast<double>(spec.t2 - spec.t1);
    case Variant::Uniform:
      throw std::logic_error("schedule: alpha is undefined for the uniform variant");
  }
  throw std::logic_error("schedule: unknown variant");
}

double epsilon_at(const ScheduleSpec& spec, int t) {
  if (spec.variant == Variant::Uniform) {
    spec.validate();
    check_epoch(spec, t);
    Rng rng(derive_seed(spec.seed, kSeedSchedule, static_cast<std::uint64_t>(t)));
    return rng.uniform(0.0, spec.eps_goal);
  }
  return alpha(spec, t) * spec.eps_goal;
}

ScheduleSpec preset(const std::string& name, double eps_goal, int total_epochs) {
  ScheduleSpec s;
  s.eps_goal = eps_goal;
  s.total_epochs = total_epochs;
  const int ramp_start = static_cast<int>(std::lround(0.24 * total_epochs));
  const int ramp_end = static_cast<int>(std::lround(0.74 * total_epochs));
  if (name == "fix") {
    s.variant = Variant::Fix;
  } else if (name == "scheduler") {
    s.variant = Variant::TwoHinge;
    s.t1 = ramp_start;
    s.t2 = ramp_end;
  } else if (name == "warmup") {
    s.variant = Variant::TwoHinge;
    s.t1 = 0;
    s.t2 = ramp_end;
  } else if (name == "end_to_end") {
    s.variant = Variant::TwoHinge;
    s.t1 = 0;
    s.t2 = total_epochs;
  } else if (name == "hard_switch") {
    s.variant = Variant::TwoHinge;
    s.t1 = static_cast<int>(std::lround(0.5 * total_epochs));
    s.t2 = s.t1;
  } else if (name == "uniform") {
    s.variant = Variant::Uniform;
  } else {
    throw std::invalid_argument("schedule: unknown preset '" + name + "'");
  }
  s.validate();
  return s;
}

const char* variant_name(Variant v) {
  switch (v) {
    case Variant::Fix:
      return "fix";
    case Variant::TwoHinge:
      return "two_hinge";
    case Variant::Uniform:
      return "uniform";
  }
  return "unknown";
}

}  // namespace rftlab::schedule
