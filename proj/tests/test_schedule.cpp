#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "rftlab/schedule.hpp"

using namespace rftlab;
using schedule::ScheduleSpec;
using schedule::Variant;

namespace {

ScheduleSpec two_hinge(double eps, int total, int t1, int t2) {
  ScheduleSpec s;
  s.eps_goal = eps;
  s.total_epochs = total;
  s.variant = Variant::TwoHinge;
  s.t1 = t1;
  s.t2 = t2;
  return s;
}

}  // namespace

TEST_CASE("two-hinge ramp hits both hinges exactly") {
  ScheduleSpec s = two_hinge(4.0 / 255.0, 50, 12, 37);
  CHECK(schedule::alpha(s, 0) == 0.0);
  CHECK(schedule::alpha(s, 11) == 0.0);
  CHECK(schedule::alpha(s, 12) == 0.0);  // exact, not approximate
  CHECK(schedule::alpha(s, 37) == 1.0);
  CHECK(schedule::alpha(s, 49) == 1.0);

  // Interior ramp: direct evaluation of (t - T1) / (T2 - T1).
  CHECK(schedule::alpha(s, 24) == doctest::Approx(12.0 / 25.0).epsilon(1e-15));
  CHECK(schedule::alpha(s, 25) == doctest::Approx(13.0 / 25.0).epsilon(1e-15));
}

TEST_CASE("fix returns one everywhere; eps scales by alpha") {
  ScheduleSpec s;
  s.eps_goal = 0.05;
  s.total_epochs = 10;
  s.variant = Variant::Fix;
  for (int t = 0; t < 10; ++t) {
    CHECK(schedule::alpha(s, t) == 1.0);
    CHECK(schedule::epsilon_at(s, t) == 0.05);
  }
}

TEST_CASE("ramp start epoch trains at zero perturbation") {
  ScheduleSpec s = two_hinge(4.0 / 255.0, 50, 12, 37);
  CHECK(schedule::epsilon_at(s, 0) == 0.0);
  CHECK(schedule::epsilon_at(s, 12) == 0.0);
}

TEST_CASE("eps_goal zero gives zero at every epoch for all variants") {
  for (const char* name : {"fix", "scheduler", "end_to_end", "uniform"}) {
    ScheduleSpec s = schedule::preset(name, 0.0, 50);
    for (int t = 0; t < 50; ++t) CHECK(schedule::epsilon_at(s, t) == 0.0);
  }
}

TEST_CASE("alpha is non-decreasing and within [0,1]") {
  for (auto [t1, t2] : std::vector<std::pair<int, int>>{{0, 50}, {12, 37}, {25, 25}, {0, 1}}) {
    ScheduleSpec s = two_hinge(0.1, 50, t1, t2);
    double prev = 0.0;
    for (int t = 0; t < 50; ++t) {
      const double a = schedule::alpha(s, t);
      CHECK(a >= prev);
      CHECK(a >= 0.0);
      CHECK(a <= 1.0);
      prev = a;
    }
  }
}

TEST_CASE("hard switch: T1 == T2 is a step function") {
  ScheduleSpec s = two_hinge(0.08, 50, 25, 25);
  CHECK(schedule::alpha(s, 24) == 0.0);
  CHECK(schedule::alpha(s, 25) == 1.0);
  CHECK(schedule::alpha(s, 49) == 1.0);
}

TEST_CASE("fix and two_hinge(0,0) produce identical eps sequences") {
  ScheduleSpec fix;
  fix.eps_goal = 0.07;
  fix.total_epochs = 50;
  fix.variant = Variant::Fix;
  ScheduleSpec hinge = two_hinge(0.07, 50, 0, 0);
  for (int t = 0; t < 50; ++t) {
    CHECK(schedule::epsilon_at(fix, t) == schedule::epsilon_at(hinge, t));
  }
}

TEST_CASE("epoch index is range-checked") {
  ScheduleSpec s = two_hinge(0.1, 50, 12, 37);
  CHECK_THROWS_AS(schedule::alpha(s, -1), std::out_of_range);
  CHECK_THROWS_AS(schedule::alpha(s, 50), std::out_of_range);
  CHECK_THROWS_AS(schedule::alpha(schedule::preset("uniform", 0.1, 50), 3), std::logic_error);
}

TEST_CASE("presets reproduce the reference hinge epochs") {
  ScheduleSpec sched = schedule::preset("scheduler", 4.0 / 255.0, 50);
  CHECK(sched.t1 == 12);
  CHECK(sched.t2 == 37);

  ScheduleSpec fix = schedule::preset("fix", 0.1, 50);
  CHECK(fix.variant == Variant::Fix);
  CHECK(fix.t1 == 0);
  CHECK(fix.t2 == 0);

  ScheduleSpec e2e = schedule::preset("end_to_end", 0.1, 50);
  CHECK(e2e.t1 == 0);
  CHECK(e2e.t2 == 50);

  ScheduleSpec hs = schedule::preset("hard_switch", 0.1, 50);
  CHECK(hs.t1 == hs.t2);
  CHECK(hs.t1 == 25);

  ScheduleSpec warm = schedule::preset("warmup", 0.1, 50);
  CHECK(warm.t1 == 0);
  CHECK(warm.t2 == 37);

  CHECK_THROWS_AS(schedule::preset("nope", 0.1, 50), std::invalid_argument);

  // Proportional scaling for other run lengths.
  ScheduleSpec sched100 = schedule::preset("scheduler", 0.1, 100);
  CHECK(sched100.t1 == 24);
  CHECK(sched100.t2 == 74);
}

TEST_CASE("uniform draws are reproducible and average to eps_goal/2") {
  const double eps_goal = 0.08;
  ScheduleSpec u = schedule::preset("uniform", eps_goal, 10000);
  u.seed = 31337;

  double sum = 0.0;
  for (int t = 0; t < 10000; ++t) {
    const double e = schedule::epsilon_at(u, t);
    CHECK(e >= 0.0);
    CHECK(e <= eps_goal);
    CHECK(e == schedule::epsilon_at(u, t));  // deterministic per (seed, t)
    sum += e;
  }
  const double mean = sum / 10000.0;
  // U[0, eps] has sd eps/sqrt(12); three standard errors around eps/2.
  const double se = eps_goal / std::sqrt(12.0) / std::sqrt(10000.0);
  CHECK(std::abs(mean - eps_goal / 2.0) <= 3.0 * se);

  ScheduleSpec u2 = u;
  u2.seed = 99;
  CHECK(schedule::epsilon_at(u2, 0) != schedule::epsilon_at(u, 0));
}

TEST_CASE("spec validation catches contradictions") {
  ScheduleSpec bad = two_hinge(0.1, 50, 30, 20);
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);

  ScheduleSpec fix_with_hinges;
  fix_with_hinges.variant = Variant::Fix;
  fix_with_hinges.t1 = 1;
  fix_with_hinges.t2 = 1;
  CHECK_THROWS_AS(fix_with_hinges.validate(), std::invalid_argument);

  ScheduleSpec beyond = two_hinge(0.1, 50, 0, 51);
  CHECK_THROWS_AS(beyond.validate(), std::invalid_argument);
}
