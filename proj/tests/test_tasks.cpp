#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstdio>
#include <cstring>
#include <map>
#include <set>

#include "rftlab/rng.hpp"
#include "rftlab/tasks.hpp"

using namespace rftlab;
using tasks::Dataset;
using tasks::SyntheticTaskSpec;
using tasks::TaskData;

namespace {

SyntheticTaskSpec small_spec(std::uint64_t seed = 5) {
  SyntheticTaskSpec spec;
  spec.input_dim = 8;
  spec.num_classes = 4;
  spec.class_separation = 0.08;
  spec.samples_per_class = 30;
  spec.noise_scale = 0.02;
  spec.seed = seed;
  return spec;
}

bool datasets_equal(const Dataset& a, const Dataset& b) {
  return a.y == b.y && a.x.same_shape(b.x) &&
         std::memcmp(a.x.data(), b.x.data(), a.x.numel() * sizeof(double)) == 0;
}

// Multinomial logistic regression on raw inputs, plain gradient descent.
// Independent of the model stack; used to compare task difficulty.
double linear_probe_accuracy(const TaskData& task, int iters = 300) {
  const std::size_t d = task.spec.input_dim;
  const std::size_t k = task.spec.num_classes;
  const std::size_t n = task.train.size();
  std::vector<double> w(d * k, 0.0), bias(k, 0.0);

  for (int it = 0; it < iters; ++it) {
    std::vector<double> gw(d * k, 0.0), gb(k, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      const double* x = task.train.x.data() + i * d;
      std::vector<double> logits(k, 0.0);
      for (std::size_t c = 0; c < k; ++c) {
        for (std::size_t j = 0; j < d; ++j) logits[c] += x[j] * w[j * k + c];
        logits[c] += bias[c];
      }
      double mx = logits[0];
      for (double v : logits) mx = v > mx ? v : mx;
      double z = 0.0;
      for (double& v : logits) {
        v = std::exp(v - mx);
        z += v;
      }
      for (std::size_t c = 0; c < k; ++c) {
        const double p = logits[c] / z - (static_cast<int>(c) == task.train.y[i] ? 1.0 : 0.0);
        for (std::size_t j = 0; j < d; ++j) gw[j * k + c] += p * x[j];
        gb[c] += p;
      }
    }
    const double lr = 0.5 / static_cast<double>(n);
    for (std::size_t i = 0; i < w.size(); ++i) w[i] -= lr * gw[i];
    for (std::size_t c = 0; c < k; ++c) bias[c] -= lr * gb[c];
  }

  std::size_t hits = 0;
  for (std::size_t i = 0; i < task.test.size(); ++i) {
    const double* x = task.test.x.data() + i * d;
    std::size_t best = 0;
    double best_v = -1e300;
    for (std::size_t c = 0; c < k; ++c) {
      double v = bias[c];
      for (std::size_t j = 0; j < d; ++j) v += x[j] * w[j * k + c];
      if (v > best_v) {
        best_v = v;
        best = c;
      }
    }
    hits += static_cast<int>(best) == task.test.y[i];
  }
  return static_cast<double>(hits) / static_cast<double>(task.test.size());
}

}  // namespace

TEST_CASE("generation is deterministic per seed and differs across seeds") {
  TaskData a = tasks::generate(small_spec(5));
  TaskData b = tasks::generate(small_spec(5));
  TaskData c = tasks::generate(small_spec(6));
  CHECK(datasets_equal(a.train, b.train));
  CHECK(datasets_equal(a.val, b.val));
  CHECK(datasets_equal(a.test, b.test));
  CHECK_FALSE(datasets_equal(a.train, c.train));
}

TEST_CASE("all generated inputs live in the unit box") {
  SyntheticTaskSpec spec = small_spec(11);
  spec.noise_scale = 0.4;  // forces clipping
  TaskData task = tasks::generate(spec);
  for (const Dataset* ds : {&task.train, &task.val, &task.test}) {
    for (std::size_t i = 0; i < ds->x.numel(); ++i) {
      CHECK(ds->x[i] >= 0.0);
      CHECK(ds->x[i] <= 1.0);
    }
  }
}

TEST_CASE("zero noise collapses classes onto centers") {
  SyntheticTaskSpec spec = small_spec(7);
  spec.noise_scale = 0.0;
  TaskData task = tasks::generate(spec);
  for (std::size_t i = 0; i < task.train.size(); ++i) {
    const double* x = task.train.x.data() + i * spec.input_dim;
    const double* c = task.centers.data() + task.train.y[i] * spec.input_dim;
    for (std::size_t j = 0; j < spec.input_dim; ++j) CHECK(x[j] == c[j]);
  }
}

TEST_CASE("splits are balanced and sized 60/20/20") {
  TaskData task = tasks::generate(small_spec(9));
  CHECK(task.train.size() == 4 * 18);
  CHECK(task.val.size() == 4 * 6);
  CHECK(task.test.size() == 4 * 6);
  for (const Dataset* ds : {&task.train, &task.val, &task.test}) {
    std::map<int, int> counts;
    for (int y : ds->y) ++counts[y];
    CHECK(counts.size() == 4);
    int lo = 1 << 30, hi = 0;
    for (auto [cls, n] : counts) {
      lo = std::min(lo, n);
      hi = std::max(hi, n);
    }
    CHECK(hi - lo <= 1);
  }
}

TEST_CASE("infeasible packing raises a config error") {
  SyntheticTaskSpec spec = small_spec(1);
  spec.input_dim = 1;
  spec.num_classes = 50;
  spec.class_separation = 0.3;  // one or two lattice levels in 1-D
  CHECK_THROWS_AS(tasks::generate(spec), tasks::ConfigError);
}

TEST_CASE("class centers respect the lattice separation") {
  SyntheticTaskSpec spec = small_spec(13);
  TaskData task = tasks::generate(spec);
  const std::size_t k = spec.num_classes;
  for (std::size_t a = 0; a < k; ++a) {
    for (std::size_t b = a + 1; b < k; ++b) {
      double linf = 0.0;
      for (std::size_t j = 0; j < spec.input_dim; ++j) {
        linf = std::max(linf, std::abs(task.centers.at(a, j) - task.centers.at(b, j)));
      }
      CHECK(linf >= 2.0 * spec.class_separation - 1e-12);
    }
  }
}

TEST_CASE("larger separation is easier for a linear probe over 5 seeds") {
  int wins = 0;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    SyntheticTaskSpec wide = small_spec(100 + seed);
    wide.class_separation = 0.14;
    wide.noise_scale = 0.06;
    SyntheticTaskSpec narrow = wide;
    narrow.class_separation = 0.035;
    const double acc_wide = linear_probe_accuracy(tasks::generate(wide));
    const double acc_narrow = linear_probe_accuracy(tasks::generate(narrow));
    wins += acc_wide >= acc_narrow;
  }
  CHECK(wins >= 4);
}

TEST_CASE("difficulty suite shares geometry and orders separations") {
  tasks::DifficultySuite suite = tasks::difficulty_suite();
  CHECK(suite.easy.input_dim == suite.source.input_dim);
  CHECK(suite.medium.input_dim == suite.source.input_dim);
  CHECK(suite.hard.input_dim == suite.source.input_dim);
  CHECK(suite.easy.class_separation > suite.medium.class_separation);
  CHECK(suite.medium.class_separation > suite.hard.class_separation);
  // All feasible.
  tasks::generate(suite.source);
  tasks::generate(suite.hard);
}

TEST_CASE("relation variants keep determinism and unit-box invariants") {
  for (tasks::Relation r : {tasks::Relation::RotatedFeatures, tasks::Relation::Relabeled}) {
    SyntheticTaskSpec spec = small_spec(21);
    spec.relation = r;
    TaskData a = tasks::generate(spec);
    TaskData b = tasks::generate(spec);
    CHECK(datasets_equal(a.train, b.train));
    for (std::size_t i = 0; i < a.train.x.numel(); ++i) {
      CHECK(a.train.x[i] >= 0.0);
      CHECK(a.train.x[i] <= 1.0);
    }
  }
}

TEST_CASE("eps presets map names to budgets") {
  CHECK(tasks::eps_preset("zero") == 0.0);
  CHECK(tasks::eps_preset("moderate") == tasks::eps_preset("4/255"));
  CHECK(tasks::eps_preset("high") == tasks::eps_preset("8/255"));
  CHECK(tasks::eps_preset("high") > tasks::eps_preset("moderate"));
  CHECK(tasks::eps_preset("moderate") > tasks::eps_preset("low"));
  CHECK_THROWS_AS(tasks::eps_preset("giant"), tasks::ConfigError);
}

TEST_CASE("dataset csv round-trips exactly") {
  TaskData task = tasks::generate(small_spec(33));
  const std::string path = "test_dataset_roundtrip.csv";
  tasks::export_csv(task.val, path);
  Dataset back = tasks::import_csv(path);
  CHECK(datasets_equal(task.val, back));
  std::remove(path.c_str());
}
