#include "rftlab/tasks.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "rftlab/csvio.hpp"
#include "rftlab/rng.hpp"

namespace rftlab::tasks {

void SyntheticTaskSpec::validate() const {
  if (input_dim == 0) throw ConfigError("task: input_dim must be positive");
  if (num_classes == 0) throw ConfigError("task: num_classes must be positive");
  if (!(class_separation > 0.0)) throw ConfigError("task: class_separation must be > 0");
  if (samples_per_class < 5) throw ConfigError("task: need at least 5 samples per class");
  if (noise_scale < 0.0) throw ConfigError("task: noise_scale must be >= 0");
}

namespace {

using Vertex = std::vector<int>;

// Lattice vertices with spacing 2*sep fit inside [0.2, 0.8]^d.
int levels_per_dim(double sep) {
  const int l = static_cast<int>(std::floor(0.6 / (2.0 * sep))) + 1;
  return l < 1 ? 1 : l;
}

bool packing_feasible(int levels, std::size_t dims, std::size_t k) {
  // levels^dims >= k, computed without overflow.
  double capacity = 1.0;
  for (std::size_t i = 0; i < dims; ++i) {
    capacity *= levels;
    if (capacity >= static_cast<double>(k)) return true;
  }
  return capacity >= static_cast<double>(k);
}

std::vector<Vertex> sample_vertices(Rng& rng, int levels, std::size_t dims, std::size_t k) {
  std::set<Vertex> seen;
  std::vector<Vertex> out;
  while (out.size() < k) {
    Vertex v(dims);
    for (std::size_t j = 0; j < dims; ++j) v[j] = static_cast<int>(rng.next_index(levels));
    if (seen.insert(v).second) out.push_back(std::move(v));
  }
  return out;
}

Tensor vertices_to_centers(const std::vector<Vertex>& vertices, int levels, std::size_t dims,
                           double sep) {
  Tensor centers({vertices.size(), dims});
  for (std::size_t c = 0; c < vertices.size(); ++c) {
    for (std::size_t j = 0; j < dims; ++j) {
      centers.at(c, j) = levels == 1 ? 0.5 : 0.2 + 2.0 * sep * vertices[c][j];
    }
  }
  return centers;
}

}  // namespace

TaskData generate(const SyntheticTaskSpec& spec) {
  spec.validate();
  const std::size_t d = spec.input_dim;
  const std::size_t k = spec.num_classes;
  const int levels = levels_per_dim(spec.class_separation);
  if (!packing_feasible(levels, d, k)) {
    throw ConfigError("task: cannot place " + std::to_string(k) +
                      " classes on the lattice; reduce class_separation or num_classes");
  }

  Rng rng(derive_seed(spec.seed, kSeedData));
  std::vector<Vertex> vertices = sample_vertices(rng, levels, d, k);

  switch (spec.relation) {
    case Relation::SharedFeatures:
      break;
    case Relation::RotatedFeatures: {
      // Axis permutation plus per-axis reflection: same lattice geometry,
      // different layout of the class structure over the input features.
      std::vector<std::size_t> perm(d);
      for (std::size_t j = 0; j < d; ++j) perm[j] = j;
      rng.shuffle(perm);
      std::vector<bool> flip(d);
      for (std::size_t j = 0; j < d; ++j) flip[j] = rng.next_index(2) == 1;
      for (Vertex& v : vertices) {
        Vertex w(d);
        for (std::size_t j = 0; j < d; ++j) {
          int idx = v[perm[j]];
          w[j] = flip[j] ? levels - 1 - idx : idx;
        }
        v = std::move(w);
      }
      break;
    }
    case Relation::Relabeled: {
      // Same centers, classes renamed.
      std::vector<std::size_t> relabel(k);
      for (std::size_t c = 0; c < k; ++c) relabel[c] = c;
      rng.shuffle(relabel);
      std::vector<Vertex> reordered(k);
      for (std::size_t c = 0; c < k; ++c) reordered[relabel[c]] = vertices[c];
      vertices = std::move(reordered);
      break;
    }
  }

  Tensor centers = vertices_to_centers(vertices, levels, d, spec.class_separation);

  // Per-class draws, split 60/20/20, remainder to train. Splits are disjoint
  // by construction and balanced within one sample per class.
  const std::size_t spc = spec.samples_per_class;
  const std::size_t n_val = spc / 5;
  const std::size_t n_test = spc / 5;
  const std::size_t n_train = spc - n_val - n_test;

  auto make_split = [&](std::size_t per_class) {
    Dataset ds;
    ds.x = Tensor({per_class * k, d});
    ds.y.assign(per_class * k, 0);
    return ds;
  };
  TaskData data;
  data.spec = spec;
  data.centers = centers;
  data.train = make_split(n_train);
  data.val = make_split(n_val);
  data.test = make_split(n_test);

  auto fill_sample = [&](Dataset& ds, std::size_t row, std::size_t cls) {
    double* out = ds.x.data() + row * d;
    const double* c = centers.data() + cls * d;
    for (std::size_t j = 0; j < d; ++j) {
      double v = c[j] + spec.noise_scale * rng.normal();
      v = v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v);
      out[j] = v;
    }
    ds.y[row] = static_cast<int>(cls);
  };

  for (std::size_t cls = 0; cls < k; ++cls) {
    for (std::size_t i = 0; i < n_train; ++i) fill_sample(data.train, cls * n_train + i, cls);
    for (std::size_t i = 0; i < n_val; ++i) fill_sample(data.val, cls * n_val + i, cls);
    for (std::size_t i = 0; i < n_test; ++i) fill_sample(data.test, cls * n_test + i, cls);
  }

  // Mix class order in the training split; epoch shuffling happens downstream.
  std::vector<std::size_t> order(data.train.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  rng.shuffle(order);
  Dataset shuffled = make_split(n_train);
  for (std::size_t i = 0; i < order.size(); ++i) {
    const double* from = data.train.x.data() + order[i] * d;
    double* to = shuffled.x.data() + i * d;
    std::copy(from, from + d, to);
    shuffled.y[i] = data.train.y[order[i]];
  }
  data.train = std::move(shuffled);

  data.train.x.require_finite("task train split");
  data.val.x.require_finite("task val split");
  data.test.x.require_finite("task test split");
  return data;
}

DifficultySuite difficulty_suite() {
  DifficultySuite suite;

  suite.source.input_dim = 16;
  suite.source.num_classes = 8;
  suite.source.class_separation = 0.12;
  suite.source.samples_per_class = 100;
  suite.source.noise_scale = 0.02;
  suite.source.seed = 9001;
  suite.source.relation = Relation::SharedFeatures;

  suite.easy = suite.source;
  suite.easy.class_separation = 0.15;
  suite.easy.seed = 9101;

  suite.medium = suite.source;
  suite.medium.class_separation = 0.075;
  suite.medium.seed = 9201;

  suite.hard = suite.source;
  suite.hard.class_separation = 0.045;
  suite.hard.seed = 9301;

  return suite;
}

double eps_preset(const std::string& name) {
  if (name == "zero") return 0.0;
  if (name == "low") return 0.02;
  if (name == "moderate" || name == "4/255") return 0.04;
  if (name == "high" || name == "8/255") return 0.08;
  throw ConfigError("unknown eps preset '" + name + "'");
}

const char* relation_name(Relation r) {
  switch (r) {
    case Relation::SharedFeatures:
      return "shared_features";
    case Relation::RotatedFeatures:
      return "rotated_features";
    case Relation::Relabeled:
      return "relabeled";
  }
  return "unknown";
}

Relation relation_from_name(const std::string& name) {
  if (name == "shared_features") return Relation::SharedFeatures;
  if (name == "rotated_features") return Relation::RotatedFeatures;
  if (name == "relabeled") return Relation::Relabeled;
  throw ConfigError("unknown relation '" + name + "'");
}

void export_csv(const Dataset& ds, const std::string& path) {
  csv::Writer w(path);
  std::vector<std::string> header{"schema"};
  for (std::size_t j = 0; j < ds.x.cols(); ++j) header.push_back("f" + std::to_string(j));
  header.push_back("label");
  w.header(header);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    std::vector<std::string> row{"1"};
    for (std::size_t j = 0; j < ds.x.cols(); ++j) row.push_back(csv::format_real(ds.x.at(i, j)));
    row.push_back(std::to_string(ds.y[i]));
    w.row(row);
  }
  w.write();
}

Dataset import_csv(const std::string& path) {
  auto rows = csv::read_rows(path);
  if (rows.size() < 2) throw std::runtime_error("dataset csv: no data rows in " + path);
  const std::size_t d = rows[0].size() - 2;  // schema + features + label
  Dataset ds;
  ds.x = Tensor({rows.size() - 1, d});
  ds.y.resize(rows.size() - 1);
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (rows[i].size() != d + 2) throw std::runtime_error("dataset csv: ragged row");
    for (std::size_t j = 0; j < d; ++j) ds.x.at(i - 1, j) = std::stod(rows[i][j + 1]);
    ds.y[i - 1] = std::stoi(rows[i].back());
  }
  return ds;
}

}  // namespace rftlab::tasks
