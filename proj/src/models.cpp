#include "rftlab/models.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

#include "json.hpp"
#include "rftlab/rng.hpp"
#include "rftlab/trainloop.hpp"

namespace rftlab::models {

void ModelSpec::validate() const {
  if (input_dim == 0 || repr_dim == 0 || num_classes == 0) {
    throw std::invalid_argument("model: dimensions must be positive");
  }
  if (hidden_dims.empty()) throw std::invalid_argument("model: hidden_dims must be non-empty");
  for (std::size_t w : hidden_dims) {
    if (w == 0) throw std::invalid_argument("model: hidden widths must be positive");
  }
  if (hidden_dims.back() != repr_dim) {
    throw std::invalid_argument("model: repr_dim must equal the last backbone width");
  }
}

std::size_t ModelState::num_params() const {
  std::size_t n = head.w.numel() + head.b.numel();
  for (const Layer& l : backbone) n += l.w.numel() + l.b.numel();
  return n;
}

namespace {

Layer init_layer(Rng& rng, std::size_t fan_in, std::size_t fan_out) {
  Layer l;
  l.w = Tensor({fan_in, fan_out});
  l.b = Tensor({fan_out});
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  for (std::size_t i = 0; i < l.w.numel(); ++i) l.w[i] = rng.uniform(-bound, bound);
  return l;
}

}  // namespace

ModelState init_random(const ModelSpec& spec, std::uint64_t seed) {
  spec.validate();
  Rng rng(derive_seed(seed, kSeedInit));
  ModelState state;
  state.spec = spec;
  std::size_t in = spec.input_dim;
  for (std::size_t width : spec.hidden_dims) {
    state.backbone.push_back(init_layer(rng, in, width));
    in = width;
  }
  state.head = init_layer(rng, spec.repr_dim, spec.num_classes);
  return state;
}

Tensor forward(const ModelState& state, const Tensor& x) {
  Tensor h = x;
  for (const Layer& l : state.backbone) {
    h = ops::relu(ops::add_bias(ops::matmul(h, l.w), l.b));
  }
  return ops::add_bias(ops::matmul(h, state.head.w), state.head.b);
}

TapedForward forward_on_tape(Tape& tape, const ModelState& state, const Tensor& x) {
  TapedForward tf;
  tf.input = tape.input(x);
  NodeId h = tf.input;
  for (const Layer& l : state.backbone) {
    NodeId w = tape.input(l.w);
    NodeId b = tape.input(l.b);
    tf.backbone.emplace_back(w, b);
    h = tape.relu(tape.add_bias(tape.matmul(h, w), b));
  }
  NodeId w = tape.input(state.head.w);
  NodeId b = tape.input(state.head.b);
  tf.head = {w, b};
  tf.logits = tape.add_bias(tape.matmul(h, w), b);
  return tf;
}

ModelState reinit_head(const ModelState& state, std::size_t num_classes, std::uint64_t seed) {
  ModelState out = state;
  out.spec.num_classes = num_classes;
  Rng rng(derive_seed(seed, kSeedInit));
  out.head = init_layer(rng, out.spec.repr_dim, num_classes);
  return out;
}

std::vector<int> predict(const ModelState& state, const Tensor& x) {
  Tensor logits = forward(state, x);
  std::vector<int> out(logits.rows());
  for (std::size_t i = 0; i < logits.rows(); ++i) {
    const double* row = logits.data() + i * logits.cols();
    std::size_t best = 0;
    for (std::size_t j = 1; j < logits.cols(); ++j) {
      if (row[j] > row[best]) best = j;  // strict: ties keep the lowest index
    }
    out[i] = static_cast<int>(best);
  }
  return out;
}

double accuracy(const ModelState& state, const Tensor& x, const std::vector<int>& y) {
  if (y.empty()) throw std::invalid_argument("accuracy: empty dataset");
  std::vector<int> pred = predict(state, x);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < y.size(); ++i) hits += pred[i] == y[i];
  return static_cast<double>(hits) / static_cast<double>(y.size());
}

ModelState pretrain_backbone(const ModelSpec& spec, const tasks::TaskData& source_task,
                             int epochs, const train::OptimizerConfig& optimizer_cfg,
                             std::uint64_t seed) {
  ModelSpec source_spec = spec;
  source_spec.num_classes = source_task.spec.num_classes;
  ModelState state = init_random(source_spec, seed);
  if (epochs == 0) return state;

  train::Optimizer opt(optimizer_cfg, state,
                       train::steps_per_epoch(source_task.train.size(), optimizer_cfg.batch_size) *
                           static_cast<long>(epochs),
                       optimizer_cfg.warmup_epochs);
  Rng shuffle_rng(derive_seed(seed, kSeedShuffle));
  attacks::AttackConfig no_attack;  // eps 0: clean training
  for (int t = 0; t < epochs; ++t) {
    train::train_epoch(state, source_task.train, 0.0, no_attack, opt, shuffle_rng, nullptr);
  }

  const double source_acc = accuracy(state, source_task.train.x, source_task.train.y);
  if (source_acc < 0.60) {
    std::fprintf(stderr,
                 "[rftlab] warning: pretraining reached only %.1f%% source accuracy; "
                 "task and model are likely mismatched\n",
                 100.0 * source_acc);
  }
  return state;
}

// ---------------------------------------------------------------------------
// Checkpoints
// ---------------------------------------------------------------------------

namespace {

nlohmann::json layer_to_json(const Layer& l) {
  return {{"w", l.w.values()}, {"b", l.b.values()},
          {"in", l.w.rows()},  {"out", l.w.cols()}};
}

Layer layer_from_json(const nlohmann::json& j) {
  Layer l;
  std::size_t in = j.at("in").get<std::size_t>();
  std::size_t out = j.at("out").get<std::size_t>();
  l.w = Tensor({in, out}, j.at("w").get<std::vector<double>>());
  l.b = Tensor({out}, j.at("b").get<std::vector<double>>());
  return l;
}

}  // namespace

void save_checkpoint(const ModelState& state, const std::string& path) {
  nlohmann::json j;
  j["schema"] = 1;
  j["spec"] = {{"input_dim", state.spec.input_dim},
               {"hidden_dims", state.spec.hidden_dims},
               {"repr_dim", state.spec.repr_dim},
               {"num_classes", state.spec.num_classes}};
  j["backbone"] = nlohmann::json::array();
  for (const Layer& l : state.backbone) j["backbone"].push_back(layer_to_json(l));
  j["head"] = layer_to_json(state.head);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("checkpoint: cannot open " + path);
  out << j.dump(2) << "\n";
}

ModelState load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("checkpoint: cannot open " + path);
  nlohmann::json j = nlohmann::json::parse(in);
  if (j.at("schema").get<int>() != 1) throw std::runtime_error("checkpoint: unknown schema");
  ModelState state;
  state.spec.input_dim = j.at("spec").at("input_dim").get<std::size_t>();
  state.spec.hidden_dims = j.at("spec").at("hidden_dims").get<std::vector<std::size_t>>();
  state.spec.repr_dim = j.at("spec").at("repr_dim").get<std::size_t>();
  state.spec.num_classes = j.at("spec").at("num_classes").get<std::size_t>();
  state.spec.validate();
  for (const auto& lj : j.at("backbone")) state.backbone.push_back(layer_from_json(lj));
  state.head = layer_from_json(j.at("head"));
  return state;
}

}  // namespace rftlab::models
