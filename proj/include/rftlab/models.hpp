#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "rftlab/optimizer.hpp"
#include "rftlab/tape.hpp"
#include "rftlab/tasks.hpp"
#include "rftlab/tensor.hpp"

namespace rftlab::models {

/// Backbone is a relu MLP over hidden_dims; repr_dim must equal the last
/// backbone width; the head is a single linear layer to num_classes.
struct ModelSpec {
  std::size_t input_dim = 16;
  std::vector<std::size_t> hidden_dims{64, 32};
  std::size_t repr_dim = 32;
  std::size_t num_classes = 8;

  void validate() const;
};

struct Layer {
  Tensor w;  // [in x out]
  Tensor b;  // [out]
};

/// Parameter partition: backbone layers (theta_1) and classifier head
/// (theta_2). Plain value type; copy freely.
struct ModelState {
  ModelSpec spec;
  std::vector<Layer> backbone;
  Layer head;

  std::size_t num_params() const;
};

/// Weights uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)], biases zero.
ModelState init_random(const ModelSpec& spec, std::uint64_t seed);

/// Logits for a [batch x d] input, no tape involved.
Tensor forward(const ModelState& state, const Tensor& x);

/// Forward with every parameter and the input registered on the tape, for
/// parameter gradients (training) or input gradients (attacks).
struct TapedForward {
  NodeId input;
  NodeId logits;
  std::vector<std::pair<NodeId, NodeId>> backbone;  // (w, b) per layer
  std::pair<NodeId, NodeId> head;
};

TapedForward forward_on_tape(Tape& tape, const ModelState& state, const Tensor& x);

/// Fresh head for `num_classes`, backbone copied bit-for-bit.
ModelState reinit_head(const ModelState& state, std::size_t num_classes, std::uint64_t seed);

/// Argmax predictions; ties break toward the lowest class index.
std::vector<int> predict(const ModelState& state, const Tensor& x);

double accuracy(const ModelState& state, const Tensor& x, const std::vector<int>& y);

/// Clean (eps = 0) training on a source task; the returned head is meant to
/// be discarded via reinit_head before fine-tuning. Warns on stderr if source
/// train accuracy ends below 60%.
ModelState pretrain_backbone(const ModelSpec& spec, const tasks::TaskData& source_task,
                             int epochs, const train::OptimizerConfig& optimizer_cfg,
                             std::uint64_t seed);

// Checkpoints are JSON (spec + flat parameter arrays) and round-trip
// 64-bit values bit-exactly.
void save_checkpoint(const ModelState& state, const std::string& path);
ModelState load_checkpoint(const std::string& path);

}  // namespace rftlab::models
