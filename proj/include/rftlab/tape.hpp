#pragma once

#include <array>
#include <cstddef>
#include <functional>
#include <vector>

#include "rftlab/tensor.hpp"

namespace rftlab {

// Forward ops shared by the recording and non-recording paths. The tape calls
// exactly these, so values are bitwise identical with and without a tape.
namespace ops {

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor add(const Tensor& a, const Tensor& b);  // same-shape elementwise sum
Tensor add_bias(const Tensor& x, const Tensor& b);
Tensor relu(const Tensor& x);
Tensor transpose(const Tensor& x);

struct XentResult {
  double loss;
  Tensor probs;  // row-wise softmax, cached for the backward pass
};

/// Mean over the batch of -log softmax(logits)[label], max-stabilized.
XentResult softmax_cross_entropy(const Tensor& logits, const std::vector<int>& labels);

}  // namespace ops

using NodeId = std::size_t;

/// Append-only reverse-mode tape. One tape per forward/backward cycle; only
/// first-order gradients are supported.
class Tape {
 public:
  /// Leaf node holding an input or parameter value.
  NodeId input(Tensor value);

  NodeId matmul(NodeId a, NodeId b);
  NodeId add(NodeId a, NodeId b);
  NodeId add_bias(NodeId x, NodeId b);
  NodeId relu(NodeId x);
  NodeId softmax_cross_entropy(NodeId logits, std::vector<int> labels);

  /// Seeds d(loss)/d(loss) = 1 and accumulates gradients for every node.
  /// The loss must be scalar.
  void backward(NodeId loss);

  const Tensor& value(NodeId id) const { return nodes_[id].value; }
  const Tensor& grad(NodeId id) const { return nodes_[id].grad; }
  std::size_t size() const { return nodes_.size(); }

 private:
  enum class Op { Input, MatMul, Add, AddBias, Relu, SoftmaxXent };

  struct Node {
    Op op;
    std::array<NodeId, 2> parents{0, 0};
    Tensor value;
    Tensor grad;
    std::vector<int> labels;  // SoftmaxXent only
    Tensor cache;             // SoftmaxXent: softmax probs
  };

  NodeId push(Node node);

  std::vector<Node> nodes_;
};

/// Max over coordinates of |analytic - numeric| / max(1, |numeric|), where the
/// numeric gradient is the central difference (f(x+h e_i) - f(x-h e_i)) / 2h.
/// `f` builds a scalar loss on the given tape from the input node.
double grad_check(const std::function<NodeId(Tape&, NodeId)>& f, const Tensor& point, double h);

}  // namespace rftlab
