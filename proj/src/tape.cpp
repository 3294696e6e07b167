#include "rftlab/tape.hpp"

#include <cmath>
#include <stdexcept>

#include "rftlab/kernels.hpp"

namespace rftlab {

// ===========================================================================
// Forward ops
// ===========================================================================

namespace ops {

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.cols() != b.rows()) {
    throw ShapeError("matmul: incompatible shapes " + a.shape_string() + " x " +
                     b.shape_string());
  }
  Tensor c({a.rows(), b.cols()});
  kernels::matmul(c.data(), a.data(), b.data(), a.rows(), a.cols(), b.cols());
  return c;
}

Tensor add(const Tensor& a, const Tensor& b) {
  if (!a.same_shape(b)) {
    throw ShapeError("add: shape mismatch " + a.shape_string() + " + " + b.shape_string());
  }
  Tensor y(a.shape());
  kernels::add(y.data(), a.data(), b.data(), a.numel());
  return y;
}

Tensor add_bias(const Tensor& x, const Tensor& b) {
  if (x.rank() != 2 || b.rank() != 1 || x.cols() != b.shape()[0]) {
    throw ShapeError("add_bias: incompatible shapes " + x.shape_string() + " + " +
                     b.shape_string());
  }
  Tensor y({x.rows(), x.cols()});
  kernels::add_rowwise(y.data(), x.data(), b.data(), x.rows(), x.cols());
  return y;
}

Tensor relu(const Tensor& x) {
  Tensor y(x.shape());
  kernels::relu(y.data(), x.data(), x.numel());
  return y;
}

Tensor transpose(const Tensor& x) {
  Tensor y({x.cols(), x.rows()});
  for (std::size_t i = 0; i < x.rows(); ++i) {
    for (std::size_t j = 0; j < x.cols(); ++j) y.at(j, i) = x.at(i, j);
  }
  return y;
}

XentResult softmax_cross_entropy(const Tensor& logits, const std::vector<int>& labels) {
  const std::size_t m = logits.rows();
  const std::size_t k = logits.cols();
  if (labels.size() != m || m == 0) {
    throw ShapeError("softmax_cross_entropy: need one label per row");
  }
  for (int y : labels) {
    if (y < 0 || static_cast<std::size_t>(y) >= k) {
      throw std::domain_error("softmax_cross_entropy: label out of range");
    }
  }
  Tensor probs({m, k});
  double loss_sum = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    const double* row = logits.data() + i * k;
    double mx = row[0];
    for (std::size_t j = 1; j < k; ++j) mx = row[j] > mx ? row[j] : mx;
    double z = 0.0;
    double* p = probs.data() + i * k;
    for (std::size_t j = 0; j < k; ++j) {
      p[j] = std::exp(row[j] - mx);
      z += p[j];
    }
    for (std::size_t j = 0; j < k; ++j) p[j] /= z;
    const std::size_t y = static_cast<std::size_t>(labels[i]);
    loss_sum += -(row[y] - mx - std::log(z));
  }
  return XentResult{loss_sum / static_cast<double>(m), std::move(probs)};
}

}  // namespace ops

// ===========================================================================
// Tape
// ===========================================================================

NodeId Tape::push(Node node) {
  nodes_.push_back(std::move(node));
  return nodes_.size() - 1;
}

NodeId Tape::input(Tensor value) {
  Node n;
  n.op = Op::Input;
  n.value = std::move(value);
  return push(std::move(n));
}

NodeId Tape::matmul(NodeId a, NodeId b) {
  Node n;
  n.op = Op::MatMul;
  n.parents = {a, b};
  n.value = ops::matmul(nodes_[a].value, nodes_[b].value);
  return push(std::move(n));
}

NodeId Tape::add(NodeId a, NodeId b) {
  Node n;
  n.op = Op::Add;
  n.parents = {a, b};
  n.value = ops::add(nodes_[a].value, nodes_[b].value);
  return push(std::move(n));
}

NodeId Tape::add_bias(NodeId x, NodeId b) {
  Node n;
  n.op = Op::AddBias;
  n.parents = {x, b};
  n.value = ops::add_bias(nodes_[x].value, nodes_[b].value);
  return push(std::move(n));
}

NodeId Tape::relu(NodeId x) {
  Node n;
  n.op = Op::Relu;
  n.parents = {x, x};
  n.value = ops::relu(nodes_[x].value);
  return push(std::move(n));
}

NodeId Tape::softmax_cross_entropy(NodeId logits, std::vector<int> labels) {
  ops::XentResult r = ops::softmax_cross_entropy(nodes_[logits].value, labels);
  Node n;
  n.op = Op::SoftmaxXent;
  n.parents = {logits, logits};
  n.value = Tensor::scalar(r.loss);
  n.labels = std::move(labels);
  n.cache = std::move(r.probs);
  return push(std::move(n));
}

void Tape::backward(NodeId loss) {
  if (nodes_[loss].value.numel() != 1) {
    throw std::logic_error("backward: loss node must be scalar");
  }
  for (Node& n : nodes_) n.grad = Tensor(n.value.shape());
  nodes_[loss].grad[0] = 1.0;

  // Parents always precede children, so one reverse sweep suffices.
  for (std::size_t idx = nodes_.size(); idx-- > 0;) {
    Node& n = nodes_[idx];
    switch (n.op) {
      case Op::Input:
        break;
      case Op::MatMul: {
        const Tensor& a = nodes_[n.parents[0]].value;
        const Tensor& b = nodes_[n.parents[1]].value;
        Tensor da = ops::matmul(n.grad, ops::transpose(b));
        Tensor db = ops::matmul(ops::transpose(a), n.grad);
        kernels::add(nodes_[n.parents[0]].grad.data(), nodes_[n.parents[0]].grad.data(),
                     da.data(), da.numel());
        kernels::add(nodes_[n.parents[1]].grad.data(), nodes_[n.parents[1]].grad.data(),
                     db.data(), db.numel());
        break;
      }
      case Op::Add: {
        for (int side = 0; side < 2; ++side) {
          Tensor& dp = nodes_[n.parents[side]].grad;
          kernels::add(dp.data(), dp.data(), n.grad.data(), n.grad.numel());
        }
        break;
      }
      case Op::AddBias: {
        Tensor& dx = nodes_[n.parents[0]].grad;
        kernels::add(dx.data(), dx.data(), n.grad.data(), n.grad.numel());
        Tensor db({n.grad.cols()});
        kernels::col_sum(db.data(), n.grad.data(), n.grad.rows(), n.grad.cols());
        Tensor& bg = nodes_[n.parents[1]].grad;
        kernels::add(bg.data(), bg.data(), db.data(), db.numel());
        break;
      }
      case Op::Relu: {
        const Tensor& x = nodes_[n.parents[0]].value;
        kernels::relu_backward(nodes_[n.parents[0]].grad.data(), x.data(), n.grad.data(),
                               n.grad.numel());
        break;
      }
      case Op::SoftmaxXent: {
        const double upstream = n.grad[0];
        const Tensor& probs = n.cache;
        Tensor& dl = nodes_[n.parents[0]].grad;
        const std::size_t m = probs.rows();
        const std::size_t k = probs.cols();
        const double scale = upstream / static_cast<double>(m);
        for (std::size_t i = 0; i < m; ++i) {
          const double* p = probs.data() + i * k;
          double* g = dl.data() + i * k;
          const std::size_t y = static_cast<std::size_t>(n.labels[i]);
          for (std::size_t j = 0; j < k; ++j) {
            g[j] += scale * (p[j] - (j == y ? 1.0 : 0.0));
          }
        }
        break;
      }
    }
  }
}

// ===========================================================================
// Gradient checking
// ===========================================================================

double grad_check(const std::function<NodeId(Tape&, NodeId)>& f, const Tensor& point, double h) {
  if (!(h > 0.0)) throw std::invalid_argument("grad_check: h must be positive");

  Tape tape;
  NodeId x = tape.input(point);
  NodeId loss = f(tape, x);
  tape.backward(loss);
  const Tensor analytic = tape.grad(x);

  auto eval = [&f](const Tensor& p) {
    Tape t;
    NodeId in = t.input(p);
    return t.value(f(t, in))[0];
  };

  double max_rel = 0.0;
  Tensor probe = point;
  for (std::size_t i = 0; i < point.numel(); ++i) {
    const double orig = probe[i];
    probe[i] = orig + h;
    const double fp = eval(probe);
    probe[i] = orig - h;
    const double fm = eval(probe);
    probe[i] = orig;
    const double numeric = (fp - fm) / (2.0 * h);
    const double denom = std::abs(numeric) > 1.0 ? std::abs(numeric) : 1.0;
    const double rel = std::abs(analytic[i] - numeric) / denom;
    max_rel = rel > max_rel ? rel : max_rel;
  }
  return max_rel;
}

}  // namespace rftlab
