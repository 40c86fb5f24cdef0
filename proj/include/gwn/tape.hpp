#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "gwn/tensor.hpp"

namespace gwn {

using NodeId = std::int32_t;

/// Reverse-mode autodiff over a flat tape of primitive applications. Values
/// are computed eagerly; the tape is rebuilt for every forward pass. Every
/// primitive checks that its output is finite and throws otherwise.
class Tape {
 public:
  static constexpr double kLayerNormEps = 1e-5;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Leaf holding data or a parameter; gradients can be requested for any leaf.
  NodeId input(Tensor value);

  const Tensor& value(NodeId id) const { return nodes_[static_cast<std::size_t>(id)].value; }
  std::size_t size() const { return nodes_.size(); }
  void clear();

  NodeId matmul(NodeId a, NodeId b);
  NodeId transpose(NodeId a);
  NodeId add(NodeId a, NodeId b);
  NodeId sub(NodeId a, NodeId b);
  NodeId hadamard(NodeId a, NodeId b);
  NodeId scale(NodeId a, double c);
  NodeId relu(NodeId a);
  NodeId sigmoid(NodeId a);
  NodeId tanh(NodeId a);
  NodeId add_rowwise(NodeId x, NodeId bias);  // x: m x n, bias: {n}
  NodeId softmax_rows(NodeId x);
  NodeId layer_norm(NodeId x, NodeId gain, NodeId bias);
  NodeId concat_rows(std::span<const NodeId> parts);
  NodeId concat_cols(std::span<const NodeId> parts);
  NodeId slice_rows(NodeId x, int row_begin, int row_end);
  NodeId reshape(NodeId x, std::vector<int> shape);
  /// Elementwise sum of same-shaped operands. Each output entry is summed in
  /// ascending value order, so any permutation of the operands produces a
  /// bit-identical result.
  NodeId add_n(std::span<const NodeId> parts);
  NodeId sum(NodeId x);  // -> {1}
  /// Mean over rows of -log softmax(logits)[label]; stable log-sum-exp form.
  NodeId cross_entropy(NodeId logits, std::vector<int> labels);

  /// Gradients of a scalar node with respect to the given nodes. Nodes not on
  /// any path to the loss get zero gradients of their value's shape.
  std::vector<Tensor> backward(NodeId loss, std::span<const NodeId> wrt);

 private:
  using PullFn = std::function<void(Tape&, NodeId, const Tensor&)>;

  struct Node {
    Tensor value;
    std::vector<NodeId> parents;
    PullFn pull;  // null for leaves
  };

  NodeId push(Tensor value, std::vector<NodeId> parents, PullFn pull, const char* op);
  Tensor& grad(NodeId id);  // zero-initialised on first touch during backward

  std::vector<Node> nodes_;
  std::vector<Tensor> grads_;
};

}  // namespace gwn
