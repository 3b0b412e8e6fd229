// Copyright 2026 The FedSplit Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef FEDSPLIT_AUTOGRAD_HPP
#define FEDSPLIT_AUTOGRAD_HPP

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "fedsplit/param_set.hpp"
#include "fedsplit/tensor.hpp"

namespace fedsplit {

class Graph;

// Handle to a node of a Graph. Cheap to copy; only valid while its Graph lives.
struct Var {
  Graph* graph = nullptr;
  std::size_t id = 0;

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
};

// Reverse-mode tape. Nodes are appended in evaluation order, so the node
// vector is already a topological order and backward walks it in reverse.
class Graph {
 public:
  using BackwardFn = std::function<void(Graph&, std::size_t self)>;

  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  Var constant(Tensor value);
  Var parameter(const std::string& name, Tensor value);

  // Registers every tensor of `params` as a named leaf.
  std::map<std::string, Var> parameters(const ParameterSet& params);

  // Gradients of a scalar loss for every registered parameter. Parameters the
  // loss does not reach get a zero tensor of the right shape.
  ParameterSet backward(Var loss);

  std::size_t size() const noexcept { return nodes_.size(); }

  // Used by op implementations.
  Var push(Tensor value, std::vector<std::size_t> inputs, BackwardFn backward);
  const Tensor& value(std::size_t id) const { return nodes_[id].value; }
  const Tensor& grad(std::size_t id) const { return nodes_[id].grad; }
  Tensor& grad_mut(std::size_t id);
  bool needs_grad(std::size_t id) const { return nodes_[id].needs_grad; }
  const std::vector<std::size_t>& inputs(std::size_t id) const { return nodes_[id].inputs; }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    std::vector<std::size_t> inputs;
    BackwardFn backward;
    std::string param_name;
    bool needs_grad = false;
  };

  std::vector<Node> nodes_;
  std::vector<std::size_t> param_ids_;
};

// ---- differentiable ops ----------------------------------------------------

Var matmul(Var a, Var b);
Var add(Var a, Var b);
// x + y with y repeated over x's rows: y must have x's column count and its
// numel must divide x's (bias over rows, positional table over a batch).
Var add_tiled(Var x, Var y);
Var mul(Var a, Var b);
Var scale(Var x, double factor);
Var sum(Var x);
Var gelu(Var x);
Var layer_norm(Var x, Var gamma, Var beta, double eps = 1e-5);

// Row gather from a [vocab x d] table. Ids are checked against vocab.
Var embedding(Var table, std::span<const std::int32_t> ids);

// Scaled dot-product attention for `batch` sequences packed row-wise in
// q/k/v ([batch*seq x d]). `key_mask[b*seq + j] == 0` marks padding; masked
// keys receive an additive -1e9 before the softmax.
Var attention(Var q, Var k, Var v, std::span<const std::uint8_t> key_mask, std::size_t batch,
              std::size_t heads);

// Mean over the non-pad rows of each sequence; a sequence with no non-pad
// rows falls back to the mean over all of its rows.
Var mean_pool(Var x, std::span<const std::uint8_t> mask, std::size_t batch);

// Mean negative log-softmax at the label. Logits are [B x C].
Var softmax_cross_entropy(Var logits, std::span<const int> labels);

// Mean squared error of a [B x 1] prediction.
Var mse_loss(Var pred, std::span<const double> targets);

// Plain (graph-free) forms used for evaluation and by tests.
double gelu_scalar(double x) noexcept;
Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps);

}  // namespace fedsplit

#endif  // FEDSPLIT_AUTOGRAD_HPP
