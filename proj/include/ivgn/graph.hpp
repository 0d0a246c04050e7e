// Copyright (c) 2026 the ivgn authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <functional>
#include <string>
#include <vector>

#include "ivgn/tensor.hpp"

namespace ivgn {

/// Reverse-mode tape. Ops append nodes in execution order; backward() walks
/// them in exact reverse, accumulating into Tensor::grad buffers.
///
/// A Graph is built per forward pass and is single-use: a second backward()
/// without re-execution is rejected.
template <class S>
class Graph {
 public:
  explicit Graph(bool recording = true) : recording_(recording) {}

  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  bool recording() const { return recording_; }

  /// Records one primitive. `backward` reads output.grad() and accumulates
  /// into the inputs' grad buffers; it captures whatever activations it needs.
  void record(const char* op, std::vector<Tensor<S>> inputs, Tensor<S> output,
              std::function<void()> backward) {
    if (!recording_) return;
    bool needed = false;
    for (const auto& in : inputs)
      if (in.requires_grad()) {
        needed = true;
        break;
      }
    if (!needed) return;
    output.set_requires_grad(true);
    nodes_.push_back(Node{op, std::move(inputs), std::move(output),
                          std::move(backward)});
  }

  void backward(Tensor<S> loss) {
    if (loss.size() != 1)
      throw UsageError("backward(): loss must be scalar, got shape " +
                       shape_str(loss.shape()));
    if (backward_run_)
      throw UsageError("backward(): graph already consumed; re-run forward");
    backward_run_ = true;
    loss.grad()[0] = S(1);
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
      if (it->output.grad_allocated()) it->backward();
    }
  }

  size_t node_count() const { return nodes_.size(); }

  const char* op_name(size_t i) const { return nodes_[i].op; }

 private:
  struct Node {
    const char* op;
    std::vector<Tensor<S>> inputs;
    Tensor<S> output;
    std::function<void()> backward;
  };

  std::vector<Node> nodes_;
  bool recording_;
  bool backward_run_ = false;
};

}  // namespace ivgn
