// Copyright (c) 2026 the ivgn authors
// SPDX-License-Identifier: Apache-2.0
//
// Parameter-owning building blocks. Modules register their tensors with a
// ParamRegistry under hierarchical dotted names; the registry is the single
// source of truth for checkpointing, optimizer groups and parameter counts.

#pragma once

#include <string>

#include "ivgn/nn_ops.hpp"
#include "ivgn/random.hpp"

namespace ivgn {

template <class S>
struct ParamRegistry {
  struct Entry {
    std::string name;
    Tensor<S> tensor;
    bool trainable;
  };
  std::vector<Entry> entries;

  void add(std::string name, Tensor<S> t, bool trainable = true) {
    for (const auto& e : entries)
      if (e.name == name) throw ConfigError("duplicate parameter name " + name);
    if (trainable) t.set_requires_grad(true);
    entries.push_back({std::move(name), std::move(t), trainable});
  }

  Index trainable_count() const {
    Index n = 0;
    for (const auto& e : entries)
      if (e.trainable) n += e.tensor.size();
    return n;
  }

  std::vector<Tensor<S>> trainable() const {
    std::vector<Tensor<S>> out;
    for (const auto& e : entries)
      if (e.trainable) out.push_back(e.tensor);
    return out;
  }
};

template <class S>
struct Linear {
  Tensor<S> weight;  // [in, out]
  Tensor<S> bias;    // [out], optional
  bool has_bias = true;

  Linear() = default;
  Linear(Index in, Index out, Rng& rng, bool with_bias = true)
      : has_bias(with_bias) {
    weight = Tensor<S>::zeros({in, out});
    fill_xavier(weight, rng, in, out);
    if (with_bias) bias = Tensor<S>::zeros({out});
  }

  Tensor<S> forward(Graph<S>& g, const Tensor<S>& x) const {
    auto y = matmul(g, x, weight);
    return has_bias ? add(g, y, bias) : y;
  }

  void collect(ParamRegistry<S>& r, const std::string& prefix) const {
    r.add(prefix + ".weight", weight);
    if (has_bias) r.add(prefix + ".bias", bias);
  }
};

template <class S>
struct BatchNorm {
  Tensor<S> gamma, beta;
  RunningStats<S> stats;
  S eps;

  explicit BatchNorm(Index features, S eps_ = S(1e-5), S momentum = S(0.1))
      : gamma(Tensor<S>::full({features}, S(1))),
        beta(Tensor<S>::zeros({features})),
        stats(features, momentum),
        eps(eps_) {}

  Tensor<S> forward(Graph<S>& g, const Tensor<S>& x, int feature_axis,
                    bool training) {
    return batch_norm(g, x, feature_axis, gamma, beta, eps, training, &stats);
  }

  void collect(ParamRegistry<S>& r, const std::string& prefix) {
    r.add(prefix + ".gamma", gamma);
    r.add(prefix + ".beta", beta);
    // Buffers ride along in checkpoints but are not trainable parameters.
    r.add(prefix + ".running_mean", stats.mean, false);
    r.add(prefix + ".running_var", stats.var, false);
  }
};

template <class S>
struct Conv2d {
  Tensor<S> weight;  // [out, in, k, k]
  Tensor<S> bias;    // [out], optional
  bool has_bias;
  Index stride, pad;

  Conv2d() : has_bias(false), stride(1), pad(0) {}
  Conv2d(Index in, Index out, Index k, Index stride_, Index pad_, Rng& rng,
         bool with_bias = false)
      : has_bias(with_bias), stride(stride_), pad(pad_) {
    weight = Tensor<S>::zeros({out, in, k, k});
    fill_he(weight, rng, in * k * k);
    if (with_bias) bias = Tensor<S>::zeros({out});
  }

  Tensor<S> forward(Graph<S>& g, const Tensor<S>& x) const {
    return conv2d(g, x, weight, has_bias ? &bias : nullptr, stride, pad);
  }

  void collect(ParamRegistry<S>& r, const std::string& prefix) const {
    r.add(prefix + ".weight", weight);
    if (has_bias) r.add(prefix + ".bias", bias);
  }
};

template <class S>
struct Embedding {
  Tensor<S> table;  // [vocab, dim]

  Embedding() = default;
  Embedding(Index vocab, Index dim, Rng& rng) {
    table = Tensor<S>::zeros({vocab, dim});
    fill_uniform(table, rng, S(-0.1), S(0.1));
  }

  Tensor<S> forward(Graph<S>& g, const std::vector<Index>& ids) const {
    return embedding_lookup(g, table, ids);
  }

  void collect(ParamRegistry<S>& r, const std::string& prefix) const {
    r.add(prefix + ".table", table);
  }
};

/// Layer norm over the last axis, composed from tape primitives so the
/// backward pass comes for free.
template <class S>
struct LayerNorm {
  Tensor<S> gamma, beta;
  S eps;

  LayerNorm() : eps(S(1e-5)) {}
  explicit LayerNorm(Index dim, S eps_ = S(1e-5))
      : gamma(Tensor<S>::full({dim}, S(1))),
        beta(Tensor<S>::zeros({dim})),
        eps(eps_) {}

  Tensor<S> forward(Graph<S>& g, const Tensor<S>& x) const {
    const int last = x.rank() - 1;
    auto mu = mean(g, x, {last}, true);
    auto d = sub(g, x, mu);
    auto var = mean(g, mul(g, d, d), {last}, true);
    auto inv = divide(g, Tensor<S>::scalar(S(1)),
                      sqrt_(g, add_const(g, var, eps)));
    return add(g, mul(g, mul(g, d, inv), gamma), beta);
  }

  void collect(ParamRegistry<S>& r, const std::string& prefix) const {
    r.add(prefix + ".gamma", gamma);
    r.add(prefix + ".beta", beta);
  }
};

}  // namespace ivgn
