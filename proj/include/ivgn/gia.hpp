// Copyright (c) 2026 the ivgn authors
// SPDX-License-Identifier: Apache-2.0
//
// Globally-intensive attention: depth-view BNWA, space-view BNWA and
// pixel-view SimAM, composable in serial/parallel/mixed arrangements with
// one residual connection around the whole stack.

#pragma once

#include "ivgn/nn.hpp"
#include "ivgn/scheme.hpp"

namespace ivgn {

enum class ParallelFusion { mean, sum };

namespace detail {

/// |w| / sum(|w|): normalized non-negative weights that sum to 1.
template <class S>
Tensor<S> abs_normalized(Graph<S>& g, const Tensor<S>& w) {
  auto a = abs_(g, w);
  return divide(g, a, sum_all(g, a));
}

}  // namespace detail

/// Depth-view BNWA: batch-normalize per channel, scale channel c by
/// |gamma_c| / sum|gamma|, gate with sigmoid and multiply into the input.
template <class S>
Tensor<S> depth_bnwa(Graph<S>& g, const Tensor<S>& f, BatchNorm<S>& bn,
                     bool training) {
  if (f.rank() != 4) throw ShapeError("depth_bnwa: expects NCHW");
  const Index C = f.dim(1);
  if (bn.gamma.size() != C)
    throw ConfigError("depth_bnwa: params sized for " +
                      std::to_string(bn.gamma.size()) + " channels, input has " +
                      std::to_string(C));
  auto att = bn.forward(g, f, 1, training);
  auto w = reshape(g, detail::abs_normalized(g, bn.gamma), {C, 1, 1});
  return mul(g, f, sigmoid(g, mul(g, att, w)));
}

/// Space-view BNWA: flatten each map to H*W positions, batch-normalize per
/// position over (N, C), scale position j by |lambda_j| / sum|lambda|, gate
/// and multiply.
template <class S>
Tensor<S> space_bnwa(Graph<S>& g, const Tensor<S>& f, BatchNorm<S>& bn,
                     bool training) {
  if (f.rank() != 4) throw ShapeError("space_bnwa: expects NCHW");
  const Index N = f.dim(0), C = f.dim(1), H = f.dim(2), W = f.dim(3);
  if (bn.gamma.size() != H * W)
    throw ConfigError("space_bnwa: params sized for " +
                      std::to_string(bn.gamma.size()) + " positions, input has " +
                      std::to_string(H * W));
  auto x = reshape(g, f, {N, C, H * W});
  auto att = bn.forward(g, x, 2, training);
  auto w = detail::abs_normalized(g, bn.gamma);  // [H*W], trailing broadcast
  auto gate = reshape(g, sigmoid(g, mul(g, att, w)), {N, C, H, W});
  return mul(g, f, gate);
}

/// Pixel-view SimAM: parameter-free. Per channel, d_k = (x_k - mean)^2 and
/// 1/e_k = d_k / (4 * (sum(d) / (H*W - 1) + delta)) + 0.5; the attention is
/// sigmoid(1/e) applied elementwise.
template <class S>
Tensor<S> pixel_simam(Graph<S>& g, const Tensor<S>& f, S delta) {
  if (f.rank() != 4) throw ShapeError("pixel_simam: expects NCHW");
  if (delta <= S(0)) throw ConfigError("pixel_simam: delta must be positive");
  const Index H = f.dim(2), W = f.dim(3);
  if (H * W < 2)
    throw ConfigError("pixel_simam: needs H*W >= 2, got " + shape_str(f.shape()));
  auto mu = mean(g, f, {2, 3}, true);
  auto diff = sub(g, f, mu);
  auto d = mul(g, diff, diff);
  auto denom = scale(
      g,
      add_const(g, scale(g, sum(g, d, {2, 3}, true), S(1) / static_cast<S>(H * W - 1)),
                delta),
      S(4));
  auto e_inv = add_const(g, divide(g, d, denom), S(0.5));
  return mul(g, f, sigmoid(g, e_inv));
}

/// One GIA block instance: parameters for the submodules named by `spec`,
/// applied in the given arrangement with a residual around the whole stack.
template <class S>
struct GiaModule {
  GiaStackSpec spec;
  std::unique_ptr<BatchNorm<S>> depth_bn;  // per channel
  std::unique_ptr<BatchNorm<S>> space_bn;  // per spatial position
  S delta = S(1e-4);
  ParallelFusion fusion = ParallelFusion::mean;
  Index channels = 0, positions = 0;

  GiaModule() = default;
  GiaModule(GiaStackSpec spec_, Index channels_, Index positions_,
            S delta_ = S(1e-4), ParallelFusion fusion_ = ParallelFusion::mean,
            S bn_momentum = S(0.1))
      : spec(std::move(spec_)),
        delta(delta_),
        fusion(fusion_),
        channels(channels_),
        positions(positions_) {
    if (spec.uses(Submodule::depth))
      depth_bn = std::make_unique<BatchNorm<S>>(channels, S(1e-5), bn_momentum);
    if (spec.uses(Submodule::space))
      space_bn = std::make_unique<BatchNorm<S>>(positions, S(1e-5), bn_momentum);
  }

  Tensor<S> apply_one(Graph<S>& g, Submodule m, const Tensor<S>& x,
                      bool training) {
    switch (m) {
      case Submodule::depth:
        if (!depth_bn) throw ConfigError("gia: missing depth-view params");
        return depth_bnwa(g, x, *depth_bn, training);
      case Submodule::space:
        if (!space_bn) throw ConfigError("gia: missing space-view params");
        return space_bnwa(g, x, *space_bn, training);
      case Submodule::pixel:
        return pixel_simam(g, x, delta);
    }
    throw ConfigError("gia: unknown submodule");
  }

  Tensor<S> forward(Graph<S>& g, const Tensor<S>& f, bool training) {
    Tensor<S> feats = f;
    for (const auto& stage : spec.stages) {
      if (stage.size() == 1) {
        feats = apply_one(g, stage[0], feats, training);
      } else {
        // Parallel stage: every submodule reads the same stage input.
        Tensor<S> acc;
        for (size_t i = 0; i < stage.size(); ++i) {
          auto out = apply_one(g, stage[i], feats, training);
          acc = (i == 0) ? out : add(g, acc, out);
        }
        feats = fusion == ParallelFusion::mean
                    ? scale(g, acc, S(1) / static_cast<S>(stage.size()))
                    : acc;
      }
    }
    return add(g, f, feats);
  }

  void collect(ParamRegistry<S>& r, const std::string& prefix) {
    if (depth_bn) depth_bn->collect(r, prefix + ".depth_bn");
    if (space_bn) space_bn->collect(r, prefix + ".space_bn");
  }
};

}  // namespace ivgn
