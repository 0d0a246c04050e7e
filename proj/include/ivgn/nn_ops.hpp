// Copyright (c) 2026 the ivgn authors
// SPDX-License-Identifier: Apache-2.0
//
// Network-level primitives: softmax, batch norm, conv, pooling, embedding,
// fused cross-entropy and dropout.

#pragma once

#include <random>

#include "ivgn/linalg.hpp"

namespace ivgn {

// ---- softmax ---------------------------------------------------------------

namespace detail {

template <class S, class Fn>
void for_each_lane(const Shape& shape, int axis, Fn&& fn) {
  Index outer = 1, inner = 1;
  const Index len = shape[static_cast<size_t>(axis)];
  for (int i = 0; i < axis; ++i) outer *= shape[static_cast<size_t>(i)];
  for (size_t i = static_cast<size_t>(axis) + 1; i < shape.size(); ++i)
    inner *= shape[i];
  for (Index o = 0; o < outer; ++o)
    for (Index in = 0; in < inner; ++in) fn(o * len * inner + in, inner, len);
}

}  // namespace detail

/// Max-subtracted softmax along `axis`.
template <class S>
Tensor<S> softmax(Graph<S>& g, const Tensor<S>& x, int axis) {
  detail::check_axis(axis, x.rank());
  auto out = Tensor<S>::zeros(x.shape());
  auto* po = out.values_mut().data();
  const auto* px = x.values().data();
  detail::for_each_lane<S>(x.shape(), axis, [&](Index base, Index st, Index len) {
    S mx = px[base];
    for (Index j = 1; j < len; ++j) mx = std::max(mx, px[base + j * st]);
    S total = S(0);
    for (Index j = 0; j < len; ++j) {
      S e = std::exp(px[base + j * st] - mx);
      po[base + j * st] = e;
      total += e;
    }
    for (Index j = 0; j < len; ++j) po[base + j * st] /= total;
  });
  Shape xs = x.shape();
  g.record("softmax", {x}, out, [=]() mutable {
    auto go = out.grad();
    auto gx = Tensor<S>(x).grad();
    detail::for_each_lane<S>(xs, axis, [&](Index base, Index st, Index len) {
      S dot = S(0);
      for (Index j = 0; j < len; ++j)
        dot += go[base + j * st] * po[base + j * st];
      for (Index j = 0; j < len; ++j)
        gx[base + j * st] += po[base + j * st] * (go[base + j * st] - dot);
    });
  });
  return out;
}

/// Numerically stable log softmax along `axis`.
template <class S>
Tensor<S> log_softmax(Graph<S>& g, const Tensor<S>& x, int axis) {
  detail::check_axis(axis, x.rank());
  auto out = Tensor<S>::zeros(x.shape());
  auto* po = out.values_mut().data();
  const auto* px = x.values().data();
  detail::for_each_lane<S>(x.shape(), axis, [&](Index base, Index st, Index len) {
    S mx = px[base];
    for (Index j = 1; j < len; ++j) mx = std::max(mx, px[base + j * st]);
    S total = S(0);
    for (Index j = 0; j < len; ++j) total += std::exp(px[base + j * st] - mx);
    const S lse = mx + std::log(total);
    for (Index j = 0; j < len; ++j) po[base + j * st] = px[base + j * st] - lse;
  });
  Shape xs = x.shape();
  g.record("log_softmax", {x}, out, [=]() mutable {
    auto go = out.grad();
    auto gx = Tensor<S>(x).grad();
    detail::for_each_lane<S>(xs, axis, [&](Index base, Index st, Index len) {
      S gsum = S(0);
      for (Index j = 0; j < len; ++j) gsum += go[base + j * st];
      for (Index j = 0; j < len; ++j)
        gx[base + j * st] +=
            go[base + j * st] - std::exp(po[base + j * st]) * gsum;
    });
  });
  return out;
}

// ---- batch normalization ----------------------------------------------------

/// Exponential-moving-average statistics used by eval-mode batch norm.
/// Stored as tensors so they participate in checkpoints as buffers.
template <class S>
struct RunningStats {
  Tensor<S> mean, var;
  S momentum = S(0.1);

  explicit RunningStats(Index features, S momentum_ = S(0.1))
      : mean(Tensor<S>::zeros({features})),
        var(Tensor<S>::full({features}, S(1))),
        momentum(momentum_) {}
};

/// Batch normalization over the axis `feature_axis`; statistics are computed
/// over all remaining (batch) axes. Training mode uses biased batch variance
/// and updates `rs` in place; eval mode normalizes with the running stats.
template <class S>
Tensor<S> batch_norm(Graph<S>& g, const Tensor<S>& x, int feature_axis,
                     const Tensor<S>& gamma, const Tensor<S>& beta, S eps,
                     bool training, RunningStats<S>* rs = nullptr) {
  detail::check_axis(feature_axis, x.rank());
  if (eps <= S(0)) throw ConfigError("batch_norm: eps must be positive");
  const Index F = x.dim(feature_axis);
  if (gamma.size() != F || beta.size() != F)
    throw ConfigError("batch_norm: gamma/beta size " +
                      std::to_string(gamma.size()) + "/" +
                      std::to_string(beta.size()) + " != feature count " +
                      std::to_string(F));
  const Index n = x.size();
  const Index M = n / F;  // batch elements per feature
  Index inner = 1;
  for (int i = feature_axis + 1; i < x.rank(); ++i) inner *= x.dim(i);
  auto feat_of = [F, inner](Index i) { return (i / inner) % F; };

  const auto* px = x.values().data();
  std::vector<S> mu(static_cast<size_t>(F), S(0)),
      var(static_cast<size_t>(F), S(0));
  if (training) {
    for (Index i = 0; i < n; ++i) mu[static_cast<size_t>(feat_of(i))] += px[i];
    for (auto& v : mu) v /= static_cast<S>(M);
    for (Index i = 0; i < n; ++i) {
      S d = px[i] - mu[static_cast<size_t>(feat_of(i))];
      var[static_cast<size_t>(feat_of(i))] += d * d;
    }
    for (auto& v : var) v /= static_cast<S>(M);
    if (rs) {
      auto rm = rs->mean.values_mut();
      auto rv = rs->var.values_mut();
      for (Index f = 0; f < F; ++f) {
        rm[f] = (S(1) - rs->momentum) * rm[f] +
                rs->momentum * mu[static_cast<size_t>(f)];
        rv[f] = (S(1) - rs->momentum) * rv[f] +
                rs->momentum * var[static_cast<size_t>(f)];
      }
    }
  } else {
    if (!rs) throw ConfigError("batch_norm: eval mode requires running stats");
    std::copy(rs->mean.values().begin(), rs->mean.values().end(), mu.begin());
    std::copy(rs->var.values().begin(), rs->var.values().end(), var.begin());
  }

  std::vector<S> inv_std(static_cast<size_t>(F));
  for (Index f = 0; f < F; ++f)
    inv_std[static_cast<size_t>(f)] =
        S(1) / std::sqrt(var[static_cast<size_t>(f)] + eps);

  // Save normalized activations for the backward pass.
  auto xhat = std::make_shared<std::vector<S>>(static_cast<size_t>(n));
  auto out = Tensor<S>::zeros(x.shape());
  auto* po = out.values_mut().data();
  const auto* pg = gamma.values().data();
  const auto* pb = beta.values().data();
  for (Index i = 0; i < n; ++i) {
    const size_t f = static_cast<size_t>(feat_of(i));
    S h = (px[i] - mu[f]) * inv_std[f];
    (*xhat)[static_cast<size_t>(i)] = h;
    po[i] = pg[f] * h + pb[f];
  }

  g.record("batch_norm", {x, gamma, beta}, out, [=]() mutable {
    auto go = out.grad();
    if (gamma.requires_grad()) {
      auto gg = Tensor<S>(gamma).grad();
      for (Index i = 0; i < n; ++i)
        gg[feat_of(i)] += go[i] * (*xhat)[static_cast<size_t>(i)];
    }
    if (beta.requires_grad()) {
      auto gb = Tensor<S>(beta).grad();
      for (Index i = 0; i < n; ++i) gb[feat_of(i)] += go[i];
    }
    if (!x.requires_grad()) return;
    auto gx = Tensor<S>(x).grad();
    if (!training) {
      for (Index i = 0; i < n; ++i) {
        const size_t f = static_cast<size_t>(feat_of(i));
        gx[static_cast<size_t>(i)] += go[i] * pg[f] * inv_std[f];
      }
      return;
    }
    // Training mode: gradients flow through the batch statistics.
    std::vector<S> sum_g(static_cast<size_t>(F), S(0)),
        sum_gh(static_cast<size_t>(F), S(0));
    for (Index i = 0; i < n; ++i) {
      const size_t f = static_cast<size_t>(feat_of(i));
      sum_g[f] += go[i];
      sum_gh[f] += go[i] * (*xhat)[static_cast<size_t>(i)];
    }
    for (Index i = 0; i < n; ++i) {
      const size_t f = static_cast<size_t>(feat_of(i));
      const S h = (*xhat)[static_cast<size_t>(i)];
      gx[static_cast<size_t>(i)] +=
          pg[f] * inv_std[f] *
          (go[i] - sum_g[f] / static_cast<S>(M) -
           h * sum_gh[f] / static_cast<S>(M));
    }
  });
  return out;
}

// ---- convolution and pooling -------------------------------------------------

namespace detail {

// x: [Cin,H,W] (one sample) -> cols: [Cin*kh*kw, Ho*Wo]
template <class S>
void im2col(const S* x, Index cin, Index h, Index w, Index kh, Index kw,
            Index stride, Index pad, Index ho, Index wo, S* cols) {
  const Index ckk = cin * kh * kw;
  for (Index c = 0; c < ckk; ++c) {
    const Index ci = c / (kh * kw);
    const Index dy = (c / kw) % kh;
    const Index dx = c % kw;
    for (Index oy = 0; oy < ho; ++oy) {
      const Index iy = oy * stride - pad + dy;
      for (Index ox = 0; ox < wo; ++ox) {
        const Index ix = ox * stride - pad + dx;
        cols[c * ho * wo + oy * wo + ox] =
            (iy >= 0 && iy < h && ix >= 0 && ix < w)
                ? x[(ci * h + iy) * w + ix]
                : S(0);
      }
    }
  }
}

template <class S>
void col2im_add(const S* cols, Index cin, Index h, Index w, Index kh, Index kw,
                Index stride, Index pad, Index ho, Index wo, S* x) {
  const Index ckk = cin * kh * kw;
  for (Index c = 0; c < ckk; ++c) {
    const Index ci = c / (kh * kw);
    const Index dy = (c / kw) % kh;
    const Index dx = c % kw;
    for (Index oy = 0; oy < ho; ++oy) {
      const Index iy = oy * stride - pad + dy;
      if (iy < 0 || iy >= h) continue;
      for (Index ox = 0; ox < wo; ++ox) {
        const Index ix = ox * stride - pad + dx;
        if (ix < 0 || ix >= w) continue;
        x[(ci * h + iy) * w + ix] += cols[c * ho * wo + oy * wo + ox];
      }
    }
  }
}

}  // namespace detail

/// 2-d convolution, NCHW x [Cout,Cin,kh,kw]. The output size must divide
/// exactly: (H + 2*pad - kh) % stride == 0 (and likewise for W).
template <class S>
Tensor<S> conv2d(Graph<S>& g, const Tensor<S>& x, const Tensor<S>& kernel,
                 const Tensor<S>* bias, Index stride, Index pad) {
  if (x.rank() != 4 || kernel.rank() != 4 || x.dim(1) != kernel.dim(1))
    throw ShapeError("conv2d: incompatible shapes " + shape_str(x.shape()) +
                     " and " + shape_str(kernel.shape()));
  if (stride < 1 || pad < 0) throw ConfigError("conv2d: bad stride/pad");
  const Index N = x.dim(0), cin = x.dim(1), h = x.dim(2), w = x.dim(3);
  const Index cout = kernel.dim(0), kh = kernel.dim(2), kw = kernel.dim(3);
  if (kh > h + 2 * pad || kw > w + 2 * pad)
    throw ConfigError("conv2d: kernel larger than padded input");
  if ((h + 2 * pad - kh) % stride != 0 || (w + 2 * pad - kw) % stride != 0)
    throw ConfigError("conv2d: output size not exact for input " +
                      shape_str(x.shape()) + ", kernel " +
                      shape_str(kernel.shape()) + ", stride " +
                      std::to_string(stride) + ", pad " + std::to_string(pad));
  const Index ho = (h + 2 * pad - kh) / stride + 1;
  const Index wo = (w + 2 * pad - kw) / stride + 1;
  const Index ckk = cin * kh * kw;
  if (bias && bias->size() != cout)
    throw ConfigError("conv2d: bias size != out channels");

  auto cols = std::make_shared<std::vector<S>>(
      static_cast<size_t>(N * ckk * ho * wo));
  auto out = Tensor<S>::zeros({N, cout, ho, wo});
  const auto* px = x.values().data();
  auto* po = out.values_mut().data();
  detail::ConstMatMap<S> W(kernel.values().data(), cout, ckk);
  for (Index nI = 0; nI < N; ++nI) {
    S* col_n = cols->data() + nI * ckk * ho * wo;
    detail::im2col(px + nI * cin * h * w, cin, h, w, kh, kw, stride, pad, ho,
                   wo, col_n);
    detail::ConstMatMap<S> C(col_n, ckk, ho * wo);
    detail::MatMap<S>(po + nI * cout * ho * wo, cout, ho * wo).noalias() =
        W * C;
  }
  if (bias) {
    const auto* pbv = bias->values().data();
    for (Index nI = 0; nI < N; ++nI)
      for (Index c = 0; c < cout; ++c) {
        S* dst = po + (nI * cout + c) * ho * wo;
        for (Index i = 0; i < ho * wo; ++i) dst[i] += pbv[c];
      }
  }

  std::vector<Tensor<S>> inputs = {x, kernel};
  Tensor<S> bias_t;
  const bool has_bias = bias != nullptr;
  if (has_bias) {
    bias_t = *bias;
    inputs.push_back(bias_t);
  }
  g.record("conv2d", inputs, out, [=]() mutable {
    auto go = Tensor<S>(out).grad();
    for (Index nI = 0; nI < N; ++nI) {
      detail::ConstMatMap<S> G(go.data() + nI * cout * ho * wo, cout, ho * wo);
      detail::ConstMatMap<S> C(cols->data() + nI * ckk * ho * wo, ckk, ho * wo);
      if (kernel.requires_grad())
        detail::MatMap<S>(Tensor<S>(kernel).grad().data(), cout, ckk)
            .noalias() += G * C.transpose();
      if (x.requires_grad()) {
        Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>
            dcols = detail::ConstMatMap<S>(kernel.values().data(), cout, ckk)
                        .transpose() *
                    G;
        detail::col2im_add(dcols.data(), cin, h, w, kh, kw, stride, pad, ho,
                           wo, Tensor<S>(x).grad().data() + nI * cin * h * w);
      }
    }
    if (has_bias && bias_t.requires_grad()) {
      auto gb = bias_t.grad();
      for (Index nI = 0; nI < N; ++nI)
        for (Index c = 0; c < cout; ++c) {
          const S* src = go.data() + (nI * cout + c) * ho * wo;
          for (Index i = 0; i < ho * wo; ++i) gb[c] += src[i];
        }
    }
  });
  return out;
}

template <class S>
Tensor<S> conv2d(Graph<S>& g, const Tensor<S>& x, const Tensor<S>& kernel,
                 Index stride, Index pad) {
  return conv2d(g, x, kernel, static_cast<const Tensor<S>*>(nullptr), stride,
                pad);
}

/// Average pooling with square window `k`, stride `k` (exact tiling required).
template <class S>
Tensor<S> avg_pool2d(Graph<S>& g, const Tensor<S>& x, Index k) {
  if (x.rank() != 4) throw ShapeError("avg_pool2d: expects NCHW");
  const Index N = x.dim(0), C = x.dim(1), h = x.dim(2), w = x.dim(3);
  if (k < 1 || h % k != 0 || w % k != 0)
    throw ConfigError("avg_pool2d: window " + std::to_string(k) +
                      " does not tile " + shape_str(x.shape()));
  const Index ho = h / k, wo = w / k;
  auto out = Tensor<S>::zeros({N, C, ho, wo});
  auto* po = out.values_mut().data();
  const auto* px = x.values().data();
  const S inv = S(1) / static_cast<S>(k * k);
  for (Index nc = 0; nc < N * C; ++nc)
    for (Index oy = 0; oy < ho; ++oy)
      for (Index ox = 0; ox < wo; ++ox) {
        S acc = S(0);
        for (Index dy = 0; dy < k; ++dy)
          for (Index dx = 0; dx < k; ++dx)
            acc += px[(nc * h + oy * k + dy) * w + ox * k + dx];
        po[(nc * ho + oy) * wo + ox] = acc * inv;
      }
  g.record("avg_pool2d", {x}, out, [=]() mutable {
    auto go = out.grad();
    auto gx = Tensor<S>(x).grad();
    for (Index nc = 0; nc < N * C; ++nc)
      for (Index oy = 0; oy < ho; ++oy)
        for (Index ox = 0; ox < wo; ++ox) {
          const S v = go[(nc * ho + oy) * wo + ox] * inv;
          for (Index dy = 0; dy < k; ++dy)
            for (Index dx = 0; dx < k; ++dx)
              gx[(nc * h + oy * k + dy) * w + ox * k + dx] += v;
        }
  });
  return out;
}

// ---- embeddings and loss ------------------------------------------------------

/// Rows of `table` [V,D] selected by token ids; backward accumulates into the
/// selected rows.
template <class S>
Tensor<S> embedding_lookup(Graph<S>& g, const Tensor<S>& table,
                           const std::vector<Index>& ids) {
  if (table.rank() != 2) throw ShapeError("embedding_lookup: table must be 2-d");
  const Index V = table.dim(0), D = table.dim(1);
  for (Index id : ids)
    if (id < 0 || id >= V)
      throw Error("embedding_lookup: index " + std::to_string(id) +
                  " out of vocabulary (size " + std::to_string(V) + ")");
  auto out = Tensor<S>::zeros({static_cast<Index>(ids.size()), D});
  auto* po = out.values_mut().data();
  const auto* pt = table.values().data();
  for (size_t r = 0; r < ids.size(); ++r)
    std::memcpy(po + r * D, pt + ids[r] * D, static_cast<size_t>(D) * sizeof(S));
  g.record("embedding_lookup", {table}, out, [=]() mutable {
    auto go = out.grad();
    auto gt = Tensor<S>(table).grad();
    for (size_t r = 0; r < ids.size(); ++r)
      for (Index d = 0; d < D; ++d)
        gt[static_cast<size_t>(ids[r] * D + d)] += go[r * D + d];
  });
  return out;
}

/// Per-row negative log-likelihood of `targets` under softmax(logits).
/// logits: [T,V], targets: T ids -> out: [T].
template <class S>
Tensor<S> cross_entropy_logits(Graph<S>& g, const Tensor<S>& logits,
                               const std::vector<Index>& targets) {
  if (logits.rank() != 2) throw ShapeError("cross_entropy: logits must be 2-d");
  const Index T = logits.dim(0), V = logits.dim(1);
  if (static_cast<Index>(targets.size()) != T)
    throw ShapeError("cross_entropy: " + std::to_string(targets.size()) +
                     " targets for " + std::to_string(T) + " rows");
  for (Index t : targets)
    if (t < 0 || t >= V)
      throw Error("cross_entropy: target " + std::to_string(t) +
                  " out of range");
  auto probs = std::make_shared<std::vector<S>>(
      static_cast<size_t>(T * V));
  auto out = Tensor<S>::zeros({T});
  auto* po = out.values_mut().data();
  const auto* px = logits.values().data();
  for (Index r = 0; r < T; ++r) {
    const S* row = px + r * V;
    S mx = row[0];
    for (Index j = 1; j < V; ++j) mx = std::max(mx, row[j]);
    S total = S(0);
    for (Index j = 0; j < V; ++j) {
      S e = std::exp(row[j] - mx);
      (*probs)[static_cast<size_t>(r * V + j)] = e;
      total += e;
    }
    for (Index j = 0; j < V; ++j)
      (*probs)[static_cast<size_t>(r * V + j)] /= total;
    po[r] = (mx + std::log(total)) - row[targets[static_cast<size_t>(r)]];
  }
  g.record("cross_entropy", {logits}, out, [=]() mutable {
    auto go = out.grad();
    auto gx = Tensor<S>(logits).grad();
    for (Index r = 0; r < T; ++r)
      for (Index j = 0; j < V; ++j) {
        S p = (*probs)[static_cast<size_t>(r * V + j)];
        S ind = (j == targets[static_cast<size_t>(r)]) ? S(1) : S(0);
        gx[static_cast<size_t>(r * V + j)] += go[r] * (p - ind);
      }
  });
  return out;
}

/// Inverted dropout; identity when eval or rate == 0.
template <class S>
Tensor<S> dropout(Graph<S>& g, const Tensor<S>& x, S rate, bool training,
                  std::mt19937_64& rng) {
  if (rate < S(0) || rate >= S(1))
    throw ConfigError("dropout: rate must be in [0,1)");
  if (!training || rate == S(0)) return x;
  auto mask = std::make_shared<std::vector<S>>(static_cast<size_t>(x.size()));
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const S keep_inv = S(1) / (S(1) - rate);
  for (auto& m : *mask)
    m = (u(rng) >= static_cast<double>(rate)) ? keep_inv : S(0);
  auto out = Tensor<S>::zeros(x.shape());
  auto* po = out.values_mut().data();
  const auto* px = x.values().data();
  const Index n = x.size();
  for (Index i = 0; i < n; ++i)
    po[i] = px[i] * (*mask)[static_cast<size_t>(i)];
  g.record("dropout", {x}, out, [=]() mutable {
    auto go = out.grad();
    auto gx = Tensor<S>(x).grad();
    for (Index i = 0; i < n; ++i)
      gx[i] += go[i] * (*mask)[static_cast<size_t>(i)];
  });
  return out;
}

}  // namespace ivgn
