// Copyright (c) 2026 the ivgn authors
// SPDX-License-Identifier: Apache-2.0
//
// Elementwise, reduction and shape primitives on the reverse-mode tape.
// Broadcasting is deliberately restricted to trailing-axis alignment with
// size-1 expansion; anything else is rejected so gradient reduction stays
// auditable.

#pragma once

#include <cmath>
#include <cstring>

#include "ivgn/graph.hpp"

namespace ivgn {

namespace detail {

inline Shape broadcast_shape(const Shape& a, const Shape& b) {
  size_t ra = a.size(), rb = b.size(), r = std::max(ra, rb);
  Shape out(r);
  for (size_t i = 0; i < r; ++i) {
    Index da = i < r - ra ? 1 : a[i - (r - ra)];
    Index db = i < r - rb ? 1 : b[i - (r - rb)];
    if (da != db && da != 1 && db != 1)
      throw ShapeError("broadcast mismatch: " + shape_str(a) + " vs " +
                       shape_str(b));
    out[i] = std::max(da, db);
  }
  return out;
}

// Per-output-axis input strides, 0 on broadcast axes.
inline std::vector<Index> broadcast_strides(const Shape& in,
                                            const Shape& out) {
  auto st = strides_of(in);
  std::vector<Index> r(out.size(), 0);
  size_t off = out.size() - in.size();
  for (size_t i = 0; i < in.size(); ++i)
    r[off + i] = in[i] == 1 ? 0 : st[i];
  return r;
}

// Odometer over `shape`, tracking flat offsets into two broadcast inputs.
template <class Fn>
void for_each_broadcast(const Shape& shape, const std::vector<Index>& sa,
                        const std::vector<Index>& sb, Fn&& fn) {
  const Index n = shape_size(shape);
  const int r = static_cast<int>(shape.size());
  std::vector<Index> idx(shape.size(), 0);
  Index oa = 0, ob = 0;
  for (Index i = 0; i < n; ++i) {
    fn(i, oa, ob);
    for (int ax = r - 1; ax >= 0; --ax) {
      oa += sa[ax];
      ob += sb[ax];
      if (++idx[ax] < shape[ax]) break;
      idx[ax] = 0;
      oa -= sa[ax] * shape[ax];
      ob -= sb[ax] * shape[ax];
    }
  }
}

template <class S, class FwdFn, class BwdFn>
Tensor<S> binary_op(Graph<S>& g, const char* name, const Tensor<S>& a,
                    const Tensor<S>& b, FwdFn fwd, BwdFn bwd) {
  if (a.shape() == b.shape()) {
    auto out = Tensor<S>::zeros(a.shape());
    auto* po = out.values_mut().data();
    const auto* pa = a.values().data();
    const auto* pb = b.values().data();
    const Index n = a.size();
    for (Index i = 0; i < n; ++i) po[i] = fwd(pa[i], pb[i], i);
    g.record(name, {a, b}, out, [=]() mutable {
      auto go = out.grad();
      std::span<S> ga = a.requires_grad() ? Tensor<S>(a).grad() : std::span<S>{};
      std::span<S> gb = b.requires_grad() ? Tensor<S>(b).grad() : std::span<S>{};
      for (Index i = 0; i < n; ++i) {
        auto [da, db] = bwd(go[i], pa[i], pb[i], po[i]);
        if (!ga.empty()) ga[i] += da;
        if (!gb.empty()) gb[i] += db;
      }
    });
    return out;
  }
  Shape os = broadcast_shape(a.shape(), b.shape());
  auto sa = broadcast_strides(a.shape(), os);
  auto sb = broadcast_strides(b.shape(), os);
  auto out = Tensor<S>::zeros(os);
  auto* po = out.values_mut().data();
  const auto* pa = a.values().data();
  const auto* pb = b.values().data();
  for_each_broadcast(os, sa, sb, [&](Index i, Index oa, Index ob) {
    po[i] = fwd(pa[oa], pb[ob], i);
  });
  g.record(name, {a, b}, out, [=]() mutable {
    auto go = out.grad();
    std::span<S> ga = a.requires_grad() ? Tensor<S>(a).grad() : std::span<S>{};
    std::span<S> gb = b.requires_grad() ? Tensor<S>(b).grad() : std::span<S>{};
    for_each_broadcast(os, sa, sb, [&](Index i, Index oa, Index ob) {
      auto [da, db] = bwd(go[i], pa[oa], pb[ob], po[i]);
      if (!ga.empty()) ga[oa] += da;
      if (!gb.empty()) gb[ob] += db;
    });
  });
  return out;
}

template <class S, class FwdFn, class BwdFn>
Tensor<S> unary_op(Graph<S>& g, const char* name, const Tensor<S>& x,
                   FwdFn fwd, BwdFn bwd) {
  auto out = Tensor<S>::zeros(x.shape());
  auto* po = out.values_mut().data();
  const auto* px = x.values().data();
  const Index n = x.size();
  for (Index i = 0; i < n; ++i) po[i] = fwd(px[i], i);
  g.record(name, {x}, out, [=]() mutable {
    auto go = out.grad();
    auto gx = Tensor<S>(x).grad();
    for (Index i = 0; i < n; ++i) gx[i] += bwd(go[i], px[i], po[i]);
  });
  return out;
}

template <class S>
S stable_sigmoid(S x) {
  if (x >= S(0)) return S(1) / (S(1) + std::exp(-x));
  S e = std::exp(x);
  return e / (S(1) + e);
}

inline void check_axis(int axis, int rank) {
  if (axis < 0 || axis >= rank)
    throw ShapeError("axis " + std::to_string(axis) + " out of range for rank " +
                     std::to_string(rank));
}

}  // namespace detail

// ---- binary elementwise -------------------------------------------------

template <class S>
Tensor<S> add(Graph<S>& g, const Tensor<S>& a, const Tensor<S>& b) {
  return detail::binary_op(
      g, "add", a, b, [](S x, S y, Index) { return x + y; },
      [](S go, S, S, S) { return std::pair<S, S>{go, go}; });
}

template <class S>
Tensor<S> sub(Graph<S>& g, const Tensor<S>& a, const Tensor<S>& b) {
  return detail::binary_op(
      g, "sub", a, b, [](S x, S y, Index) { return x - y; },
      [](S go, S, S, S) { return std::pair<S, S>{go, -go}; });
}

template <class S>
Tensor<S> mul(Graph<S>& g, const Tensor<S>& a, const Tensor<S>& b) {
  return detail::binary_op(
      g, "mul", a, b, [](S x, S y, Index) { return x * y; },
      [](S go, S x, S y, S) { return std::pair<S, S>{go * y, go * x}; });
}

template <class S>
Tensor<S> divide(Graph<S>& g, const Tensor<S>& a, const Tensor<S>& b) {
  return detail::binary_op(
      g, "div", a, b,
      [](S x, S y, Index i) {
        if (y == S(0))
          throw NumericError("div: zero divisor at index " + std::to_string(i));
        return x / y;
      },
      [](S go, S, S y, S out) {
        return std::pair<S, S>{go / y, -go * out / y};
      });
}

// ---- unary elementwise --------------------------------------------------

template <class S>
Tensor<S> sigmoid(Graph<S>& g, const Tensor<S>& x) {
  return detail::unary_op(
      g, "sigmoid", x,
      [](S v, Index) { return detail::stable_sigmoid(v); },
      [](S go, S, S y) { return go * y * (S(1) - y); });
}

template <class S>
Tensor<S> relu(Graph<S>& g, const Tensor<S>& x) {
  return detail::unary_op(
      g, "relu", x, [](S v, Index) { return v > S(0) ? v : S(0); },
      [](S go, S v, S) { return v > S(0) ? go : S(0); });
}

template <class S>
Tensor<S> tanh_(Graph<S>& g, const Tensor<S>& x) {
  return detail::unary_op(
      g, "tanh", x, [](S v, Index) { return std::tanh(v); },
      [](S go, S, S y) { return go * (S(1) - y * y); });
}

template <class S>
Tensor<S> exp_(Graph<S>& g, const Tensor<S>& x) {
  return detail::unary_op(
      g, "exp", x, [](S v, Index) { return std::exp(v); },
      [](S go, S, S y) { return go * y; });
}

template <class S>
Tensor<S> log_(Graph<S>& g, const Tensor<S>& x) {
  return detail::unary_op(
      g, "log", x,
      [](S v, Index i) {
        if (v <= S(0))
          throw NumericError("log: non-positive input at index " +
                             std::to_string(i));
        return std::log(v);
      },
      [](S go, S v, S) { return go / v; });
}

template <class S>
Tensor<S> sqrt_(Graph<S>& g, const Tensor<S>& x) {
  return detail::unary_op(
      g, "sqrt", x,
      [](S v, Index i) {
        if (v < S(0))
          throw NumericError("sqrt: negative input at index " +
                             std::to_string(i));
        return std::sqrt(v);
      },
      [](S go, S, S y) { return go * S(0.5) / y; });
}

template <class S>
Tensor<S> abs_(Graph<S>& g, const Tensor<S>& x) {
  return detail::unary_op(
      g, "abs", x, [](S v, Index) { return std::abs(v); },
      [](S go, S v, S) {
        return v > S(0) ? go : (v < S(0) ? -go : S(0));
      });
}

template <class S>
Tensor<S> scale(Graph<S>& g, const Tensor<S>& x, S c) {
  return detail::unary_op(
      g, "scale", x, [c](S v, Index) { return c * v; },
      [c](S go, S, S) { return c * go; });
}

template <class S>
Tensor<S> add_const(Graph<S>& g, const Tensor<S>& x, S c) {
  return detail::unary_op(
      g, "add_const", x, [c](S v, Index) { return v + c; },
      [](S go, S, S) { return go; });
}

// ---- reductions ----------------------------------------------------------

namespace detail {

// Shape after reducing `axes`.
inline Shape reduced_shape(const Shape& in, const std::vector<int>& axes,
                           bool keepdims) {
  std::vector<bool> red(in.size(), false);
  for (int a : axes) {
    check_axis(a, static_cast<int>(in.size()));
    if (red[static_cast<size_t>(a)])
      throw ShapeError("duplicate reduction axis " + std::to_string(a));
    red[static_cast<size_t>(a)] = true;
  }
  Shape out;
  for (size_t i = 0; i < in.size(); ++i) {
    if (red[i]) {
      if (keepdims) out.push_back(1);
    } else {
      out.push_back(in[i]);
    }
  }
  if (out.empty()) out.push_back(1);
  return out;
}

// Maps each input flat index to the flat index of its reduction cell.
template <class S, class Fn>
void for_each_reduce(const Shape& in, const std::vector<int>& axes, Fn&& fn) {
  std::vector<bool> red(in.size(), false);
  for (int a : axes) red[static_cast<size_t>(a)] = true;
  // strides of the (keepdims) output
  Shape kshape(in.size());
  for (size_t i = 0; i < in.size(); ++i) kshape[i] = red[i] ? 1 : in[i];
  auto so = strides_of(kshape);
  std::vector<Index> eff(in.size());
  for (size_t i = 0; i < in.size(); ++i) eff[i] = red[i] ? 0 : so[i];

  const Index n = shape_size(in);
  const int r = static_cast<int>(in.size());
  std::vector<Index> idx(in.size(), 0);
  Index oo = 0;
  for (Index i = 0; i < n; ++i) {
    fn(i, oo);
    for (int ax = r - 1; ax >= 0; --ax) {
      oo += eff[ax];
      if (++idx[ax] < in[ax]) break;
      idx[ax] = 0;
      oo -= eff[ax] * in[ax];
    }
  }
}

}  // namespace detail

template <class S>
Tensor<S> sum(Graph<S>& g, const Tensor<S>& x, const std::vector<int>& axes,
              bool keepdims = false) {
  Shape os = detail::reduced_shape(x.shape(), axes, keepdims);
  auto out = Tensor<S>::zeros(os);
  auto* po = out.values_mut().data();
  const auto* px = x.values().data();
  detail::for_each_reduce<S>(x.shape(), axes,
                             [&](Index i, Index o) { po[o] += px[i]; });
  Shape in_shape = x.shape();
  g.record("sum", {x}, out, [=]() mutable {
    auto go = out.grad();
    auto gx = Tensor<S>(x).grad();
    detail::for_each_reduce<S>(in_shape, axes,
                               [&](Index i, Index o) { gx[i] += go[o]; });
  });
  return out;
}

/// Sum over all axes to a scalar.
template <class S>
Tensor<S> sum_all(Graph<S>& g, const Tensor<S>& x) {
  std::vector<int> axes(x.shape().size());
  for (size_t i = 0; i < axes.size(); ++i) axes[i] = static_cast<int>(i);
  return sum(g, x, axes, false);
}

template <class S>
Tensor<S> mean(Graph<S>& g, const Tensor<S>& x, const std::vector<int>& axes,
               bool keepdims = false) {
  Index count = 1;
  for (int a : axes) count *= x.shape()[static_cast<size_t>(a)];
  return scale(g, sum(g, x, axes, keepdims), S(1) / static_cast<S>(count));
}

template <class S>
Tensor<S> mean_all(Graph<S>& g, const Tensor<S>& x) {
  return scale(g, sum_all(g, x), S(1) / static_cast<S>(x.size()));
}

/// Population variance over `axes` (divide by the element count).
template <class S>
Tensor<S> variance(Graph<S>& g, const Tensor<S>& x,
                   const std::vector<int>& axes, bool keepdims = false) {
  auto mu = mean(g, x, axes, true);
  auto d = sub(g, x, mu);
  return mean(g, mul(g, d, d), axes, keepdims);
}

// ---- shape ops -----------------------------------------------------------

template <class S>
Tensor<S> reshape(Graph<S>& g, const Tensor<S>& x, Shape shape) {
  if (shape_size(shape) != x.size())
    throw ShapeError("reshape " + shape_str(x.shape()) + " -> " +
                     shape_str(shape) + ": element count differs");
  auto out = Tensor<S>::from(std::move(shape),
                             {x.values().begin(), x.values().end()});
  g.record("reshape", {x}, out, [=]() mutable {
    auto go = out.grad();
    auto gx = Tensor<S>(x).grad();
    for (Index i = 0; i < out.size(); ++i) gx[i] += go[i];
  });
  return out;
}

template <class S>
Tensor<S> permute(Graph<S>& g, const Tensor<S>& x,
                  const std::vector<int>& perm) {
  const int r = x.rank();
  if (static_cast<int>(perm.size()) != r)
    throw ShapeError("permute: got " + std::to_string(perm.size()) +
                     " axes for rank " + std::to_string(r));
  std::vector<bool> seen(perm.size(), false);
  Shape os(perm.size());
  for (size_t i = 0; i < perm.size(); ++i) {
    detail::check_axis(perm[i], r);
    if (seen[static_cast<size_t>(perm[i])])
      throw ShapeError("permute: duplicate axis " + std::to_string(perm[i]));
    seen[static_cast<size_t>(perm[i])] = true;
    os[i] = x.dim(perm[i]);
  }
  auto in_strides = strides_of(x.shape());
  std::vector<Index> eff(perm.size());
  for (size_t i = 0; i < perm.size(); ++i)
    eff[i] = in_strides[static_cast<size_t>(perm[i])];

  auto out = Tensor<S>::zeros(os);
  auto* po = out.values_mut().data();
  const auto* px = x.values().data();
  const Index n = x.size();
  std::vector<Index> idx(os.size(), 0);
  Index oi = 0;
  for (Index i = 0; i < n; ++i) {
    po[i] = px[oi];
    for (int ax = r - 1; ax >= 0; --ax) {
      oi += eff[ax];
      if (++idx[ax] < os[ax]) break;
      idx[ax] = 0;
      oi -= eff[ax] * os[ax];
    }
  }
  g.record("permute", {x}, out, [=]() mutable {
    auto go = out.grad();
    auto gx = Tensor<S>(x).grad();
    std::vector<Index> jdx(os.size(), 0);
    Index src = 0;
    for (Index i = 0; i < n; ++i) {
      gx[src] += go[i];
      for (int ax = r - 1; ax >= 0; --ax) {
        src += eff[ax];
        if (++jdx[ax] < os[ax]) break;
        jdx[ax] = 0;
        src -= eff[ax] * os[ax];
      }
    }
  });
  return out;
}

template <class S>
Tensor<S> concat(Graph<S>& g, const std::vector<Tensor<S>>& parts, int axis) {
  if (parts.empty()) throw ShapeError("concat: no inputs");
  const int r = parts[0].rank();
  detail::check_axis(axis, r);
  Shape os = parts[0].shape();
  Index total = 0;
  for (const auto& p : parts) {
    if (p.rank() != r) throw ShapeError("concat: rank mismatch");
    for (int i = 0; i < r; ++i)
      if (i != axis && p.dim(i) != os[static_cast<size_t>(i)])
        throw ShapeError("concat: shape mismatch " + shape_str(p.shape()) +
                         " vs " + shape_str(os));
    total += p.dim(axis);
  }
  os[static_cast<size_t>(axis)] = total;

  Index outer = 1, inner = 1;
  for (int i = 0; i < axis; ++i) outer *= os[static_cast<size_t>(i)];
  for (int i = axis + 1; i < r; ++i) inner *= os[static_cast<size_t>(i)];

  auto out = Tensor<S>::zeros(os);
  auto* po = out.values_mut().data();
  Index off = 0;
  for (const auto& p : parts) {
    const Index len = p.dim(axis) * inner;
    const auto* pp = p.values().data();
    for (Index o = 0; o < outer; ++o)
      std::memcpy(po + o * total * inner + off, pp + o * len,
                  static_cast<size_t>(len) * sizeof(S));
    off += len;
  }
  g.record("concat", {parts.begin(), parts.end()}, out, [=]() mutable {
    auto go = out.grad();
    Index off2 = 0;
    for (const auto& p : parts) {
      const Index len = p.dim(axis) * inner;
      if (p.requires_grad()) {
        auto gp = Tensor<S>(p).grad();
        for (Index o = 0; o < outer; ++o)
          for (Index i = 0; i < len; ++i)
            gp[o * len + i] += go[o * total * inner + off2 + i];
      }
      off2 += len;
    }
  });
  return out;
}

template <class S>
Tensor<S> slice(Graph<S>& g, const Tensor<S>& x, int axis, Index start,
                Index len) {
  const int r = x.rank();
  detail::check_axis(axis, r);
  if (start < 0 || len <= 0 || start + len > x.dim(axis))
    throw ShapeError("slice: [" + std::to_string(start) + "," +
                     std::to_string(start + len) + ") out of bounds for axis " +
                     std::to_string(axis) + " of " + shape_str(x.shape()));
  Shape os = x.shape();
  os[static_cast<size_t>(axis)] = len;
  Index outer = 1, inner = 1;
  for (int i = 0; i < axis; ++i) outer *= x.dim(i);
  for (int i = axis + 1; i < r; ++i) inner *= x.dim(i);
  const Index in_len = x.dim(axis) * inner;

  auto out = Tensor<S>::zeros(os);
  auto* po = out.values_mut().data();
  const auto* px = x.values().data();
  for (Index o = 0; o < outer; ++o)
    std::memcpy(po + o * len * inner, px + o * in_len + start * inner,
                static_cast<size_t>(len * inner) * sizeof(S));
  g.record("slice", {x}, out, [=]() mutable {
    auto go = out.grad();
    auto gx = Tensor<S>(x).grad();
    for (Index o = 0; o < outer; ++o)
      for (Index i = 0; i < len * inner; ++i)
        gx[o * in_len + start * inner + i] += go[o * len * inner + i];
  });
  return out;
}

}  // namespace ivgn
