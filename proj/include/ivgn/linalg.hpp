// Copyright (c) 2026 the ivgn authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Core>

#include "ivgn/ops.hpp"

namespace ivgn {

namespace detail {

template <class S>
using MatMap =
    Eigen::Map<Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
template <class S>
using ConstMatMap = Eigen::Map<
    const Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

}  // namespace detail

/// C[m,n] = A[m,k] * B[k,n].
template <class S>
Tensor<S> matmul(Graph<S>& g, const Tensor<S>& a, const Tensor<S>& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0))
    throw ShapeError("matmul: incompatible shapes " + shape_str(a.shape()) +
                     " and " + shape_str(b.shape()));
  const Index m = a.dim(0), k = a.dim(1), n = b.dim(1);
  auto out = Tensor<S>::zeros({m, n});
  detail::ConstMatMap<S> A(a.values().data(), m, k);
  detail::ConstMatMap<S> B(b.values().data(), k, n);
  detail::MatMap<S>(out.values_mut().data(), m, n).noalias() = A * B;
  g.record("matmul", {a, b}, out, [=]() mutable {
    detail::ConstMatMap<S> A2(a.values().data(), m, k);
    detail::ConstMatMap<S> B2(b.values().data(), k, n);
    detail::ConstMatMap<S> G(Tensor<S>(out).grad().data(), m, n);
    if (a.requires_grad())
      detail::MatMap<S>(Tensor<S>(a).grad().data(), m, k).noalias() +=
          G * B2.transpose();
    if (b.requires_grad())
      detail::MatMap<S>(Tensor<S>(b).grad().data(), k, n).noalias() +=
          A2.transpose() * G;
  });
  return out;
}

/// Batched matmul: C[b,m,n] = A[b,m,k] * B[b,k,n].
template <class S>
Tensor<S> bmm(Graph<S>& g, const Tensor<S>& a, const Tensor<S>& b) {
  if (a.rank() != 3 || b.rank() != 3 || a.dim(0) != b.dim(0) ||
      a.dim(2) != b.dim(1))
    throw ShapeError("bmm: incompatible shapes " + shape_str(a.shape()) +
                     " and " + shape_str(b.shape()));
  const Index bs = a.dim(0), m = a.dim(1), k = a.dim(2), n = b.dim(2);
  auto out = Tensor<S>::zeros({bs, m, n});
  for (Index i = 0; i < bs; ++i) {
    detail::ConstMatMap<S> A(a.values().data() + i * m * k, m, k);
    detail::ConstMatMap<S> B(b.values().data() + i * k * n, k, n);
    detail::MatMap<S>(out.values_mut().data() + i * m * n, m, n).noalias() =
        A * B;
  }
  g.record("bmm", {a, b}, out, [=]() mutable {
    for (Index i = 0; i < bs; ++i) {
      detail::ConstMatMap<S> A2(a.values().data() + i * m * k, m, k);
      detail::ConstMatMap<S> B2(b.values().data() + i * k * n, k, n);
      detail::ConstMatMap<S> G(Tensor<S>(out).grad().data() + i * m * n, m, n);
      if (a.requires_grad())
        detail::MatMap<S>(Tensor<S>(a).grad().data() + i * m * k, m, k)
            .noalias() += G * B2.transpose();
      if (b.requires_grad())
        detail::MatMap<S>(Tensor<S>(b).grad().data() + i * k * n, k, n)
            .noalias() += A2.transpose() * G;
    }
  });
  return out;
}

}  // namespace ivgn
