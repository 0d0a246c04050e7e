// Copyright (c) 2026 the ivgn authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <random>

#include "ivgn/tensor.hpp"

namespace ivgn {

using Rng = std::mt19937_64;

template <class S>
void fill_uniform(Tensor<S>& t, Rng& rng, S lo, S hi) {
  std::uniform_real_distribution<double> d(static_cast<double>(lo),
                                           static_cast<double>(hi));
  for (auto& v : t.values_mut()) v = static_cast<S>(d(rng));
}

template <class S>
void fill_normal(Tensor<S>& t, Rng& rng, S mean, S stddev) {
  std::normal_distribution<double> d(static_cast<double>(mean),
                                     static_cast<double>(stddev));
  for (auto& v : t.values_mut()) v = static_cast<S>(d(rng));
}

/// Xavier/Glorot uniform: U(-a, a) with a = sqrt(6 / (fan_in + fan_out)).
template <class S>
void fill_xavier(Tensor<S>& t, Rng& rng, Index fan_in, Index fan_out) {
  const S a = std::sqrt(S(6) / static_cast<S>(fan_in + fan_out));
  fill_uniform(t, rng, -a, a);
}

/// He normal: N(0, sqrt(2 / fan_in)), for relu stacks.
template <class S>
void fill_he(Tensor<S>& t, Rng& rng, Index fan_in) {
  fill_normal(t, rng, S(0), std::sqrt(S(2) / static_cast<S>(fan_in)));
}

}  // namespace ivgn
