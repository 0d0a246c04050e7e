// Copyright (c) 2026 the ivgn authors
// SPDX-License-Identifier: Apache-2.0
//
// Test-only central finite-difference oracle. Independent of the tape's
// backward path: it re-evaluates the supplied loss closure with perturbed
// parameter entries and compares against the analytic gradients.

#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "ivgn/graph.hpp"

namespace ivgn_test {

struct FdReport {
  double max_rel_err = 0.0;
  ivgn::Index worst_param = -1;
  ivgn::Index worst_entry = -1;
};

// `make_loss` builds a fresh graph and returns the scalar loss tensor.
// Relative error is floored at 1e-4 scale so near-zero gradients are judged
// on absolute error (well above central-difference noise).
inline FdReport check_gradients(
    std::vector<ivgn::Tensor<double>> params,
    const std::function<ivgn::Tensor<double>(ivgn::Graph<double>&)>& make_loss,
    double h = 1e-5) {
  using ivgn::Graph;
  using ivgn::Index;

  for (auto& p : params) {
    p.set_requires_grad(true);
    p.zero_grad();
  }
  {
    Graph<double> g;
    auto loss = make_loss(g);
    g.backward(loss);
  }
  std::vector<std::vector<double>> analytic;
  analytic.reserve(params.size());
  for (auto& p : params)
    analytic.emplace_back(p.grad().begin(), p.grad().end());

  auto eval = [&]() {
    Graph<double> g(false);
    return make_loss(g).item();
  };

  FdReport rep;
  for (size_t pi = 0; pi < params.size(); ++pi) {
    auto vals = params[pi].values_mut();
    for (Index i = 0; i < params[pi].size(); ++i) {
      const double keep = vals[i];
      vals[i] = keep + h;
      const double lp = eval();
      vals[i] = keep - h;
      const double lm = eval();
      vals[i] = keep;
      const double numeric = (lp - lm) / (2.0 * h);
      const double a = analytic[pi][static_cast<size_t>(i)];
      const double denom = std::max({std::abs(a), std::abs(numeric), 1e-4});
      const double rel = std::abs(a - numeric) / denom;
      if (rel > rep.max_rel_err) {
        rep.max_rel_err = rel;
        rep.worst_param = static_cast<Index>(pi);
        rep.worst_entry = i;
      }
    }
  }
  return rep;
}

}  // namespace ivgn_test
