// Copyright (c) 2026 the ivgn authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <memory>
#include <span>

#include "ivgn/common.hpp"

namespace ivgn {

/// Dense n-d array of scalars with an optional gradient buffer.
///
/// Tensor is a cheap shared handle: copies alias the same storage. Values are
/// treated as immutable once the tensor participates in a Graph; the gradient
/// buffer is the only part mutated afterwards (accumulated by backward()).
template <class S>
class Tensor {
 public:
  Tensor() : d_(std::make_shared<Data>()) {}

  static Tensor zeros(Shape shape) {
    Tensor t;
    t.d_->shape = std::move(shape);
    t.check_shape();
    t.d_->values.assign(static_cast<size_t>(shape_size(t.d_->shape)), S(0));
    return t;
  }

  static Tensor full(Shape shape, S value) {
    Tensor t = zeros(std::move(shape));
    std::fill(t.d_->values.begin(), t.d_->values.end(), value);
    return t;
  }

  static Tensor from(Shape shape, std::vector<S> values) {
    Tensor t;
    t.d_->shape = std::move(shape);
    t.check_shape();
    if (static_cast<Index>(values.size()) != shape_size(t.d_->shape))
      throw ShapeError("tensor init: " + std::to_string(values.size()) +
                       " values for shape " + shape_str(t.d_->shape));
    t.d_->values = std::move(values);
    return t;
  }

  static Tensor scalar(S value) { return full({1}, value); }

  const Shape& shape() const { return d_->shape; }
  int rank() const { return static_cast<int>(d_->shape.size()); }
  Index dim(int i) const { return d_->shape[static_cast<size_t>(i)]; }
  Index size() const { return static_cast<Index>(d_->values.size()); }

  std::span<const S> values() const { return d_->values; }
  // In-place access; use only on leaves outside of recorded graphs
  // (initialization, optimizer updates between steps).
  std::span<S> values_mut() { return d_->values; }

  S item() const {
    if (size() != 1)
      throw UsageError("item(): tensor has " + std::to_string(size()) +
                       " elements");
    return d_->values[0];
  }

  bool requires_grad() const { return d_->requires_grad; }
  Tensor& set_requires_grad(bool b = true) {
    d_->requires_grad = b;
    return *this;
  }

  bool grad_allocated() const { return !d_->grad.empty(); }

  /// Gradient buffer, lazily zero-initialized to match values().
  std::span<S> grad() {
    if (d_->grad.empty()) d_->grad.assign(d_->values.size(), S(0));
    return d_->grad;
  }
  std::span<const S> grad() const {
    const_cast<Tensor*>(this)->grad();
    return d_->grad;
  }

  void zero_grad() {
    if (!d_->grad.empty()) std::fill(d_->grad.begin(), d_->grad.end(), S(0));
  }

  /// Identity of the underlying storage (aliasing test).
  const void* id() const { return d_.get(); }

  bool same_storage(const Tensor& o) const { return d_ == o.d_; }

 private:
  struct Data {
    Shape shape;
    std::vector<S> values;
    std::vector<S> grad;
    bool requires_grad = false;
  };

  void check_shape() const {
    for (Index d : d_->shape)
      if (d <= 0)
        throw ShapeError("non-positive dimension in shape " +
                         shape_str(d_->shape));
  }

  std::shared_ptr<Data> d_;
};

}  // namespace ivgn
