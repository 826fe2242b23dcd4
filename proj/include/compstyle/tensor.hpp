// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "compstyle/config.hpp"

COMPSTYLE_NAMESPACE_BEGIN

using Shape = std::vector<std::int64_t>;

std::int64_t numel(const Shape& shape);
std::string shape_string(const Shape& shape);

struct Node;

/// Storage shared by Tensor handles.
struct TensorImpl {
  Shape shape;
  std::vector<Real> data;
  std::vector<Real> grad;  // empty until a gradient is accumulated
  bool requires_grad = false;
  std::shared_ptr<Node> grad_fn;  // null for leaves
};

/// Backward closure of one recorded operation. `grad_out` is the gradient of
/// the node's output; the closure accumulates into its inputs' gradients.
using BackwardFn = std::function<void(std::span<const Real> grad_out)>;

/// One operation on the dynamic tape.
struct Node {
  std::string_view op;
  std::vector<std::shared_ptr<TensorImpl>> inputs;
  BackwardFn backward;
};

/// Dense row-major tensor handle with optional reverse-mode gradient.
///
/// Copies of a Tensor share storage. Operations on tensors that require
/// gradients record a Node on the output; calling backward() on a scalar
/// result traverses the recorded graph once in reverse topological order.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, Real value, bool requires_grad = false);
  static Tensor from(Shape shape, std::vector<Real> values, bool requires_grad = false);
  static Tensor scalar(Real value, bool requires_grad = false);

  bool defined() const { return impl_ != nullptr; }

  const Shape& shape() const;
  std::int64_t dim(std::size_t axis) const;
  std::size_t rank() const { return shape().size(); }
  std::int64_t numel() const;

  std::span<Real> data();
  std::span<const Real> data() const;
  Real item() const;

  bool requires_grad() const;
  Tensor& set_requires_grad(bool value);

  bool has_grad() const;
  std::span<const Real> grad() const;
  std::span<Real> mutable_grad();
  void zero_grad();

  /// Same values, new storage, no history.
  Tensor detach() const;

  /// Reverse-mode sweep from this scalar; seeds d(self)/d(self) = 1.
  void backward() const;

  const std::shared_ptr<Node>& grad_fn() const;
  const std::shared_ptr<TensorImpl>& impl() const { return impl_; }

  explicit Tensor(std::shared_ptr<TensorImpl> impl) : impl_(std::move(impl)) {}

 private:
  std::shared_ptr<TensorImpl> impl_;
};

/// Reverse topological listing of the graph reachable from a root.
struct Graph {
  /// Tensors with a grad_fn, each exactly once; outputs before their inputs.
  std::vector<TensorImpl*> order;
  std::size_t node_count() const { return order.size(); }
};

Graph trace(const Tensor& root);

/// Disables graph recording for its lifetime (thread-local).
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

bool grad_mode_enabled();

namespace detail {

/// Builds an op result and, when any input requires a gradient and recording
/// is enabled, attaches a Node with `backward`.
Tensor make_result(Shape shape, std::vector<Real> data, std::string_view op,
                   std::initializer_list<Tensor> inputs, BackwardFn backward);

/// Gradient buffer of `t`, allocated on first use; nullptr when t does not
/// require a gradient.
Real* grad_buffer(const Tensor& t);
Real* grad_buffer(TensorImpl& t);

}  // namespace detail

/// Integer tensor used for label maps; no gradient.
struct IntTensor {
  Shape shape;
  std::vector<std::int32_t> data;

  static IntTensor zeros(Shape shape);
  std::int64_t numel() const { return compstyle::numel(shape); }
  bool operator==(const IntTensor&) const = default;
};

COMPSTYLE_NAMESPACE_END
