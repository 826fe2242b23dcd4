// SPDX-License-Identifier: Apache-2.0
#include "compstyle/tensor.hpp"

#include <algorithm>
#include <sstream>
#include <unordered_set>

#include "compstyle/error.hpp"

COMPSTYLE_NAMESPACE_BEGIN

namespace {
thread_local bool g_grad_enabled = true;

void check_shape(const Shape& shape) {
  for (auto d : shape)
    if (d < 0) throw DimensionError("negative dimension in shape " + shape_string(shape));
}
}  // namespace

std::int64_t numel(const Shape& shape) {
  std::int64_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << ']';
  return os.str();
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) { return full(std::move(shape), Real(0), requires_grad); }

Tensor Tensor::full(Shape shape, Real value, bool requires_grad) {
  check_shape(shape);
  auto impl = std::make_shared<TensorImpl>();
  impl->data.assign(static_cast<std::size_t>(compstyle::numel(shape)), value);
  impl->shape = std::move(shape);
  impl->requires_grad = requires_grad;
  return Tensor(std::move(impl));
}

Tensor Tensor::from(Shape shape, std::vector<Real> values, bool requires_grad) {
  check_shape(shape);
  if (static_cast<std::int64_t>(values.size()) != compstyle::numel(shape))
    throw DimensionError("value count " + std::to_string(values.size()) +
                         " does not match shape " + shape_string(shape));
  auto impl = std::make_shared<TensorImpl>();
  impl->shape = std::move(shape);
  impl->data = std::move(values);
  impl->requires_grad = requires_grad;
  return Tensor(std::move(impl));
}

Tensor Tensor::scalar(Real value, bool requires_grad) { return from({}, {value}, requires_grad); }

const Shape& Tensor::shape() const {
  static const Shape empty;
  return impl_ ? impl_->shape : empty;
}

std::int64_t Tensor::dim(std::size_t axis) const {
  const auto& s = shape();
  if (axis >= s.size())
    throw DimensionError("axis " + std::to_string(axis) + " out of range for " + shape_string(s));
  return s[axis];
}

std::int64_t Tensor::numel() const { return impl_ ? static_cast<std::int64_t>(impl_->data.size()) : 0; }

std::span<Real> Tensor::data() { return impl_ ? std::span<Real>(impl_->data) : std::span<Real>(); }

std::span<const Real> Tensor::data() const {
  return impl_ ? std::span<const Real>(impl_->data) : std::span<const Real>();
}

Real Tensor::item() const {
  if (numel() != 1) throw DimensionError("item() on tensor of shape " + shape_string(shape()));
  return impl_->data[0];
}

bool Tensor::requires_grad() const { return impl_ && impl_->requires_grad; }

Tensor& Tensor::set_requires_grad(bool value) {
  impl_->requires_grad = value;
  return *this;
}

bool Tensor::has_grad() const { return impl_ && !impl_->grad.empty(); }

std::span<const Real> Tensor::grad() const {
  return impl_ ? std::span<const Real>(impl_->grad) : std::span<const Real>();
}

std::span<Real> Tensor::mutable_grad() {
  if (impl_->grad.empty()) impl_->grad.assign(impl_->data.size(), Real(0));
  return impl_->grad;
}

void Tensor::zero_grad() {
  if (impl_) impl_->grad.clear();
}

Tensor Tensor::detach() const {
  auto impl = std::make_shared<TensorImpl>();
  impl->shape = shape();
  if (impl_) impl->data = impl_->data;
  return Tensor(std::move(impl));
}

const std::shared_ptr<Node>& Tensor::grad_fn() const {
  static const std::shared_ptr<Node> none;
  return impl_ ? impl_->grad_fn : none;
}

Graph trace(const Tensor& root) {
  Graph g;
  if (!root.defined()) return g;
  // Iterative post-order DFS; reversing the post-order gives a topological
  // order with every output ahead of the operations producing its inputs.
  std::unordered_set<const TensorImpl*> visited;
  std::vector<std::pair<TensorImpl*, std::size_t>> stack;
  std::vector<TensorImpl*> post;
  if (root.impl()->grad_fn) {
    stack.emplace_back(root.impl().get(), 0);
    visited.insert(root.impl().get());
  }
  while (!stack.empty()) {
    auto& [t, next] = stack.back();
    const auto& inputs = t->grad_fn->inputs;
    if (next < inputs.size()) {
      TensorImpl* in = inputs[next++].get();
      if (in->grad_fn && visited.insert(in).second) stack.emplace_back(in, 0);
    } else {
      post.push_back(t);
      stack.pop_back();
    }
  }
  g.order.assign(post.rbegin(), post.rend());
  return g;
}

void Tensor::backward() const {
  if (numel() != 1) throw DimensionError("backward() needs a scalar, got " + shape_string(shape()));
  if (!requires_grad()) return;
  impl_->grad.assign(1, Real(1));
  const Graph g = trace(*this);
  for (TensorImpl* t : g.order) {
    if (t->grad.empty()) continue;  // output unused by the loss
    t->grad_fn->backward(t->grad);
  }
}

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }
bool grad_mode_enabled() { return g_grad_enabled; }

namespace detail {

Tensor make_result(Shape shape, std::vector<Real> data, std::string_view op,
                   std::initializer_list<Tensor> inputs, BackwardFn backward) {
  auto impl = std::make_shared<TensorImpl>();
  impl->shape = std::move(shape);
  impl->data = std::move(data);
  const bool needs = g_grad_enabled && std::any_of(inputs.begin(), inputs.end(),
                                                   [](const Tensor& t) { return t.requires_grad(); });
  if (needs) {
    auto node = std::make_shared<Node>();
    node->op = op;
    node->inputs.reserve(inputs.size());
    for (const auto& t : inputs) node->inputs.push_back(t.impl());
    node->backward = std::move(backward);
    impl->requires_grad = true;
    impl->grad_fn = std::move(node);
  }
  return Tensor(std::move(impl));
}

Real* grad_buffer(TensorImpl& t) {
  if (!t.requires_grad) return nullptr;
  if (t.grad.empty()) t.grad.assign(t.data.size(), Real(0));
  return t.grad.data();
}

Real* grad_buffer(const Tensor& t) { return t.defined() ? grad_buffer(*t.impl()) : nullptr; }

}  // namespace detail

IntTensor IntTensor::zeros(Shape shape) {
  check_shape(shape);
  IntTensor t;
  t.data.assign(static_cast<std::size_t>(compstyle::numel(shape)), 0);
  t.shape = std::move(shape);
  return t;
}

COMPSTYLE_NAMESPACE_END
