// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <memory>
#include <new>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace adamd::num {

using Shape = std::vector<std::size_t>;

std::size_t numel(const Shape &shape);
std::string to_string(const Shape &shape);

/// Raised when an op receives operands whose extents do not fit together.
class ShapeError : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

namespace detail {

// Leaves doubles uninitialized on resize so op outputs skip a zero fill.
// 64-byte alignment keeps Eigen's vectorized loops on one code path, so
// results do not depend on where the allocator happened to place a buffer.
template <class T> struct DefaultInitAllocator : std::allocator<T> {
  static constexpr std::align_val_t kAlign{64};
  template <class U> struct rebind {
    using other = DefaultInitAllocator<U>;
  };
  using std::allocator<T>::allocator;
  T *allocate(std::size_t n) {
    return static_cast<T *>(::operator new(n * sizeof(T), kAlign));
  }
  void deallocate(T *p, std::size_t) noexcept { ::operator delete(p, kAlign); }
  template <class U> void construct(U *p) { ::new (static_cast<void *>(p)) U; }
  template <class U, class... Args> void construct(U *p, Args &&...args) {
    ::new (static_cast<void *>(p)) U(std::forward<Args>(args)...);
  }
};

using Buffer = std::vector<double, DefaultInitAllocator<double>>;

struct Node {
  Shape shape;
  Buffer data;
  Buffer grad; // empty until the first accumulation
  bool requires_grad = false;

  std::span<double> grad_buffer();

  /// grad[i] += f(i), assigning instead when no gradient exists yet.
  template <class F> void accumulate_grad(F &&f) {
    const std::size_t n = data.size();
    if (grad.empty()) {
      grad.resize(n);
      double *g = grad.data();
      for (std::size_t i = 0; i < n; ++i) g[i] = f(i);
    } else {
      double *g = grad.data();
      for (std::size_t i = 0; i < n; ++i) g[i] += f(i);
    }
  }
};

} // namespace detail

/// Dense row-major array of doubles. Copies share storage; ops never mutate
/// their operands, so a Tensor behaves as a value from the caller's side.
class Tensor {
public:
  Tensor();

  static Tensor zeros(Shape shape, bool requires_grad = false);
  /// Contents unspecified; the caller overwrites every element.
  static Tensor blank(Shape shape);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor from(Shape shape, std::vector<double> values,
                     bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);

  const Shape &shape() const { return node_->shape; }
  std::size_t dim(std::size_t axis) const;
  std::size_t rank() const { return node_->shape.size(); }
  std::size_t size() const { return node_->data.size(); }

  std::span<const double> values() const { return node_->data; }
  // Direct write access is reserved for leaves: inputs, parameters, and the
  // optimizer updating them.
  std::span<double> mutable_values() { return node_->data; }
  double item() const;

  bool requires_grad() const { return node_->requires_grad; }
  void set_requires_grad(bool on) { node_->requires_grad = on; }
  bool has_grad() const { return !node_->grad.empty(); }
  std::span<const double> grad() const { return node_->grad; }
  std::span<double> mutable_grad() { return node_->grad_buffer(); }
  void zero_grad();

  /// Fresh leaf with the same values and no history.
  Tensor detach() const;
  Tensor clone(bool requires_grad) const;

  const std::shared_ptr<detail::Node> &node() const { return node_; }

private:
  explicit Tensor(std::shared_ptr<detail::Node> node);
  std::shared_ptr<detail::Node> node_;
};

} // namespace adamd::num
