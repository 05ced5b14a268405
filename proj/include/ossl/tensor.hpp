#pragma once

#include <algorithm>
#include <cstddef>
#include <cstring>
#include <memory>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ossl/errors.hpp"

namespace ossl {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

inline std::string shape_str(const Shape& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

template <typename T>
struct TensorStorage {
  Shape shape;
  std::vector<T> data;
  std::vector<T> grad;  // empty until a gradient arrives
  bool requires_grad = false;
  std::optional<std::size_t> tape_id;
};

/// Dense row-major array with an optional gradient slot.
///
/// A Tensor is a shared handle: copies alias the same storage, so a model
/// parameter handed to an op is the same object the optimizer later updates.
/// Use clone() for a deep copy.
template <typename T>
class Tensor {
 public:
  using value_type = T;

  Tensor() = default;

  explicit Tensor(Shape shape, T fill = T(0), bool requires_grad = false)
      : storage_(std::make_shared<TensorStorage<T>>()) {
    check_extents(shape);
    storage_->data.assign(shape_numel(shape), fill);
    storage_->shape = std::move(shape);
    storage_->requires_grad = requires_grad;
  }

  Tensor(Shape shape, std::vector<T> data, bool requires_grad = false)
      : storage_(std::make_shared<TensorStorage<T>>()) {
    check_extents(shape);
    if (shape_numel(shape) != data.size()) {
      throw DimensionError("data", "tensor data length " + std::to_string(data.size()) +
                                       " does not match shape " + shape_str(shape));
    }
    storage_->shape = std::move(shape);
    storage_->data = std::move(data);
    storage_->requires_grad = requires_grad;
  }

  static Tensor scalar(T value, bool requires_grad = false) {
    return Tensor(Shape{1}, std::vector<T>{value}, requires_grad);
  }

  bool defined() const noexcept { return storage_ != nullptr; }

  const Shape& shape() const { return storage_->shape; }
  std::size_t rank() const { return storage_->shape.size(); }
  std::size_t dim(std::size_t axis) const { return storage_->shape.at(axis); }
  std::size_t numel() const { return storage_->data.size(); }

  std::span<T> data() { return storage_->data; }
  std::span<const T> data() const { return storage_->data; }
  T& operator[](std::size_t i) { return storage_->data[i]; }
  const T& operator[](std::size_t i) const { return storage_->data[i]; }

  T item() const {
    if (numel() != 1) throw DimensionError("numel", "item() on tensor of shape " + shape_str(shape()));
    return storage_->data[0];
  }

  bool requires_grad() const { return storage_->requires_grad; }
  void set_requires_grad(bool on) {
    storage_->requires_grad = on;
    if (!on) storage_->grad.clear();
  }

  bool has_grad() const { return !storage_->grad.empty(); }
  std::span<const T> grad() const { return storage_->grad; }

  /// Gradient slot, allocated zero-filled on first access. Only valid when requires_grad.
  /// Const because a Tensor is a handle; the slot lives in shared storage.
  std::span<T> grad_slot() const {
    if (!storage_->requires_grad) {
      throw AutogradError("gradient requested for a tensor with requires_grad=false");
    }
    if (storage_->grad.empty()) storage_->grad.assign(storage_->data.size(), T(0));
    return storage_->grad;
  }

  void zero_grad() { storage_->grad.clear(); }

  std::optional<std::size_t> tape_id() const { return storage_->tape_id; }
  void set_tape_id(std::optional<std::size_t> id) { storage_->tape_id = id; }

  /// Same shape, new storage; data copied, no gradient, not on any tape.
  Tensor clone() const {
    Tensor out(storage_->shape, storage_->data, false);
    out.storage_->requires_grad = storage_->requires_grad;
    return out;
  }

  /// View with a different shape over a copy of the data.
  Tensor reshaped(Shape shape) const { return Tensor(std::move(shape), storage_->data, false); }

  template <typename U>
  Tensor<U> cast() const {
    std::vector<U> out(storage_->data.size());
    std::transform(storage_->data.begin(), storage_->data.end(), out.begin(),
                   [](T v) { return static_cast<U>(v); });
    return Tensor<U>(storage_->shape, std::move(out), storage_->requires_grad);
  }

  /// Storage identity (used for parameter partition checks).
  const void* identity() const noexcept { return storage_.get(); }
  bool same_storage(const Tensor& other) const noexcept { return storage_ == other.storage_; }

  std::shared_ptr<TensorStorage<T>> storage() const { return storage_; }

 private:
  static void check_extents(const Shape& shape) {
    if (shape.empty()) throw DimensionError("rank", "tensor shape must have at least one axis");
    // The leading (batch) axis may be empty; every other extent must be positive.
    for (std::size_t i = 1; i < shape.size(); ++i) {
      if (shape[i] == 0) throw DimensionError("axis" + std::to_string(i), "tensor extents must be positive");
    }
  }

  std::shared_ptr<TensorStorage<T>> storage_;
};

/// Bitwise equality of data and shape.
template <typename T>
bool bitwise_equal(const Tensor<T>& a, const Tensor<T>& b) {
  return a.shape() == b.shape() &&
         (a.numel() == 0 || std::memcmp(a.data().data(), b.data().data(), a.numel() * sizeof(T)) == 0);
}

}  // namespace ossl
