#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <string_view>
#include <vector>

#include "ossl/tensor.hpp"

namespace ossl {

enum class OpKind {
  conv2d,
  linear,
  relu,
  maxpool2,
  avgpool2,
  global_avgpool,
  channel_affine,
  concat_channels,
  flatten,
  take_rows,
  softmax_cross_entropy,
  add,
  sub,
  mul,
  scale,
  sum,
  rotation_batch,
};

std::string_view op_name(OpKind kind);

/// Append-only record of differentiable operations for one forward pass.
///
/// Ops append a node only when one of their inputs requires a gradient, so
/// node order is a topological order by construction. backward() replays the
/// nodes in reverse, once. A tape belongs to a single thread.
template <typename T>
class Tape {
 public:
  enum class Mode { record, inference };

  struct Node {
    OpKind kind;
    std::vector<std::size_t> input_ids;  // tape ids of inputs produced on this tape
    Tensor<T> output;
    std::function<void()> backward;
  };

  explicit Tape(Mode mode = Mode::record) : mode_(mode) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool recording() const noexcept { return mode_ == Mode::record; }

  /// True when an op reading `inputs` must produce a gradient-carrying output.
  bool needs_grad(std::initializer_list<const Tensor<T>*> inputs) const {
    if (!recording()) return false;
    for (const auto* t : inputs) {
      if (t && t->defined() && t->requires_grad()) return true;
    }
    return false;
  }

  std::size_t record(OpKind kind, Tensor<T>& output, const std::vector<const Tensor<T>*>& inputs,
                     std::function<void()> backward) {
    Node node{kind, {}, output, std::move(backward)};
    const std::size_t id = nodes_.size();
    for (const auto* in : inputs) {
      if (in && in->defined() && in->tape_id() && owns(*in)) node.input_ids.push_back(*in->tape_id());
    }
    output.set_tape_id(id);
    nodes_.push_back(std::move(node));
    return id;
  }

  /// Seeds d(loss)/d(loss) = 1 and propagates to every requires_grad tensor.
  void backward(const Tensor<T>& loss) {
    if (!loss.defined() || loss.numel() != 1) {
      throw AutogradError("backward() requires a scalar loss, got shape " +
                          (loss.defined() ? shape_str(loss.shape()) : std::string("<undefined>")));
    }
    if (consumed_) {
      throw AutogradError("backward() already ran on this tape; reset gradients and rebuild the graph");
    }
    if (!loss.requires_grad() || !loss.tape_id() || !owns(loss)) {
      throw AutogradError("loss is not the output of a recorded operation on this tape");
    }
    consumed_ = true;
    Tensor<T> seed = loss;
    seed.grad_slot()[0] += T(1);
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
      if (it->output.has_grad()) it->backward();
    }
  }

  bool consumed() const noexcept { return consumed_; }
  std::size_t size() const noexcept { return nodes_.size(); }
  const Node& node(std::size_t id) const { return nodes_.at(id); }

  /// When enabled, relu masks and pooling argmaxes are folded into a hash so a
  /// caller can detect that two forward passes took different branches.
  void track_decisions(bool on) noexcept { track_ = on; }
  bool tracking_decisions() const noexcept { return track_; }
  void mix_decision(std::uint64_t v) noexcept {
    signature_ ^= v + 0x9e3779b97f4a7c15ULL + (signature_ << 6) + (signature_ >> 2);
  }
  std::uint64_t decision_signature() const noexcept { return signature_; }

 private:
  bool owns(const Tensor<T>& t) const {
    const auto id = t.tape_id();
    return id && *id < nodes_.size() && nodes_[*id].output.same_storage(t);
  }

  Mode mode_;
  std::vector<Node> nodes_;
  bool consumed_ = false;
  bool track_ = false;
  std::uint64_t signature_ = 0xcbf29ce484222325ULL;
};

}  // namespace ossl
