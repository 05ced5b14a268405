#pragma once

#include <cstddef>
#include <vector>

#include "ossl/tape.hpp"
#include "ossl/tensor.hpp"

namespace ossl {

// Differentiable operations. Each records a node on `tape` when any input
// requires a gradient and the tape is in record mode. Shape mismatches throw
// DimensionError naming the axis; there is no broadcasting beyond bias terms.

/// Cross-correlation (no kernel flip) of [N,Cin,H,W] with [Cout,Cin,kh,kw],
/// plus an optional per-output-channel bias. Pass an undefined tensor for no bias.
template <typename T>
Tensor<T> conv2d(Tape<T>& tape, const Tensor<T>& input, const Tensor<T>& kernel, const Tensor<T>& bias,
                 std::size_t stride = 1, std::size_t padding = 0);

/// out[n,k] = sum_d input[n,d] * weight[k,d] + bias[k]
template <typename T>
Tensor<T> linear(Tape<T>& tape, const Tensor<T>& input, const Tensor<T>& weight, const Tensor<T>& bias);

template <typename T>
Tensor<T> relu(Tape<T>& tape, const Tensor<T>& input);

/// 2x2 stride-2 max pool. Gradient goes to the first maximum in row-major window order.
template <typename T>
Tensor<T> maxpool2(Tape<T>& tape, const Tensor<T>& input);

template <typename T>
Tensor<T> avgpool2(Tape<T>& tape, const Tensor<T>& input);

/// [N,C,H,W] -> [N,C]
template <typename T>
Tensor<T> global_avgpool(Tape<T>& tape, const Tensor<T>& input);

/// y[n,c,h,w] = scale[c] * x[n,c,h,w] + shift[c]
template <typename T>
Tensor<T> channel_affine(Tape<T>& tape, const Tensor<T>& input, const Tensor<T>& scale, const Tensor<T>& shift);

template <typename T>
Tensor<T> concat_channels(Tape<T>& tape, const std::vector<Tensor<T>>& inputs);

/// [N, ...] -> [N, prod(...)]
template <typename T>
Tensor<T> flatten(Tape<T>& tape, const Tensor<T>& input);

/// Gathers rows of the leading axis.
template <typename T>
Tensor<T> take_rows(Tape<T>& tape, const Tensor<T>& input, const std::vector<std::size_t>& rows);

/// Mean over rows of -sum_k targets[n,k] * log_softmax(logits)[n,k], evaluated in
/// max-shifted log-sum-exp form. Targets must be one-hot rows and are treated as constants.
template <typename T>
Tensor<T> softmax_cross_entropy(Tape<T>& tape, const Tensor<T>& logits, const Tensor<T>& targets);

template <typename T>
Tensor<T> add(Tape<T>& tape, const Tensor<T>& a, const Tensor<T>& b);

template <typename T>
Tensor<T> sub(Tape<T>& tape, const Tensor<T>& a, const Tensor<T>& b);

template <typename T>
Tensor<T> mul(Tape<T>& tape, const Tensor<T>& a, const Tensor<T>& b);

template <typename T>
Tensor<T> scale(Tape<T>& tape, const Tensor<T>& input, T factor);

template <typename T>
Tensor<T> sum(Tape<T>& tape, const Tensor<T>& input);

/// Row-wise argmax with ties resolved to the lowest index.
template <typename T>
std::vector<std::size_t> argmax_rows(const Tensor<T>& matrix);

/// One-hot [labels.size(), classes] matrix.
template <typename T, typename Label>
Tensor<T> one_hot(const std::vector<Label>& labels, std::size_t classes) {
  Tensor<T> out(Shape{labels.size(), classes});
  for (std::size_t n = 0; n < labels.size(); ++n) {
    const auto k = static_cast<std::size_t>(labels[n]);
    if (k >= classes) {
      throw ValueError("label " + std::to_string(k) + " at row " + std::to_string(n) + " outside [0, " +
                       std::to_string(classes) + ")");
    }
    out[n * classes + k] = T(1);
  }
  return out;
}

}  // namespace ossl
