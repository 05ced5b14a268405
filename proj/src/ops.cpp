#include "ossl/ops.hpp"

#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <string>

namespace ossl {

std::string_view op_name(OpKind kind) {
  switch (kind) {
    case OpKind::conv2d: return "conv2d";
    case OpKind::linear: return "linear";
    case OpKind::relu: return "relu";
    case OpKind::maxpool2: return "maxpool2";
    case OpKind::avgpool2: return "avgpool2";
    case OpKind::global_avgpool: return "global_avgpool";
    case OpKind::channel_affine: return "channel_affine";
    case OpKind::concat_channels: return "concat_channels";
    case OpKind::flatten: return "flatten";
    case OpKind::take_rows: return "take_rows";
    case OpKind::softmax_cross_entropy: return "softmax_cross_entropy";
    case OpKind::add: return "add";
    case OpKind::sub: return "sub";
    case OpKind::mul: return "mul";
    case OpKind::scale: return "scale";
    case OpKind::sum: return "sum";
    case OpKind::rotation_batch: return "rotation_batch";
  }
  return "unknown";
}

namespace {

template <typename T>
void require_rank(const Tensor<T>& t, std::size_t rank, const std::string& name) {
  if (!t.defined()) throw DimensionError(name, name + " is undefined");
  if (t.rank() != rank) {
    throw DimensionError(name + ".rank", name + " must have rank " + std::to_string(rank) + ", got shape " +
                                             shape_str(t.shape()));
  }
}

template <typename T>
void require_same_shape(const Tensor<T>& a, const Tensor<T>& b, const char* op) {
  if (a.shape() != b.shape()) {
    std::size_t axis = 0;
    while (axis < std::min(a.rank(), b.rank()) && a.dim(axis) == b.dim(axis)) ++axis;
    throw DimensionError("b.axis" + std::to_string(axis), std::string(op) + ": shape " + shape_str(a.shape()) +
                                                             " vs " + shape_str(b.shape()));
  }
}

template <typename T>
Tensor<T> make_output(Tape<T>& tape, Shape shape, std::initializer_list<const Tensor<T>*> inputs) {
  return Tensor<T>(std::move(shape), T(0), tape.needs_grad(inputs));
}

struct ConvGeometry {
  std::size_t n, cin, h, w, cout, kh, kw, stride, pad, ho, wo;
  std::size_t k() const { return cin * kh * kw; }
  std::size_t p() const { return ho * wo; }
};

template <typename T>
void im2col(const T* x, const ConvGeometry& g, T* col) {
  const std::size_t P = g.p();
  for (std::size_t c = 0; c < g.cin; ++c) {
    for (std::size_t ki = 0; ki < g.kh; ++ki) {
      for (std::size_t kj = 0; kj < g.kw; ++kj) {
        T* row = col + ((c * g.kh + ki) * g.kw + kj) * P;
        for (std::size_t oh = 0; oh < g.ho; ++oh) {
          const std::ptrdiff_t ih = static_cast<std::ptrdiff_t>(oh * g.stride + ki) - static_cast<std::ptrdiff_t>(g.pad);
          for (std::size_t ow = 0; ow < g.wo; ++ow) {
            const std::ptrdiff_t iw =
                static_cast<std::ptrdiff_t>(ow * g.stride + kj) - static_cast<std::ptrdiff_t>(g.pad);
            const bool inside = ih >= 0 && iw >= 0 && ih < static_cast<std::ptrdiff_t>(g.h) &&
                                iw < static_cast<std::ptrdiff_t>(g.w);
            row[oh * g.wo + ow] = inside ? x[(c * g.h + ih) * g.w + iw] : T(0);
          }
        }
      }
    }
  }
}

template <typename T>
void col2im_add(const T* col, const ConvGeometry& g, T* x) {
  const std::size_t P = g.p();
  for (std::size_t c = 0; c < g.cin; ++c) {
    for (std::size_t ki = 0; ki < g.kh; ++ki) {
      for (std::size_t kj = 0; kj < g.kw; ++kj) {
        const T* row = col + ((c * g.kh + ki) * g.kw + kj) * P;
        for (std::size_t oh = 0; oh < g.ho; ++oh) {
          const std::ptrdiff_t ih = static_cast<std::ptrdiff_t>(oh * g.stride + ki) - static_cast<std::ptrdiff_t>(g.pad);
          if (ih < 0 || ih >= static_cast<std::ptrdiff_t>(g.h)) continue;
          for (std::size_t ow = 0; ow < g.wo; ++ow) {
            const std::ptrdiff_t iw =
                static_cast<std::ptrdiff_t>(ow * g.stride + kj) - static_cast<std::ptrdiff_t>(g.pad);
            if (iw < 0 || iw >= static_cast<std::ptrdiff_t>(g.w)) continue;
            x[(c * g.h + ih) * g.w + iw] += row[oh * g.wo + ow];
          }
        }
      }
    }
  }
}

}  // namespace

template <typename T>
Tensor<T> conv2d(Tape<T>& tape, const Tensor<T>& input, const Tensor<T>& kernel, const Tensor<T>& bias,
                 std::size_t stride, std::size_t padding) {
  require_rank(input, 4, "input");
  require_rank(kernel, 4, "kernel");
  if (stride == 0) throw ValueError("conv2d: stride must be positive");
  if (kernel.dim(1) != input.dim(1)) {
    throw DimensionError("kernel.Cin", "conv2d: kernel expects " + std::to_string(kernel.dim(1)) +
                                           " input channels, input has " + std::to_string(input.dim(1)));
  }
  if (bias.defined() && (bias.rank() != 1 || bias.dim(0) != kernel.dim(0))) {
    throw DimensionError("bias.Cout", "conv2d: bias shape " + shape_str(bias.shape()) + " does not match Cout " +
                                          std::to_string(kernel.dim(0)));
  }
  ConvGeometry g{input.dim(0), input.dim(1), input.dim(2), input.dim(3), kernel.dim(0), kernel.dim(2),
                 kernel.dim(3), stride, padding, 0, 0};
  if (g.h + 2 * g.pad < g.kh) throw DimensionError("input.H", "conv2d: padded height smaller than kernel");
  if (g.w + 2 * g.pad < g.kw) throw DimensionError("input.W", "conv2d: padded width smaller than kernel");
  g.ho = (g.h + 2 * g.pad - g.kh) / g.stride + 1;
  g.wo = (g.w + 2 * g.pad - g.kw) / g.stride + 1;

  Tensor<T> out = make_output(tape, Shape{g.n, g.cout, g.ho, g.wo}, {&input, &kernel, &bias});
  const std::size_t K = g.k(), P = g.p();
  std::vector<T> col(K * P);
  const T* w = kernel.data().data();
  for (std::size_t n = 0; n < g.n; ++n) {
    im2col(input.data().data() + n * g.cin * g.h * g.w, g, col.data());
    T* o = out.data().data() + n * g.cout * P;
    for (std::size_t co = 0; co < g.cout; ++co) {
      T* orow = o + co * P;
      const T b0 = bias.defined() ? bias[co] : T(0);
      for (std::size_t p = 0; p < P; ++p) orow[p] = b0;
      for (std::size_t k = 0; k < K; ++k) {
        const T wk = w[co * K + k];
        const T* crow = col.data() + k * P;
        for (std::size_t p = 0; p < P; ++p) orow[p] += wk * crow[p];
      }
    }
  }

  if (out.requires_grad()) {
    tape.record(OpKind::conv2d, out, {&input, &kernel, &bias}, [input, kernel, bias, out, g]() mutable {
      const std::size_t K = g.k(), P = g.p();
      const auto gout = out.grad();
      std::vector<T> col(K * P), dcol(K * P);
      const bool need_x = input.requires_grad();
      const bool need_w = kernel.requires_grad();
      const bool need_b = bias.defined() && bias.requires_grad();
      T* gw = need_w ? kernel.grad_slot().data() : nullptr;
      T* gb = need_b ? bias.grad_slot().data() : nullptr;
      T* gx = need_x ? input.grad_slot().data() : nullptr;
      const T* w = kernel.data().data();
      for (std::size_t n = 0; n < g.n; ++n) {
        const T* go = gout.data() + n * g.cout * P;
        if (gb) {
          for (std::size_t co = 0; co < g.cout; ++co) {
            T acc = T(0);
            for (std::size_t p = 0; p < P; ++p) acc += go[co * P + p];
            gb[co] += acc;
          }
        }
        if (gw) {
          im2col(input.data().data() + n * g.cin * g.h * g.w, g, col.data());
          for (std::size_t co = 0; co < g.cout; ++co) {
            for (std::size_t k = 0; k < K; ++k) {
              T acc = T(0);
              const T* crow = col.data() + k * P;
              const T* grow = go + co * P;
              for (std::size_t p = 0; p < P; ++p) acc += grow[p] * crow[p];
              gw[co * K + k] += acc;
            }
          }
        }
        if (gx) {
          std::fill(dcol.begin(), dcol.end(), T(0));
          for (std::size_t co = 0; co < g.cout; ++co) {
            const T* grow = go + co * P;
            for (std::size_t k = 0; k < K; ++k) {
              const T wk = w[co * K + k];
              T* drow = dcol.data() + k * P;
              for (std::size_t p = 0; p < P; ++p) drow[p] += wk * grow[p];
            }
          }
          col2im_add(dcol.data(), g, gx + n * g.cin * g.h * g.w);
        }
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> linear(Tape<T>& tape, const Tensor<T>& input, const Tensor<T>& weight, const Tensor<T>& bias) {
  require_rank(input, 2, "input");
  require_rank(weight, 2, "weight");
  const std::size_t N = input.dim(0), D = input.dim(1), K = weight.dim(0);
  if (weight.dim(1) != D) {
    throw DimensionError("weight.D", "linear: weight expects " + std::to_string(weight.dim(1)) +
                                         " inputs, input has " + std::to_string(D));
  }
  if (bias.defined() && (bias.rank() != 1 || bias.dim(0) != K)) {
    throw DimensionError("bias.K", "linear: bias shape " + shape_str(bias.shape()) + " does not match K " +
                                       std::to_string(K));
  }
  Tensor<T> out = make_output(tape, Shape{N, K}, {&input, &weight, &bias});
  const T* x = input.data().data();
  const T* w = weight.data().data();
  T* o = out.data().data();
  for (std::size_t n = 0; n < N; ++n) {
    for (std::size_t k = 0; k < K; ++k) {
      T acc = bias.defined() ? bias[k] : T(0);
      const T* xr = x + n * D;
      const T* wr = w + k * D;
      for (std::size_t d = 0; d < D; ++d) acc += xr[d] * wr[d];
      o[n * K + k] = acc;
    }
  }
  if (out.requires_grad()) {
    tape.record(OpKind::linear, out, {&input, &weight, &bias}, [input, weight, bias, out, N, D, K]() mutable {
      const T* g = out.grad().data();
      if (input.requires_grad()) {
        T* gx = input.grad_slot().data();
        const T* w = weight.data().data();
        for (std::size_t n = 0; n < N; ++n) {
          for (std::size_t k = 0; k < K; ++k) {
            const T gk = g[n * K + k];
            const T* wr = w + k * D;
            T* gr = gx + n * D;
            for (std::size_t d = 0; d < D; ++d) gr[d] += gk * wr[d];
          }
        }
      }
      if (weight.requires_grad()) {
        T* gw = weight.grad_slot().data();
        const T* x = input.data().data();
        for (std::size_t n = 0; n < N; ++n) {
          for (std::size_t k = 0; k < K; ++k) {
            const T gk = g[n * K + k];
            const T* xr = x + n * D;
            T* gr = gw + k * D;
            for (std::size_t d = 0; d < D; ++d) gr[d] += gk * xr[d];
          }
        }
      }
      if (bias.defined() && bias.requires_grad()) {
        T* gb = bias.grad_slot().data();
        for (std::size_t n = 0; n < N; ++n) {
          for (std::size_t k = 0; k < K; ++k) gb[k] += g[n * K + k];
        }
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> relu(Tape<T>& tape, const Tensor<T>& input) {
  Tensor<T> out = make_output(tape, input.shape(), {&input});
  const auto x = input.data();
  auto o = out.data();
  for (std::size_t i = 0; i < x.size(); ++i) o[i] = x[i] > T(0) ? x[i] : T(0);
  if (tape.tracking_decisions()) {
    std::uint64_t word = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      word = (word << 1) | (x[i] > T(0) ? 1u : 0u);
      if (i % 64 == 63) tape.mix_decision(word), word = 0;
    }
    tape.mix_decision(word);
  }
  if (out.requires_grad()) {
    tape.record(OpKind::relu, out, {&input}, [input, out]() mutable {
      const auto g = out.grad();
      const auto x = input.data();
      auto gx = input.grad_slot();
      for (std::size_t i = 0; i < x.size(); ++i) {
        if (x[i] > T(0)) gx[i] += g[i];
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> maxpool2(Tape<T>& tape, const Tensor<T>& input) {
  require_rank(input, 4, "input");
  const std::size_t N = input.dim(0), C = input.dim(1), H = input.dim(2), W = input.dim(3);
  if (H % 2 != 0) throw DimensionError("input.H", "maxpool2: odd height " + std::to_string(H));
  if (W % 2 != 0) throw DimensionError("input.W", "maxpool2: odd width " + std::to_string(W));
  const std::size_t Ho = H / 2, Wo = W / 2;
  Tensor<T> out = make_output(tape, Shape{N, C, Ho, Wo}, {&input});
  auto argmax = std::make_shared<std::vector<std::uint32_t>>(out.numel());
  const T* x = input.data().data();
  T* o = out.data().data();
  for (std::size_t plane = 0; plane < N * C; ++plane) {
    const T* xp = x + plane * H * W;
    for (std::size_t i = 0; i < Ho; ++i) {
      for (std::size_t j = 0; j < Wo; ++j) {
        const std::size_t cand[4] = {(2 * i) * W + 2 * j, (2 * i) * W + 2 * j + 1, (2 * i + 1) * W + 2 * j,
                                     (2 * i + 1) * W + 2 * j + 1};
        std::size_t best = cand[0];
        for (std::size_t c = 1; c < 4; ++c) {
          if (xp[cand[c]] > xp[best]) best = cand[c];
        }
        const std::size_t oi = plane * Ho * Wo + i * Wo + j;
        o[oi] = xp[best];
        (*argmax)[oi] = static_cast<std::uint32_t>(plane * H * W + best);
      }
    }
  }
  if (tape.tracking_decisions()) {
    for (auto a : *argmax) tape.mix_decision(a);
  }
  if (out.requires_grad()) {
    tape.record(OpKind::maxpool2, out, {&input}, [input, out, argmax]() mutable {
      const auto g = out.grad();
      auto gx = input.grad_slot();
      for (std::size_t i = 0; i < g.size(); ++i) gx[(*argmax)[i]] += g[i];
    });
  }
  return out;
}

template <typename T>
Tensor<T> avgpool2(Tape<T>& tape, const Tensor<T>& input) {
  require_rank(input, 4, "input");
  const std::size_t N = input.dim(0), C = input.dim(1), H = input.dim(2), W = input.dim(3);
  if (H % 2 != 0) throw DimensionError("input.H", "avgpool2: odd height " + std::to_string(H));
  if (W % 2 != 0) throw DimensionError("input.W", "avgpool2: odd width " + std::to_string(W));
  const std::size_t Ho = H / 2, Wo = W / 2;
  Tensor<T> out = make_output(tape, Shape{N, C, Ho, Wo}, {&input});
  const T* x = input.data().data();
  T* o = out.data().data();
  for (std::size_t plane = 0; plane < N * C; ++plane) {
    const T* xp = x + plane * H * W;
    for (std::size_t i = 0; i < Ho; ++i) {
      for (std::size_t j = 0; j < Wo; ++j) {
        o[plane * Ho * Wo + i * Wo + j] =
            (xp[2 * i * W + 2 * j] + xp[2 * i * W + 2 * j + 1] + xp[(2 * i + 1) * W + 2 * j] +
             xp[(2 * i + 1) * W + 2 * j + 1]) *
            T(0.25);
      }
    }
  }
  if (out.requires_grad()) {
    tape.record(OpKind::avgpool2, out, {&input}, [input, out, N, C, H, W, Ho, Wo]() mutable {
      const T* g = out.grad().data();
      T* gx = input.grad_slot().data();
      for (std::size_t plane = 0; plane < N * C; ++plane) {
        T* gp = gx + plane * H * W;
        for (std::size_t i = 0; i < Ho; ++i) {
          for (std::size_t j = 0; j < Wo; ++j) {
            const T v = g[plane * Ho * Wo + i * Wo + j] * T(0.25);
            gp[2 * i * W + 2 * j] += v;
            gp[2 * i * W + 2 * j + 1] += v;
            gp[(2 * i + 1) * W + 2 * j] += v;
            gp[(2 * i + 1) * W + 2 * j + 1] += v;
          }
        }
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> global_avgpool(Tape<T>& tape, const Tensor<T>& input) {
  require_rank(input, 4, "input");
  const std::size_t N = input.dim(0), C = input.dim(1), HW = input.dim(2) * input.dim(3);
  Tensor<T> out = make_output(tape, Shape{N, C}, {&input});
  const T inv = T(1) / static_cast<T>(HW);
  for (std::size_t plane = 0; plane < N * C; ++plane) {
    T acc = T(0);
    for (std::size_t i = 0; i < HW; ++i) acc += input[plane * HW + i];
    out[plane] = acc * inv;
  }
  if (out.requires_grad()) {
    tape.record(OpKind::global_avgpool, out, {&input}, [input, out, N, C, HW, inv]() mutable {
      const auto g = out.grad();
      auto gx = input.grad_slot();
      for (std::size_t plane = 0; plane < N * C; ++plane) {
        const T v = g[plane] * inv;
        for (std::size_t i = 0; i < HW; ++i) gx[plane * HW + i] += v;
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> channel_affine(Tape<T>& tape, const Tensor<T>& input, const Tensor<T>& scale_c, const Tensor<T>& shift) {
  require_rank(input, 4, "input");
  const std::size_t N = input.dim(0), C = input.dim(1), HW = input.dim(2) * input.dim(3);
  if (scale_c.rank() != 1 || scale_c.dim(0) != C) throw DimensionError("scale.C", "channel_affine: scale shape");
  if (shift.rank() != 1 || shift.dim(0) != C) throw DimensionError("shift.C", "channel_affine: shift shape");
  Tensor<T> out = make_output(tape, input.shape(), {&input, &scale_c, &shift});
  for (std::size_t n = 0; n < N; ++n) {
    for (std::size_t c = 0; c < C; ++c) {
      const T s = scale_c[c], b = shift[c];
      const std::size_t base = (n * C + c) * HW;
      for (std::size_t i = 0; i < HW; ++i) out[base + i] = s * input[base + i] + b;
    }
  }
  if (out.requires_grad()) {
    tape.record(OpKind::channel_affine, out, {&input, &scale_c, &shift},
                [input, scale_c, shift, out, N, C, HW]() mutable {
                  const auto g = out.grad();
                  for (std::size_t n = 0; n < N; ++n) {
                    for (std::size_t c = 0; c < C; ++c) {
                      const std::size_t base = (n * C + c) * HW;
                      if (input.requires_grad()) {
                        auto gx = input.grad_slot();
                        const T s = scale_c[c];
                        for (std::size_t i = 0; i < HW; ++i) gx[base + i] += s * g[base + i];
                      }
                      if (scale_c.requires_grad()) {
                        T acc = T(0);
                        for (std::size_t i = 0; i < HW; ++i) acc += g[base + i] * input[base + i];
                        scale_c.grad_slot()[c] += acc;
                      }
                      if (shift.requires_grad()) {
                        T acc = T(0);
                        for (std::size_t i = 0; i < HW; ++i) acc += g[base + i];
                        shift.grad_slot()[c] += acc;
                      }
                    }
                  }
                });
  }
  return out;
}

template <typename T>
Tensor<T> concat_channels(Tape<T>& tape, const std::vector<Tensor<T>>& inputs) {
  if (inputs.empty()) throw DimensionError("inputs", "concat_channels: no inputs");
  for (const auto& t : inputs) require_rank(t, 4, "inputs");
  const std::size_t N = inputs[0].dim(0), H = inputs[0].dim(2), W = inputs[0].dim(3);
  std::size_t C = 0;
  bool grad = false;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    const auto& t = inputs[i];
    if (t.dim(0) != N) throw DimensionError("inputs[" + std::to_string(i) + "].N", "concat_channels: batch");
    if (t.dim(2) != H) throw DimensionError("inputs[" + std::to_string(i) + "].H", "concat_channels: height");
    if (t.dim(3) != W) throw DimensionError("inputs[" + std::to_string(i) + "].W", "concat_channels: width");
    C += t.dim(1);
    grad = grad || t.requires_grad();
  }
  const std::size_t HW = H * W;
  Tensor<T> out(Shape{N, C, H, W}, T(0), grad && tape.recording());
  for (std::size_t n = 0; n < N; ++n) {
    std::size_t c0 = 0;
    for (const auto& t : inputs) {
      const std::size_t ci = t.dim(1);
      std::copy_n(t.data().data() + n * ci * HW, ci * HW, out.data().data() + (n * C + c0) * HW);
      c0 += ci;
    }
  }
  if (out.requires_grad()) {
    std::vector<const Tensor<T>*> ptrs;
    for (const auto& t : inputs) ptrs.push_back(&t);
    tape.record(OpKind::concat_channels, out, ptrs, [inputs, out, N, C, HW]() mutable {
      const auto g = out.grad();
      for (std::size_t n = 0; n < N; ++n) {
        std::size_t c0 = 0;
        for (auto& t : inputs) {
          const std::size_t ci = t.dim(1);
          if (t.requires_grad()) {
            auto gx = t.grad_slot();
            const T* src = g.data() + (n * C + c0) * HW;
            T* dst = gx.data() + n * ci * HW;
            for (std::size_t i = 0; i < ci * HW; ++i) dst[i] += src[i];
          }
          c0 += ci;
        }
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> flatten(Tape<T>& tape, const Tensor<T>& input) {
  const std::size_t N = input.dim(0);
  const std::size_t D = N == 0 ? shape_numel(Shape(input.shape().begin() + 1, input.shape().end()))
                               : input.numel() / N;
  Tensor<T> out = make_output(tape, Shape{N, D}, {&input});
  std::copy(input.data().begin(), input.data().end(), out.data().begin());
  if (out.requires_grad()) {
    tape.record(OpKind::flatten, out, {&input}, [input, out]() mutable {
      const auto g = out.grad();
      auto gx = input.grad_slot();
      for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
    });
  }
  return out;
}

template <typename T>
Tensor<T> take_rows(Tape<T>& tape, const Tensor<T>& input, const std::vector<std::size_t>& rows) {
  const std::size_t N = input.dim(0);
  const std::size_t stride = N == 0 ? 0 : input.numel() / N;
  for (std::size_t r : rows) {
    if (r >= N) throw DimensionError("rows", "take_rows: row " + std::to_string(r) + " out of range");
  }
  Shape shape = input.shape();
  shape[0] = rows.size();
  Tensor<T> out = make_output(tape, shape, {&input});
  for (std::size_t i = 0; i < rows.size(); ++i) {
    std::copy_n(input.data().data() + rows[i] * stride, stride, out.data().data() + i * stride);
  }
  if (out.requires_grad()) {
    tape.record(OpKind::take_rows, out, {&input}, [input, out, rows, stride]() mutable {
      const auto g = out.grad();
      auto gx = input.grad_slot();
      for (std::size_t i = 0; i < rows.size(); ++i) {
        for (std::size_t j = 0; j < stride; ++j) gx[rows[i] * stride + j] += g[i * stride + j];
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> softmax_cross_entropy(Tape<T>& tape, const Tensor<T>& logits, const Tensor<T>& targets) {
  require_rank(logits, 2, "logits");
  require_rank(targets, 2, "targets");
  if (targets.shape() != logits.shape()) {
    throw DimensionError(targets.dim(0) != logits.dim(0) ? "targets.N" : "targets.K",
                         "softmax_cross_entropy: targets " + shape_str(targets.shape()) + " vs logits " +
                             shape_str(logits.shape()));
  }
  const std::size_t N = logits.dim(0), K = logits.dim(1);
  if (N == 0) throw DimensionError("logits.N", "softmax_cross_entropy: empty batch");
  std::vector<std::size_t> target_index(N);
  for (std::size_t n = 0; n < N; ++n) {
    std::size_t ones = 0;
    for (std::size_t k = 0; k < K; ++k) {
      const T v = targets[n * K + k];
      if (v == T(1)) {
        ++ones;
        target_index[n] = k;
      } else if (v != T(0)) {
        ones = 2;
      }
    }
    if (ones != 1) throw ValueError("softmax_cross_entropy: target row " + std::to_string(n) + " is not one-hot");
  }

  // Per-row log-sum-exp; the row losses are summed in extended precision so
  // that equal row losses average back to exactly that value.
  std::vector<T> lse(N);
  long double total = 0.0L;
  for (std::size_t n = 0; n < N; ++n) {
    const T* row = logits.data().data() + n * K;
    T m = row[0];
    for (std::size_t k = 1; k < K; ++k) m = std::max(m, row[k]);
    T s = T(0);
    for (std::size_t k = 0; k < K; ++k) s += std::exp(row[k] - m);
    lse[n] = m + std::log(s);
    total += static_cast<long double>(lse[n] - row[target_index[n]]);
  }
  Tensor<T> out = make_output(tape, Shape{1}, {&logits});
  out[0] = static_cast<T>(total / static_cast<long double>(N));
  if (out.requires_grad()) {
    tape.record(OpKind::softmax_cross_entropy, out, {&logits},
                [logits, out, lse, target_index, N, K]() mutable {
                  const T g = out.grad()[0] / static_cast<T>(N);
                  auto gx = logits.grad_slot();
                  for (std::size_t n = 0; n < N; ++n) {
                    for (std::size_t k = 0; k < K; ++k) {
                      const T p = std::exp(logits[n * K + k] - lse[n]);
                      gx[n * K + k] += g * (p - (k == target_index[n] ? T(1) : T(0)));
                    }
                  }
                });
  }
  return out;
}

template <typename T>
Tensor<T> add(Tape<T>& tape, const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape(a, b, "add");
  Tensor<T> out = make_output(tape, a.shape(), {&a, &b});
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] = a[i] + b[i];
  if (out.requires_grad()) {
    tape.record(OpKind::add, out, {&a, &b}, [a, b, out]() mutable {
      const auto g = out.grad();
      if (a.requires_grad()) {
        auto ga = a.grad_slot();
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
      }
      if (b.requires_grad()) {
        auto gb = b.grad_slot();
        for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i];
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> sub(Tape<T>& tape, const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape(a, b, "sub");
  Tensor<T> out = make_output(tape, a.shape(), {&a, &b});
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] = a[i] - b[i];
  if (out.requires_grad()) {
    tape.record(OpKind::sub, out, {&a, &b}, [a, b, out]() mutable {
      const auto g = out.grad();
      if (a.requires_grad()) {
        auto ga = a.grad_slot();
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
      }
      if (b.requires_grad()) {
        auto gb = b.grad_slot();
        for (std::size_t i = 0; i < g.size(); ++i) gb[i] -= g[i];
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> mul(Tape<T>& tape, const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape(a, b, "mul");
  Tensor<T> out = make_output(tape, a.shape(), {&a, &b});
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] = a[i] * b[i];
  if (out.requires_grad()) {
    tape.record(OpKind::mul, out, {&a, &b}, [a, b, out]() mutable {
      const auto g = out.grad();
      if (a.requires_grad()) {
        auto ga = a.grad_slot();
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * b[i];
      }
      if (b.requires_grad()) {
        auto gb = b.grad_slot();
        for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * a[i];
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> scale(Tape<T>& tape, const Tensor<T>& input, T factor) {
  Tensor<T> out = make_output(tape, input.shape(), {&input});
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] = input[i] * factor;
  if (out.requires_grad()) {
    tape.record(OpKind::scale, out, {&input}, [input, out, factor]() mutable {
      const auto g = out.grad();
      auto gx = input.grad_slot();
      for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * factor;
    });
  }
  return out;
}

template <typename T>
Tensor<T> sum(Tape<T>& tape, const Tensor<T>& input) {
  Tensor<T> out = make_output(tape, Shape{1}, {&input});
  T acc = T(0);
  for (T v : input.data()) acc += v;
  out[0] = acc;
  if (out.requires_grad()) {
    tape.record(OpKind::sum, out, {&input}, [input, out]() mutable {
      const T g = out.grad()[0];
      auto gx = input.grad_slot();
      for (auto& v : gx) v += g;
    });
  }
  return out;
}

template <typename T>
std::vector<std::size_t> argmax_rows(const Tensor<T>& matrix) {
  require_rank(matrix, 2, "matrix");
  const std::size_t N = matrix.dim(0), K = matrix.dim(1);
  std::vector<std::size_t> out(N);
  for (std::size_t n = 0; n < N; ++n) {
    std::size_t best = 0;
    for (std::size_t k = 1; k < K; ++k) {
      if (matrix[n * K + k] > matrix[n * K + best]) best = k;
    }
    out[n] = best;
  }
  return out;
}

#define OSSL_INSTANTIATE_OPS(T)                                                                              \
  template Tensor<T> conv2d(Tape<T>&, const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, std::size_t,     \
                            std::size_t);                                                                    \
  template Tensor<T> linear(Tape<T>&, const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);                 \
  template Tensor<T> relu(Tape<T>&, const Tensor<T>&);                                                       \
  template Tensor<T> maxpool2(Tape<T>&, const Tensor<T>&);                                                   \
  template Tensor<T> avgpool2(Tape<T>&, const Tensor<T>&);                                                   \
  template Tensor<T> global_avgpool(Tape<T>&, const Tensor<T>&);                                             \
  template Tensor<T> channel_affine(Tape<T>&, const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);         \
  template Tensor<T> concat_channels(Tape<T>&, const std::vector<Tensor<T>>&);                               \
  template Tensor<T> flatten(Tape<T>&, const Tensor<T>&);                                                    \
  template Tensor<T> take_rows(Tape<T>&, const Tensor<T>&, const std::vector<std::size_t>&);                 \
  template Tensor<T> softmax_cross_entropy(Tape<T>&, const Tensor<T>&, const Tensor<T>&);                    \
  template Tensor<T> add(Tape<T>&, const Tensor<T>&, const Tensor<T>&);                                      \
  template Tensor<T> sub(Tape<T>&, const Tensor<T>&, const Tensor<T>&);                                      \
  template Tensor<T> mul(Tape<T>&, const Tensor<T>&, const Tensor<T>&);                                      \
  template Tensor<T> scale(Tape<T>&, const Tensor<T>&, T);                                                   \
  template Tensor<T> sum(Tape<T>&, const Tensor<T>&);                                                        \
  template std::vector<std::size_t> argmax_rows(const Tensor<T>&);

OSSL_INSTANTIATE_OPS(float)
OSSL_INSTANTIATE_OPS(double)

#undef OSSL_INSTANTIATE_OPS

}  // namespace ossl
