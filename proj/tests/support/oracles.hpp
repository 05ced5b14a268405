#pragma once

// Reference implementations written independently of the library: plain
// nested loops over std::vector<double>, no tape, no shared helpers.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

namespace oracle {

using Vec = std::vector<double>;

struct Dims {
  std::size_t n, c, h, w;
  std::size_t size() const { return n * c * h * w; }
};

inline Vec conv2d(const Vec& x, const Dims& d, const Vec& w, std::size_t k, std::size_t kh, std::size_t kw,
                  const Vec* bias, std::size_t stride, std::size_t pad, Dims& out) {
  out = {d.n, k, (d.h + 2 * pad - kh) / stride + 1, (d.w + 2 * pad - kw) / stride + 1};
  Vec y(out.size(), 0.0);
  for (std::size_t n = 0; n < d.n; ++n)
    for (std::size_t o = 0; o < k; ++o)
      for (std::size_t i = 0; i < out.h; ++i)
        for (std::size_t j = 0; j < out.w; ++j) {
          double s = bias ? (*bias)[o] : 0.0;
          for (std::size_t c = 0; c < d.c; ++c)
            for (std::size_t u = 0; u < kh; ++u)
              for (std::size_t v = 0; v < kw; ++v) {
                const long r = static_cast<long>(i * stride + u) - static_cast<long>(pad);
                const long q = static_cast<long>(j * stride + v) - static_cast<long>(pad);
                if (r < 0 || q < 0 || r >= static_cast<long>(d.h) || q >= static_cast<long>(d.w)) continue;
                s += w[((o * d.c + c) * kh + u) * kw + v] * x[((n * d.c + c) * d.h + r) * d.w + q];
              }
          y[((n * k + o) * out.h + i) * out.w + j] = s;
        }
  return y;
}

// Accumulates input, weight and bias gradients of conv2d (stride 1).
inline void conv2d_backward(const Vec& x, const Dims& d, const Vec& w, std::size_t k, std::size_t kh, std::size_t kw,
                            std::size_t pad, const Vec& gy, const Dims& out, Vec* gx, Vec& gw, Vec* gb) {
  for (std::size_t n = 0; n < d.n; ++n)
    for (std::size_t o = 0; o < k; ++o)
      for (std::size_t i = 0; i < out.h; ++i)
        for (std::size_t j = 0; j < out.w; ++j) {
          const double g = gy[((n * k + o) * out.h + i) * out.w + j];
          if (gb) (*gb)[o] += g;
          for (std::size_t c = 0; c < d.c; ++c)
            for (std::size_t u = 0; u < kh; ++u)
              for (std::size_t v = 0; v < kw; ++v) {
                const long r = static_cast<long>(i + u) - static_cast<long>(pad);
                const long q = static_cast<long>(j + v) - static_cast<long>(pad);
                if (r < 0 || q < 0 || r >= static_cast<long>(d.h) || q >= static_cast<long>(d.w)) continue;
                const std::size_t xi = ((n * d.c + c) * d.h + r) * d.w + q;
                const std::size_t wi = ((o * d.c + c) * kh + u) * kw + v;
                gw[wi] += g * x[xi];
                if (gx) (*gx)[xi] += g * w[wi];
              }
        }
}

inline Vec linear(const Vec& x, std::size_t n, std::size_t d, const Vec& w, std::size_t k, const Vec& b) {
  Vec y(n * k);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t o = 0; o < k; ++o) {
      double s = b[o];
      for (std::size_t j = 0; j < d; ++j) s += w[o * d + j] * x[i * d + j];
      y[i * k + o] = s;
    }
  return y;
}

inline void linear_backward(const Vec& x, std::size_t n, std::size_t d, const Vec& w, std::size_t k, const Vec& gy,
                            Vec* gx, Vec& gw, Vec& gb) {
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t o = 0; o < k; ++o) {
      const double g = gy[i * k + o];
      gb[o] += g;
      for (std::size_t j = 0; j < d; ++j) {
        gw[o * d + j] += g * x[i * d + j];
        if (gx) (*gx)[i * d + j] += g * w[o * d + j];
      }
    }
}

inline Vec relu(const Vec& x) {
  Vec y(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] > 0.0 ? x[i] : 0.0;
  return y;
}

inline Vec relu_backward(const Vec& pre, const Vec& gy) {
  Vec g(pre.size());
  for (std::size_t i = 0; i < pre.size(); ++i) g[i] = pre[i] > 0.0 ? gy[i] : 0.0;
  return g;
}

// 2x2 stride-2 max pool; `arg` receives the flat input index of each window's first maximum.
inline Vec maxpool2(const Vec& x, const Dims& d, std::vector<std::size_t>& arg) {
  const std::size_t oh = d.h / 2, ow = d.w / 2;
  Vec y(d.n * d.c * oh * ow);
  arg.assign(y.size(), 0);
  for (std::size_t nc = 0; nc < d.n * d.c; ++nc)
    for (std::size_t i = 0; i < oh; ++i)
      for (std::size_t j = 0; j < ow; ++j) {
        std::size_t best = nc * d.h * d.w + (2 * i) * d.w + 2 * j;
        for (std::size_t u = 0; u < 2; ++u)
          for (std::size_t v = 0; v < 2; ++v) {
            const std::size_t idx = nc * d.h * d.w + (2 * i + u) * d.w + 2 * j + v;
            if (x[idx] > x[best]) best = idx;
          }
        y[(nc * oh + i) * ow + j] = x[best];
        arg[(nc * oh + i) * ow + j] = best;
      }
  return y;
}

inline Vec avgpool2(const Vec& x, const Dims& d) {
  const std::size_t oh = d.h / 2, ow = d.w / 2;
  Vec y(d.n * d.c * oh * ow);
  for (std::size_t nc = 0; nc < d.n * d.c; ++nc)
    for (std::size_t i = 0; i < oh; ++i)
      for (std::size_t j = 0; j < ow; ++j) {
        double s = 0.0;
        for (std::size_t u = 0; u < 2; ++u)
          for (std::size_t v = 0; v < 2; ++v) s += x[nc * d.h * d.w + (2 * i + u) * d.w + 2 * j + v];
        y[(nc * oh + i) * ow + j] = s / 4.0;
      }
  return y;
}

// Mean cross-entropy of integer labels; also returns d(loss)/d(logits) when grad != nullptr.
inline double softmax_ce(const Vec& logits, std::size_t n, std::size_t k, const std::vector<std::size_t>& labels,
                         Vec* grad = nullptr) {
  double total = 0.0;
  if (grad) grad->assign(n * k, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    double m = logits[i * k];
    for (std::size_t j = 1; j < k; ++j) m = std::max(m, logits[i * k + j]);
    double z = 0.0;
    for (std::size_t j = 0; j < k; ++j) z += std::exp(logits[i * k + j] - m);
    total += -(logits[i * k + labels[i]] - m - std::log(z));
    if (grad) {
      for (std::size_t j = 0; j < k; ++j) {
        const double p = std::exp(logits[i * k + j] - m) / z;
        (*grad)[i * k + j] = (p - (j == labels[i] ? 1.0 : 0.0)) / static_cast<double>(n);
      }
    }
  }
  return total / static_cast<double>(n);
}

// Quarter turn counterclockwise: the pixel at (row, col) of an H x W plane lands at (W-1-col, row).
inline Vec rotate_ccw_once(const Vec& img, std::size_t c, std::size_t h, std::size_t w) {
  Vec out(img.size());
  for (std::size_t ch = 0; ch < c; ++ch)
    for (std::size_t row = 0; row < h; ++row)
      for (std::size_t col = 0; col < w; ++col) {
        const std::size_t nr = w - 1 - col, nc = row;  // output plane is W x H
        out[(ch * w + nr) * h + nc] = img[(ch * h + row) * w + col];
      }
  return out;
}

inline Vec rotate_ccw(Vec img, std::size_t c, std::size_t h, std::size_t w, int quarter_turns) {
  for (int t = 0; t < quarter_turns; ++t) {
    img = rotate_ccw_once(img, c, h, w);
    std::swap(h, w);
  }
  return img;
}

inline std::size_t argmax(const double* row, std::size_t k) {
  std::size_t best = 0;
  for (std::size_t j = 1; j < k; ++j)
    if (row[j] > row[best]) best = j;
  return best;
}

}  // namespace oracle
