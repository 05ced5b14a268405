#include "ossl/tsne.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>
#include <string>

#include "ossl/errors.hpp"
#include "ossl/rng.hpp"

namespace ossl {

namespace {

constexpr double kFloor = 1e-12;

std::vector<double> squared_distances(std::span<const double> x, std::size_t n, std::size_t d) {
  std::vector<double> out(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < d; ++k) {
        const double diff = x[i * d + k] - x[j * d + k];
        s += diff * diff;
      }
      out[i * n + j] = out[j * n + i] = s;
    }
  }
  return out;
}

// Entropy (bits) of row i's conditional distribution at precision beta; fills p.
double row_entropy(const double* dist, std::size_t n, std::size_t i, double beta, double shift, double* p) {
  double sum = 0.0, weighted = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    if (j == i) {
      p[j] = 0.0;
      continue;
    }
    const double dj = dist[j] - shift;
    p[j] = std::exp(-beta * dj);
    sum += p[j];
    weighted += dj * p[j];
  }
  for (std::size_t j = 0; j < n; ++j) p[j] /= sum;
  return (std::log(sum) + beta * weighted / sum) / std::numbers::ln2;
}

TsneResult tsne_canonical(std::span<const double> data, std::size_t rows, std::size_t dim, const TsneConfig& cfg,
                          const std::vector<std::uint64_t>& keys);

}  // namespace

TsneResult tsne(std::span<const double> data, std::size_t rows, std::size_t dim, const TsneConfig& cfg) {
  if (rows < 10) throw ValueError("t-SNE needs at least 10 points, got " + std::to_string(rows));
  if (rows > cfg.max_points) {
    throw ValueError("exact t-SNE is capped at " + std::to_string(cfg.max_points) + " points, got " +
                     std::to_string(rows));
  }
  if (!(cfg.perplexity > 1.0) || !(cfg.perplexity < static_cast<double>(rows) / 3.0)) {
    throw ValueError("perplexity must lie in (1, N/3) = (1, " + std::to_string(static_cast<double>(rows) / 3.0) +
                     "), got " + std::to_string(cfg.perplexity));
  }
  if (data.size() != rows * dim) throw ValueError("t-SNE input has the wrong number of values");
  if (!cfg.point_keys.empty() && cfg.point_keys.size() != rows) {
    throw ValueError("point_keys must have one key per row");
  }
  if (cfg.point_keys.empty()) {
    std::vector<std::uint64_t> keys(rows);
    for (std::size_t i = 0; i < rows; ++i) keys[i] = i;
    return tsne_canonical(data, rows, dim, cfg, keys);
  }

  // Run in ascending key order so the arithmetic does not depend on row order,
  // then map every per-row output back.
  std::vector<std::size_t> order(rows);
  for (std::size_t i = 0; i < rows; ++i) order[i] = i;
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return cfg.point_keys[a] < cfg.point_keys[b]; });
  for (std::size_t i = 1; i < rows; ++i) {
    if (cfg.point_keys[order[i]] == cfg.point_keys[order[i - 1]]) throw ValueError("point_keys must be distinct");
  }
  std::vector<double> sorted(rows * dim);
  std::vector<std::uint64_t> keys(rows);
  for (std::size_t i = 0; i < rows; ++i) {
    std::copy_n(data.begin() + static_cast<std::ptrdiff_t>(order[i] * dim), dim,
                sorted.begin() + static_cast<std::ptrdiff_t>(i * dim));
    keys[i] = cfg.point_keys[order[i]];
  }
  TsneResult canon = tsne_canonical(sorted, rows, dim, cfg, keys);
  TsneResult res = canon;
  for (std::size_t i = 0; i < rows; ++i) {
    res.coords[2 * order[i]] = canon.coords[2 * i];
    res.coords[2 * order[i] + 1] = canon.coords[2 * i + 1];
    res.entropy_bits[order[i]] = canon.entropy_bits[i];
    res.conditional_sums[order[i]] = canon.conditional_sums[i];
  }
  return res;
}

namespace {

TsneResult tsne_canonical(std::span<const double> data, std::size_t rows, std::size_t dim, const TsneConfig& cfg,
                          const std::vector<std::uint64_t>& keys) {
  const std::size_t n = rows;
  TsneResult res;
  res.rows = n;

  // Conditional affinities by bisection on the Gaussian precision.
  const std::vector<double> dist = squared_distances(data, n, dim);
  const double target = std::log2(cfg.perplexity);
  std::vector<double> P(n * n, 0.0);
  res.entropy_bits.resize(n);
  res.conditional_sums.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double* di = &dist[i * n];
    double shift = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < n; ++j) {
      if (j != i) shift = std::min(shift, di[j]);
    }
    double beta = 1.0, lo = -std::numeric_limits<double>::infinity(), hi = std::numeric_limits<double>::infinity();
    double h = row_entropy(di, n, i, beta, shift, &P[i * n]);
    for (std::size_t step = 0; step < cfg.max_bisection_steps && std::abs(h - target) >= cfg.entropy_tolerance_bits;
         ++step) {
      if (h > target) {
        lo = beta;
        beta = std::isinf(hi) ? beta * 2.0 : (beta + hi) / 2.0;
      } else {
        hi = beta;
        beta = std::isinf(lo) ? beta / 2.0 : (beta + lo) / 2.0;
      }
      h = row_entropy(di, n, i, beta, shift, &P[i * n]);
    }
    res.entropy_bits[i] = h;
    double s = 0.0;
    for (std::size_t j = 0; j < n; ++j) s += P[i * n + j];
    res.conditional_sums[i] = s;
  }

  // Symmetrize and normalize.
  std::vector<double> Pj(n * n, 0.0);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      Pj[i * n + j] = P[i * n + j] + P[j * n + i];
      total += Pj[i * n + j];
    }
  }
  res.joint_sum = 0.0;
  for (auto& v : Pj) {
    v /= total;
    res.joint_sum += v;
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i != j) Pj[i * n + j] = std::max(Pj[i * n + j], kFloor);
    }
  }

  std::vector<double> Y(2 * n), velocity(2 * n, 0.0), gains(2 * n, 1.0), grad(2 * n);
  for (std::size_t i = 0; i < n; ++i) {
    const CounterRng rng(cfg.seed, keys[i]);
    Y[2 * i] = cfg.init_sigma * rng.normal(0);
    Y[2 * i + 1] = cfg.init_sigma * rng.normal(1);
  }

  std::vector<double> num(n * n, 0.0);
  const auto affinities = [&]() {
    double z = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i + 1; j < n; ++j) {
        const double dx = Y[2 * i] - Y[2 * j], dy = Y[2 * i + 1] - Y[2 * j + 1];
        const double q = 1.0 / (1.0 + dx * dx + dy * dy);
        num[i * n + j] = num[j * n + i] = q;
        z += 2.0 * q;
      }
    }
    return z;
  };
  const auto kl = [&](double z) {
    double k = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        if (i == j) continue;
        const double p = Pj[i * n + j];
        k += p * std::log(p / std::max(num[i * n + j] / z, kFloor));
      }
    }
    return k;
  };

  res.kl_history.reserve(cfg.iterations + 1);
  for (std::size_t t = 0; t < cfg.iterations; ++t) {
    const double z = affinities();
    res.kl_history.push_back(kl(z));
    const double exaggeration = t < cfg.exaggeration_iters ? cfg.early_exaggeration : 1.0;
    for (std::size_t i = 0; i < n; ++i) {
      double gx = 0.0, gy = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        if (i == j) continue;
        const double q = std::max(num[i * n + j] / z, kFloor);
        const double m = (exaggeration * Pj[i * n + j] - q) * num[i * n + j];
        gx += m * (Y[2 * i] - Y[2 * j]);
        gy += m * (Y[2 * i + 1] - Y[2 * j + 1]);
      }
      grad[2 * i] = 4.0 * gx;
      grad[2 * i + 1] = 4.0 * gy;
    }
    const double momentum = t < cfg.momentum_switch_iter ? cfg.initial_momentum : cfg.final_momentum;
    for (std::size_t k = 0; k < 2 * n; ++k) {
      const bool same_sign = (grad[k] > 0.0) == (velocity[k] > 0.0);
      gains[k] = same_sign ? gains[k] * 0.8 : gains[k] + 0.2;
      gains[k] = std::max(gains[k], cfg.min_gain);
      velocity[k] = momentum * velocity[k] - cfg.learning_rate * gains[k] * grad[k];
      Y[k] += velocity[k];
    }
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      mx += Y[2 * i];
      my += Y[2 * i + 1];
    }
    mx /= static_cast<double>(n);
    my /= static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
      Y[2 * i] -= mx;
      Y[2 * i + 1] -= my;
    }
  }
  res.kl_history.push_back(kl(affinities()));
  res.coords = std::move(Y);
  return res;
}

}  // namespace

double silhouette_score(std::span<const double> points, std::size_t rows, std::size_t dim,
                        const std::vector<std::size_t>& labels) {
  if (labels.size() != rows || points.size() != rows * dim) throw ValueError("silhouette: size mismatch");
  std::map<std::size_t, std::size_t> sizes;
  for (auto l : labels) ++sizes[l];
  if (sizes.size() < 2) throw ValueError("silhouette needs at least two clusters");
  double total = 0.0;
  for (std::size_t i = 0; i < rows; ++i) {
    std::map<std::size_t, double> sums;
    for (std::size_t j = 0; j < rows; ++j) {
      if (i == j) continue;
      double s = 0.0;
      for (std::size_t k = 0; k < dim; ++k) {
        const double d = points[i * dim + k] - points[j * dim + k];
        s += d * d;
      }
      sums[labels[j]] += std::sqrt(s);
    }
    const std::size_t own = sizes[labels[i]];
    if (own == 1) continue;
    const double a = sums[labels[i]] / static_cast<double>(own - 1);
    double b = std::numeric_limits<double>::infinity();
    for (const auto& [label, count] : sizes) {
      if (label != labels[i]) b = std::min(b, sums[label] / static_cast<double>(count));
    }
    total += (b - a) / std::max(a, b);
  }
  return total / static_cast<double>(rows);
}

}  // namespace ossl
