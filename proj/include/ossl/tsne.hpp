#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace ossl {

struct TsneConfig {
  double perplexity = 30.0;
  std::size_t iterations = 1000;
  double learning_rate = 200.0;
  double early_exaggeration = 12.0;
  std::size_t exaggeration_iters = 250;
  std::size_t momentum_switch_iter = 250;
  double initial_momentum = 0.5;
  double final_momentum = 0.8;
  double min_gain = 0.01;
  std::uint64_t seed = 0;
  double init_sigma = 1e-4;
  double entropy_tolerance_bits = 1e-5;
  std::size_t max_bisection_steps = 50;
  std::size_t max_points = 2500;
  // Per-row key for the initial position. Empty: row index. Permuting rows
  // together with their keys permutes the output rows.
  std::vector<std::uint64_t> point_keys;
};

struct TsneResult {
  std::size_t rows = 0;
  std::vector<double> coords;             // [rows, 2]
  std::vector<double> kl_history;         // KL(P||Q) before iteration t, plus the final value: iterations + 1 entries
  std::vector<double> entropy_bits;       // achieved entropy of each conditional distribution
  std::vector<double> conditional_sums;   // row sums of the conditional P before symmetrization
  double joint_sum = 0.0;                 // sum of the symmetrized P
};

/// Exact t-SNE of `data` ([rows, dim], row-major) to two dimensions.
/// Throws ValueError for rows < 10, rows > max_points, or perplexity outside (1, rows/3).
TsneResult tsne(std::span<const double> data, std::size_t rows, std::size_t dim, const TsneConfig& cfg);

/// Mean silhouette coefficient under Euclidean distance. Points in singleton clusters score 0.
double silhouette_score(std::span<const double> points, std::size_t rows, std::size_t dim,
                        const std::vector<std::size_t>& labels);

}  // namespace ossl
