#pragma once

#include <cstddef>
#include <functional>
#include <vector>

#include "ossl/tape.hpp"
#include "ossl/tensor.hpp"

namespace ossl {

struct GradCheckOptions {
  double step = 1e-5;
  double tol = 1e-4;
  // Relative errors are taken against max(|analytic|, |numeric|, abs_floor) so
  // that vanishing gradients are judged on absolute error.
  double abs_floor = 1e-7;
  // Elements of `point` to check; empty means all.
  std::vector<std::size_t> indices;
  // A perturbation that flips a relu mask or pooling argmax crosses a kink;
  // the step is shrunk by 10x up to this many times before the element is skipped.
  int kink_retries = 3;
};

struct GradCheckReport {
  double max_rel_error = 0.0;
  double mean_rel_error = 0.0;
  std::size_t checked = 0;
  std::size_t skipped_kinks = 0;
  std::size_t worst_index = 0;
  std::vector<double> rel_errors;  // per checked element, in check order
  bool passed(double tol) const { return checked > 0 && max_rel_error < tol; }
};

using ScalarFunction = std::function<Tensor<double>(Tape<double>&, const Tensor<double>&)>;

/// Compares backward() gradients of a scalar function against central
/// differences (f(x+h e) - f(x-h e)) / 2h, perturbing `point` in place and
/// restoring it afterwards.
GradCheckReport grad_check(const ScalarFunction& f, Tensor<double> point, const GradCheckOptions& options = {});

}  // namespace ossl
