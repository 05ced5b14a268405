#include "ossl/grad_check.hpp"

#include <algorithm>
#include <cmath>

namespace ossl {

namespace {

struct Probe {
  double value;
  std::uint64_t signature;
};

Probe evaluate(const ScalarFunction& f, const Tensor<double>& point) {
  Tape<double> tape(Tape<double>::Mode::inference);
  tape.track_decisions(true);
  const double v = f(tape, point).item();
  return {v, tape.decision_signature()};
}

}  // namespace

GradCheckReport grad_check(const ScalarFunction& f, Tensor<double> point, const GradCheckOptions& options) {
  const bool had_grad_flag = point.requires_grad();
  point.set_requires_grad(true);
  point.zero_grad();

  std::uint64_t base_signature = 0;
  std::vector<double> analytic;
  {
    Tape<double> tape;
    tape.track_decisions(true);
    const Tensor<double> loss = f(tape, point);
    base_signature = tape.decision_signature();
    tape.backward(loss);
    analytic.assign(point.grad().begin(), point.grad().end());
    if (analytic.empty()) analytic.assign(point.numel(), 0.0);
  }

  std::vector<std::size_t> indices = options.indices;
  if (indices.empty()) {
    indices.resize(point.numel());
    for (std::size_t i = 0; i < indices.size(); ++i) indices[i] = i;
  }

  GradCheckReport report;
  double total = 0.0;
  for (std::size_t idx : indices) {
    const double original = point[idx];
    double h = options.step;
    bool ok = false;
    double numeric = 0.0;
    for (int attempt = 0; attempt <= options.kink_retries; ++attempt, h *= 0.1) {
      point[idx] = original + h;
      const Probe plus = evaluate(f, point);
      point[idx] = original - h;
      const Probe minus = evaluate(f, point);
      point[idx] = original;
      if (plus.signature == base_signature && minus.signature == base_signature) {
        numeric = (plus.value - minus.value) / (2.0 * h);
        ok = true;
        break;
      }
    }
    if (!ok) {
      ++report.skipped_kinks;
      continue;
    }
    const double a = analytic[idx];
    const double denom = std::max({std::abs(a), std::abs(numeric), options.abs_floor});
    const double rel = std::abs(a - numeric) / denom;
    report.rel_errors.push_back(rel);
    total += rel;
    if (rel > report.max_rel_error || report.checked == 0) {
      report.max_rel_error = std::max(report.max_rel_error, rel);
      if (rel >= report.max_rel_error) report.worst_index = idx;
    }
    ++report.checked;
  }
  report.mean_rel_error = report.checked ? total / static_cast<double>(report.checked) : 0.0;

  point.zero_grad();
  point.set_requires_grad(had_grad_flag);
  return report;
}

}  // namespace ossl
