#include "ossl/bilevel.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include "ossl/eval.hpp"
#include "ossl/ops.hpp"

namespace ossl {

std::string_view to_string(TrainMode mode) {
  switch (mode) {
    case TrainMode::baseline_ch: return "baseline_ch";
    case TrainMode::baseline_ch_rh: return "baseline_ch_rh";
    case TrainMode::ossl: return "ossl";
  }
  return "unknown";
}

TrainMode parse_train_mode(std::string_view name) {
  if (name == "baseline_ch") return TrainMode::baseline_ch;
  if (name == "baseline_ch_rh") return TrainMode::baseline_ch_rh;
  if (name == "ossl") return TrainMode::ossl;
  throw ValueError("unknown mode '" + std::string(name) + "' (expected baseline_ch, baseline_ch_rh or ossl)");
}

void validate(const SgdConfig& cfg) {
  if (!(cfg.learning_rate > 0.0) || !std::isfinite(cfg.learning_rate)) {
    throw ValueError("learning_rate must be a positive finite number");
  }
  if (cfg.batch_size == 0) throw ValueError("batch_size must be at least 1");
}

std::vector<GroupName> upper_groups() {
  return {GroupName::backbone, GroupName::semantic_head, GroupName::rotation_head};
}
std::vector<GroupName> lower_groups() { return {GroupName::backbone, GroupName::auxiliary_head}; }
std::vector<GroupName> baseline_ch_groups() { return {GroupName::backbone, GroupName::semantic_head}; }

namespace {

template <typename T>
std::optional<double> value_of(const Tensor<T>& t) {
  if (!t.defined()) return std::nullopt;
  return static_cast<double>(t.item());
}

template <typename T, typename Build>
StepReport masked_sgd_step(MultiHeadModel<T>& model, const std::vector<GroupName>& active, double lr,
                           const char* objective, Build build) {
  model.zero_grad();
  Tape<T> tape;
  const LossTerms<T> terms = build(tape);
  const T loss = terms.total.item();
  if (!std::isfinite(static_cast<double>(loss))) throw NonFiniteError(objective, "loss is not finite");
  tape.backward(terms.total);

  for (const auto& g : model.groups()) {
    for (std::size_t i = 0; i < g.params.size(); ++i) {
      if (!g.params[i].has_grad()) continue;
      for (T v : g.params[i].grad()) {
        if (!std::isfinite(static_cast<double>(v))) {
          throw NonFiniteError(std::string(to_string(g.name)) + "." + g.names[i],
                               std::string("gradient of ") + objective + " is not finite");
        }
      }
    }
  }

  StepReport report;
  report.loss = static_cast<double>(loss);
  report.l_ch = value_of(terms.l_ch);
  report.l_rh = value_of(terms.l_rh);
  report.l_ah = value_of(terms.l_ah);
  const T step = static_cast<T>(lr);
  for (GroupName name : active) {
    auto& g = model.group(name);
    if (g.frozen) continue;
    double sq = 0.0;
    for (auto& p : g.params) {
      if (!p.has_grad()) continue;
      auto w = p.data();
      const auto gr = p.grad();
      for (std::size_t j = 0; j < w.size(); ++j) {
        sq += static_cast<double>(gr[j]) * static_cast<double>(gr[j]);
        w[j] -= step * gr[j];
      }
    }
    report.grad_norm[static_cast<std::size_t>(name)] = std::sqrt(sq);
  }
  return report;
}

template <typename T>
std::size_t count_correct(const Tensor<T>& logits, const Tensor<T>& y) {
  const auto p = argmax_rows(logits);
  const auto t = argmax_rows(y);
  std::size_t c = 0;
  for (std::size_t i = 0; i < p.size(); ++i) c += p[i] == t[i];
  return c;
}

}  // namespace

template <typename T>
StepReport upper_step(MultiHeadModel<T>& model, const Tensor<T>& x, const Tensor<T>& y, const SgdConfig& cfg) {
  std::size_t correct = 0;
  StepReport r = masked_sgd_step(model, upper_groups(), cfg.learning_rate, "L_upper", [&](Tape<T>& tape) {
    auto t = upper_terms(tape, model, x, y);
    correct = count_correct(t.semantic_logits, y);
    return t;
  });
  r.correct = correct;
  return r;
}

template <typename T>
StepReport lower_step(MultiHeadModel<T>& model, const Tensor<T>& x, const Tensor<T>& y, const SgdConfig& cfg) {
  std::size_t correct = 0;
  StepReport r = masked_sgd_step(model, lower_groups(), cfg.learning_rate, "L_lower", [&](Tape<T>& tape) {
    auto t = lower_terms(tape, model, x, y, cfg.lower_variant);
    correct = count_correct(t.semantic_logits, y);
    return t;
  });
  r.correct = correct;
  return r;
}

template <typename T>
StepReport baseline_ch_step(MultiHeadModel<T>& model, const Tensor<T>& x, const Tensor<T>& y,
                            const SgdConfig& cfg) {
  std::size_t correct = 0;
  StepReport r = masked_sgd_step(model, baseline_ch_groups(), cfg.learning_rate, "L_ch", [&](Tape<T>& tape) {
    auto t = semantic_terms(tape, model, x, y);
    correct = count_correct(t.semantic_logits, y);
    return t;
  });
  r.correct = correct;
  return r;
}

template <typename T>
StepReport baseline_ch_rh_step(MultiHeadModel<T>& model, const Tensor<T>& x, const Tensor<T>& y,
                               const SgdConfig& cfg) {
  return upper_step(model, x, y, cfg);
}

bool is_eval_epoch(std::size_t p, std::size_t n_epoch) { return (p >= 49 && p % 10 == 0) || p == n_epoch; }

namespace {

void check_set(const MultiHeadModel<float>& model, const LabeledImageSet& set) {
  const InputSpec spec = set.image_spec();
  if (!(spec == model.input_spec())) {
    throw DimensionError("input_spec", "dataset '" + set.name + "' has images " +
                                           shape_str(Shape{spec.channels, spec.height, spec.width}) +
                                           " but the model expects " +
                                           shape_str(Shape{model.input_spec().channels, model.input_spec().height,
                                                           model.input_spec().width}));
  }
  if (set.class_count != model.config().num_classes) {
    throw ValueError("dataset '" + set.name + "' has " + std::to_string(set.class_count) +
                     " classes but the model has " + std::to_string(model.config().num_classes));
  }
}

struct Mean {
  double sum = 0.0;
  std::size_t n = 0;
  bool seen = false;
  void add(const std::optional<double>& v, std::size_t weight) {
    if (!v) return;
    seen = true;
    sum += *v * static_cast<double>(weight);
    n += weight;
  }
  std::optional<double> get() const {
    if (!seen) return std::nullopt;
    return n == 0 ? 0.0 : sum / static_cast<double>(n);
  }
};

}  // namespace

TrainRunRecord train(MultiHeadModel<float>& model, const LabeledImageSet& train_set,
                     const std::vector<LabeledImageSet>& test_sets, const SgdConfig& cfg,
                     const TrainOptions& options) {
  validate(cfg);
  check_set(model, train_set);
  for (const auto& t : test_sets) check_set(model, t);

  TrainRunRecord record;
  record.mode = cfg.mode;
  record.config_hash = options.config_hash;
  record.init_seed = model.config().init_seed;
  record.shuffle_seed = cfg.shuffle_seed;
  for (const auto& t : test_sets) record.test_names.push_back(t.name);
  record.checkpoint_path = options.checkpoint_path.string();

  const std::size_t classes = model.config().num_classes;
  for (std::size_t p = 1; p <= cfg.n_epoch; ++p) {
    const auto started = std::chrono::steady_clock::now();
    Mean l_ch, l_rh, l_ah;
    std::size_t correct = 0;
    for (const auto& idx : batch_iter(train_set.size(), cfg.batch_size, cfg.shuffle_seed, p)) {
      const Batch b = gather_batch(train_set, idx);
      const Tensor<float> y = one_hot<float>(b.labels, classes);
      const std::size_t n = idx.size();
      switch (cfg.mode) {
        case TrainMode::baseline_ch: {
          const auto r = baseline_ch_step(model, b.images, y, cfg);
          l_ch.add(r.l_ch, n);
          correct += r.correct;
          break;
        }
        case TrainMode::baseline_ch_rh: {
          const auto r = baseline_ch_rh_step(model, b.images, y, cfg);
          l_ch.add(r.l_ch, n);
          l_rh.add(r.l_rh, n);
          correct += r.correct;
          break;
        }
        case TrainMode::ossl: {
          const auto up = upper_step(model, b.images, y, cfg);
          const auto lo = lower_step(model, b.images, y, cfg);
          l_ch.add(up.l_ch, n);
          l_rh.add(up.l_rh, n);
          l_ah.add(lo.l_ah, n);
          correct += up.correct;
          break;
        }
      }
    }
    EpochRecord e;
    e.epoch = p;
    e.L_ch = l_ch.get();
    e.L_rh = l_rh.get();
    e.L_ah = l_ah.get();
    e.train_acc = train_set.size() == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(train_set.size());
    e.test_acc.assign(test_sets.size(), std::nullopt);
    if (is_eval_epoch(p, cfg.n_epoch)) {
      for (std::size_t i = 0; i < test_sets.size(); ++i) {
        e.test_acc[i] = accuracy(model, test_sets[i], HeadKind::semantic).accuracy;
      }
    }
    if (options.record_wall_time) {
      e.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - started).count();
    }
    record.epochs.push_back(e);
    if (options.on_epoch) options.on_epoch(e);
  }
  if (!options.checkpoint_path.empty()) save_checkpoint(model, options.checkpoint_path);
  return record;
}

#define OSSL_INSTANTIATE_STEPS(T)                                                                                 \
  template StepReport upper_step(MultiHeadModel<T>&, const Tensor<T>&, const Tensor<T>&, const SgdConfig&);       \
  template StepReport lower_step(MultiHeadModel<T>&, const Tensor<T>&, const Tensor<T>&, const SgdConfig&);       \
  template StepReport baseline_ch_step(MultiHeadModel<T>&, const Tensor<T>&, const Tensor<T>&, const SgdConfig&); \
  template StepReport baseline_ch_rh_step(MultiHeadModel<T>&, const Tensor<T>&, const Tensor<T>&, const SgdConfig&);

OSSL_INSTANTIATE_STEPS(float)
OSSL_INSTANTIATE_STEPS(double)

}  // namespace ossl
