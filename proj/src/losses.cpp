#include "ossl/losses.hpp"

#include "ossl/ops.hpp"

namespace ossl {

std::string_view to_string(LowerVariant v) { return v == LowerVariant::ah ? "ah" : "rh"; }

LowerVariant parse_lower_variant(std::string_view name) {
  if (name == "ah") return LowerVariant::ah;
  if (name == "rh") return LowerVariant::rh;
  throw ValueError("unknown lower_variant '" + std::string(name) + "' (expected ah or rh)");
}

namespace {

template <typename T>
void check_targets(const MultiHeadModel<T>& model, const Tensor<T>& x, const Tensor<T>& y) {
  if (y.rank() != 2) throw DimensionError("y.rank", "class targets must be [N, classes]");
  if (y.dim(1) != model.config().num_classes) {
    throw DimensionError("y.K", "label width " + std::to_string(y.dim(1)) + " does not match " +
                                    std::to_string(model.config().num_classes) + " classes");
  }
  if (x.rank() >= 1 && y.dim(0) != x.dim(0)) throw DimensionError("y.N", "target rows do not match batch size");
}

template <typename T>
std::vector<std::size_t> leading_rows(const RotationBatch<T>& batch) {
  return batch.rows_for(0);
}

}  // namespace

template <typename T>
Tensor<T> head_loss(Tape<T>& tape, const MultiHeadModel<T>& model, const Tensor<T>& features, HeadKind head,
                    const Tensor<T>& y) {
  return softmax_cross_entropy(tape, model.forward_head(tape, features, head), y);
}

template <typename T>
Tensor<T> semantic_loss(Tape<T>& tape, const MultiHeadModel<T>& model, const Tensor<T>& x, const Tensor<T>& y) {
  check_targets(model, x, y);
  return head_loss(tape, model, model.forward_features(tape, x), HeadKind::semantic, y);
}

template <typename T>
Tensor<T> auxiliary_loss(Tape<T>& tape, const MultiHeadModel<T>& model, const Tensor<T>& x, const Tensor<T>& y) {
  check_targets(model, x, y);
  return head_loss(tape, model, model.forward_features(tape, x), HeadKind::auxiliary, y);
}

template <typename T>
Tensor<T> rotation_loss_from_features(Tape<T>& tape, const MultiHeadModel<T>& model, const RotationBatch<T>& batch,
                                      const Tensor<T>& features) {
  const Tensor<T> logits = model.forward_head(tape, features, HeadKind::rotation);
  Tensor<T> total;
  for (int r = 0; r < 4; ++r) {
    const auto rows = batch.rows_for(r);
    const Tensor<T> ce =
        softmax_cross_entropy(tape, take_rows(tape, logits, rows), take_rows(tape, batch.rot_labels, rows));
    total = r == 0 ? ce : add(tape, total, ce);
  }
  return scale(tape, total, T(0.25));
}

template <typename T>
Tensor<T> rotation_loss(Tape<T>& tape, const MultiHeadModel<T>& model, const Tensor<T>& x) {
  const RotationBatch<T> batch = make_rotation_batch(tape, x);
  return rotation_loss_from_features(tape, model, batch, model.forward_features(tape, batch.images));
}

template <typename T>
LossTerms<T> semantic_terms(Tape<T>& tape, const MultiHeadModel<T>& model, const Tensor<T>& x, const Tensor<T>& y) {
  check_targets(model, x, y);
  LossTerms<T> t;
  t.semantic_logits = model.forward_head(tape, model.forward_features(tape, x), HeadKind::semantic);
  t.l_ch = softmax_cross_entropy(tape, t.semantic_logits, y);
  t.total = t.l_ch;
  return t;
}

template <typename T>
LossTerms<T> upper_terms(Tape<T>& tape, const MultiHeadModel<T>& model, const Tensor<T>& x, const Tensor<T>& y) {
  check_targets(model, x, y);
  const RotationBatch<T> batch = make_rotation_batch(tape, x);
  const Tensor<T> features = model.forward_features(tape, batch.images);
  LossTerms<T> t;
  t.semantic_logits =
      model.forward_head(tape, take_rows(tape, features, leading_rows(batch)), HeadKind::semantic);
  t.l_ch = softmax_cross_entropy(tape, t.semantic_logits, y);
  t.l_rh = rotation_loss_from_features(tape, model, batch, features);
  t.total = add(tape, t.l_ch, t.l_rh);
  return t;
}

template <typename T>
LossTerms<T> lower_terms(Tape<T>& tape, const MultiHeadModel<T>& model, const Tensor<T>& x, const Tensor<T>& y,
                         LowerVariant variant) {
  check_targets(model, x, y);
  LossTerms<T> t;
  if (variant == LowerVariant::rh) {
    const RotationBatch<T> batch = make_rotation_batch(tape, x);
    const Tensor<T> features = model.forward_features(tape, batch.images);
    t.semantic_logits =
        model.forward_head(tape, take_rows(tape, features, leading_rows(batch)), HeadKind::semantic);
    t.l_ch = softmax_cross_entropy(tape, t.semantic_logits, y);
    t.l_rh = rotation_loss_from_features(tape, model, batch, features);
    t.total = sub(tape, t.l_ch, t.l_rh);
    return t;
  }
  const Tensor<T> features = model.forward_features(tape, x);
  t.semantic_logits = model.forward_head(tape, features, HeadKind::semantic);
  t.l_ch = softmax_cross_entropy(tape, t.semantic_logits, y);
  t.l_ah = head_loss(tape, model, features, HeadKind::auxiliary, y);
  t.total = sub(tape, t.l_ch, t.l_ah);
  return t;
}

template <typename T>
Tensor<T> upper_loss(Tape<T>& tape, const MultiHeadModel<T>& model, const Tensor<T>& x, const Tensor<T>& y) {
  return upper_terms(tape, model, x, y).total;
}

template <typename T>
Tensor<T> lower_loss(Tape<T>& tape, const MultiHeadModel<T>& model, const Tensor<T>& x, const Tensor<T>& y,
                     LowerVariant variant) {
  return lower_terms(tape, model, x, y, variant).total;
}

template <typename T>
LossBundle<T> evaluate_losses(const MultiHeadModel<T>& model, const Tensor<T>& x, const Tensor<T>& y,
                              LowerVariant variant) {
  check_targets(model, x, y);
  Tape<T> tape(Tape<T>::Mode::inference);
  const RotationBatch<T> batch = make_rotation_batch(x);
  const Tensor<T> features = model.forward_features(tape, batch.images);
  const Tensor<T> plain = take_rows(tape, features, leading_rows(batch));
  LossBundle<T> out;
  out.L_ch = head_loss(tape, model, plain, HeadKind::semantic, y).item();
  out.L_ah = head_loss(tape, model, plain, HeadKind::auxiliary, y).item();
  out.L_rh = rotation_loss_from_features(tape, model, batch, features).item();
  out.L_upper = out.L_ch + out.L_rh;
  out.L_lower = out.L_ch - (variant == LowerVariant::ah ? out.L_ah : out.L_rh);
  return out;
}

#define OSSL_INSTANTIATE_LOSSES(T)                                                                               \
  template Tensor<T> head_loss(Tape<T>&, const MultiHeadModel<T>&, const Tensor<T>&, HeadKind, const Tensor<T>&); \
  template Tensor<T> semantic_loss(Tape<T>&, const MultiHeadModel<T>&, const Tensor<T>&, const Tensor<T>&);      \
  template Tensor<T> auxiliary_loss(Tape<T>&, const MultiHeadModel<T>&, const Tensor<T>&, const Tensor<T>&);     \
  template Tensor<T> rotation_loss_from_features(Tape<T>&, const MultiHeadModel<T>&, const RotationBatch<T>&,    \
                                                 const Tensor<T>&);                                             \
  template Tensor<T> rotation_loss(Tape<T>&, const MultiHeadModel<T>&, const Tensor<T>&);                        \
  template LossTerms<T> semantic_terms(Tape<T>&, const MultiHeadModel<T>&, const Tensor<T>&, const Tensor<T>&); \
  template LossTerms<T> upper_terms(Tape<T>&, const MultiHeadModel<T>&, const Tensor<T>&, const Tensor<T>&);    \
  template LossTerms<T> lower_terms(Tape<T>&, const MultiHeadModel<T>&, const Tensor<T>&, const Tensor<T>&,     \
                                    LowerVariant);                                                             \
  template Tensor<T> upper_loss(Tape<T>&, const MultiHeadModel<T>&, const Tensor<T>&, const Tensor<T>&);         \
  template Tensor<T> lower_loss(Tape<T>&, const MultiHeadModel<T>&, const Tensor<T>&, const Tensor<T>&,          \
                                LowerVariant);                                                                  \
  template LossBundle<T> evaluate_losses(const MultiHeadModel<T>&, const Tensor<T>&, const Tensor<T>&, LowerVariant);

OSSL_INSTANTIATE_LOSSES(float)
OSSL_INSTANTIATE_LOSSES(double)

}  // namespace ossl
