#pragma once

#include "ossl/nn.hpp"
#include "ossl/rotation.hpp"
#include "ossl/tape.hpp"
#include "ossl/tensor.hpp"

namespace ossl {

/// Which auxiliary term the lower objective subtracts from L_ch.
/// `ah` (default) is L_ch - L_ah; `rh` is the earlier L_ch - L_rh form, kept for ablation.
enum class LowerVariant { ah, rh };

std::string_view to_string(LowerVariant v);
LowerVariant parse_lower_variant(std::string_view name);

template <typename T>
struct LossBundle {
  T L_ch{};
  T L_rh{};
  T L_ah{};
  T L_upper{};
  T L_lower{};
};

/// Intermediate values of one composite objective on one batch.
template <typename T>
struct LossTerms {
  Tensor<T> total;
  Tensor<T> l_ch;
  Tensor<T> l_rh;              // undefined unless the objective uses it
  Tensor<T> l_ah;              // undefined unless the objective uses it
  Tensor<T> semantic_logits;   // [N, classes] on the unrotated images
};

// Every loss takes images x [N,C,H,W] and, where needed, one-hot class
// targets y [N, num_classes]. All are batch means of natural-log cross-entropy.

template <typename T>
Tensor<T> semantic_loss(Tape<T>& tape, const MultiHeadModel<T>& model, const Tensor<T>& x, const Tensor<T>& y);

/// Mean over the four rotations of the rotation-head cross-entropy. Requires square images.
template <typename T>
Tensor<T> rotation_loss(Tape<T>& tape, const MultiHeadModel<T>& model, const Tensor<T>& x);

template <typename T>
Tensor<T> auxiliary_loss(Tape<T>& tape, const MultiHeadModel<T>& model, const Tensor<T>& x, const Tensor<T>& y);

/// L_ch + L_rh. The unrotated copies inside the rotation batch supply the
/// L_ch features, so the backbone runs once on 4N images.
template <typename T>
Tensor<T> upper_loss(Tape<T>& tape, const MultiHeadModel<T>& model, const Tensor<T>& x, const Tensor<T>& y);

/// L_ch - L_ah (or L_ch - L_rh). Gradient reaches the semantic head too; keeping
/// it fixed is the optimizer's job.
template <typename T>
Tensor<T> lower_loss(Tape<T>& tape, const MultiHeadModel<T>& model, const Tensor<T>& x, const Tensor<T>& y,
                     LowerVariant variant = LowerVariant::ah);

template <typename T>
LossTerms<T> semantic_terms(Tape<T>& tape, const MultiHeadModel<T>& model, const Tensor<T>& x, const Tensor<T>& y);

template <typename T>
LossTerms<T> upper_terms(Tape<T>& tape, const MultiHeadModel<T>& model, const Tensor<T>& x, const Tensor<T>& y);

template <typename T>
LossTerms<T> lower_terms(Tape<T>& tape, const MultiHeadModel<T>& model, const Tensor<T>& x, const Tensor<T>& y,
                         LowerVariant variant = LowerVariant::ah);

// Building blocks shared with the training loop.

/// Cross-entropy of `head` on precomputed features.
template <typename T>
Tensor<T> head_loss(Tape<T>& tape, const MultiHeadModel<T>& model, const Tensor<T>& features, HeadKind head,
                    const Tensor<T>& y);

/// 0.25 * (((CE_0 + CE_1) + CE_2) + CE_3) from rotation-batch features [4N, D].
template <typename T>
Tensor<T> rotation_loss_from_features(Tape<T>& tape, const MultiHeadModel<T>& model, const RotationBatch<T>& batch,
                                      const Tensor<T>& features);

/// All five values without recording gradients.
template <typename T>
LossBundle<T> evaluate_losses(const MultiHeadModel<T>& model, const Tensor<T>& x, const Tensor<T>& y,
                              LowerVariant variant = LowerVariant::ah);

}  // namespace ossl
