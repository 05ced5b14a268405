#include "ossl/eval.hpp"

#include <algorithm>

#include "ossl/binary_io.hpp"
#include "ossl/ops.hpp"
#include "ossl/rotation.hpp"

namespace ossl {

namespace {

constexpr std::string_view kEmbMagic = "OSSLEMB1";

template <typename T>
Tensor<T> chunk_images(const LabeledImageSet& set, std::size_t begin, std::size_t end) {
  std::vector<std::size_t> idx(end - begin);
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = begin + i;
  Batch b = gather_batch(set, idx);
  if constexpr (std::is_same_v<T, float>) {
    return b.images;
  } else {
    return b.images.template cast<T>();
  }
}

template <typename T>
void check_input(const MultiHeadModel<T>& model, const LabeledImageSet& set) {
  if (set.images.dim(1) != model.input_spec().channels || set.images.dim(2) != model.input_spec().height ||
      set.images.dim(3) != model.input_spec().width) {
    throw DimensionError("set.images", "dataset '" + set.name + "' has image shape " +
                                           shape_str(Shape{set.images.dim(1), set.images.dim(2), set.images.dim(3)}) +
                                           " but the model expects " +
                                           shape_str(Shape{model.input_spec().channels, model.input_spec().height,
                                                           model.input_spec().width}));
  }
}

}  // namespace

EvalResult tally_predictions(const std::vector<std::size_t>& predicted, const std::vector<std::size_t>& truth,
                             std::size_t classes) {
  EvalResult r;
  r.count = truth.size();
  r.confusion.assign(classes, std::vector<std::size_t>(classes, 0));
  std::size_t correct = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    ++r.confusion.at(truth[i]).at(predicted[i]);
    if (predicted[i] == truth[i]) ++correct;
  }
  r.accuracy = r.count == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(r.count);
  r.per_class.assign(classes, 0.0);
  for (std::size_t k = 0; k < classes; ++k) {
    std::size_t support = 0;
    for (auto v : r.confusion[k]) support += v;
    if (support > 0) r.per_class[k] = static_cast<double>(r.confusion[k][k]) / static_cast<double>(support);
  }
  return r;
}

template <typename T>
EvalResult accuracy(const MultiHeadModel<T>& model, const LabeledImageSet& set, HeadKind head, std::size_t chunk) {
  if (head == HeadKind::rotation) throw ValueError("accuracy() takes the semantic or auxiliary head");
  if (set.class_count != model.config().num_classes) {
    throw ValueError("dataset '" + set.name + "' has " + std::to_string(set.class_count) +
                     " classes but the model has " + std::to_string(model.config().num_classes));
  }
  check_input(model, set);
  std::vector<std::size_t> predicted, truth(set.labels.begin(), set.labels.end());
  predicted.reserve(set.size());
  for (std::size_t b = 0; b < set.size(); b += chunk) {
    Tape<T> tape(Tape<T>::Mode::inference);
    const std::size_t e = std::min(set.size(), b + chunk);
    const auto logits = model.forward_head(tape, model.forward_features(tape, chunk_images<T>(set, b, e)), head);
    const auto p = argmax_rows(logits);
    predicted.insert(predicted.end(), p.begin(), p.end());
  }
  EvalResult r = tally_predictions(predicted, truth, set.class_count);
  r.dataset = set.name;
  r.head = std::string(to_string(head));
  return r;
}

template <typename T>
EvalResult rotation_accuracy(const MultiHeadModel<T>& model, const LabeledImageSet& set, std::size_t chunk) {
  check_input(model, set);
  std::vector<std::size_t> predicted, truth;
  predicted.reserve(4 * set.size());
  truth.reserve(4 * set.size());
  for (std::size_t b = 0; b < set.size(); b += chunk) {
    Tape<T> tape(Tape<T>::Mode::inference);
    const std::size_t e = std::min(set.size(), b + chunk);
    const RotationBatch<T> rb = make_rotation_batch(chunk_images<T>(set, b, e));
    const auto p = argmax_rows(model.forward_head(tape, model.forward_features(tape, rb.images), HeadKind::rotation));
    const auto t = argmax_rows(rb.rot_labels);
    predicted.insert(predicted.end(), p.begin(), p.end());
    truth.insert(truth.end(), t.begin(), t.end());
  }
  EvalResult r = tally_predictions(predicted, truth, kRotationClasses);
  r.dataset = set.name;
  r.head = "rotation";
  return r;
}

template <typename T>
Tensor<T> compute_features(const MultiHeadModel<T>& model, const LabeledImageSet& set, std::size_t chunk) {
  check_input(model, set);
  const std::size_t D = model.feature_dim();
  Tensor<T> out(Shape{set.size(), D});
  for (std::size_t b = 0; b < set.size(); b += chunk) {
    Tape<T> tape(Tape<T>::Mode::inference);
    const std::size_t e = std::min(set.size(), b + chunk);
    const auto f = model.forward_features(tape, chunk_images<T>(set, b, e));
    std::copy(f.data().begin(), f.data().end(), out.data().begin() + static_cast<std::ptrdiff_t>(b * D));
  }
  return out;
}

std::vector<std::uint8_t> encode_embeddings(const Embeddings& e) {
  if (e.values.size() != e.rows * e.dim || e.labels.size() != e.rows) {
    throw DimensionError("embeddings", "values/labels do not match rows x dim");
  }
  io::ByteWriter w;
  w.raw(kEmbMagic);
  w.u32(static_cast<std::uint32_t>(e.rows));
  w.u32(static_cast<std::uint32_t>(e.dim));
  for (float v : e.values) w.f32(v);
  for (auto l : e.labels) w.u16(l);
  return w.take();
}

Embeddings decode_embeddings(const std::vector<std::uint8_t>& bytes, const std::string& source) {
  io::ByteReader r(source, bytes);
  if (r.raw(kEmbMagic.size(), "magic") != kEmbMagic) r.fail_at(0, "bad magic (expected \"OSSLEMB1\")");
  Embeddings e;
  e.rows = r.u32_le("row count");
  e.dim = r.u32_le("dimension");
  const std::size_t expected = e.rows * e.dim * 4 + e.rows * 2;
  if (r.remaining() != expected) {
    r.fail("payload length " + std::to_string(r.remaining()) + " does not match the " + std::to_string(expected) +
           " bytes implied by the header");
  }
  e.values.resize(e.rows * e.dim);
  for (auto& v : e.values) v = r.f32_le("value");
  e.labels.resize(e.rows);
  for (auto& l : e.labels) l = r.u16_le("label");
  return e;
}

Embeddings load_embeddings(const std::filesystem::path& path) {
  return decode_embeddings(io::read_file(path), path.string());
}

void save_embeddings(const Embeddings& e, const std::filesystem::path& path) {
  io::write_file(path, encode_embeddings(e));
}

Embeddings export_embeddings(const MultiHeadModel<float>& model, const LabeledImageSet& set,
                             const std::filesystem::path& path) {
  const Tensor<float> f = compute_features(model, set);
  Embeddings e{set.size(), model.feature_dim(), std::vector<float>(f.data().begin(), f.data().end()), set.labels};
  save_embeddings(e, path);
  return e;
}

#define OSSL_INSTANTIATE_EVAL(T)                                                                            \
  template EvalResult accuracy(const MultiHeadModel<T>&, const LabeledImageSet&, HeadKind, std::size_t);   \
  template EvalResult rotation_accuracy(const MultiHeadModel<T>&, const LabeledImageSet&, std::size_t);    \
  template Tensor<T> compute_features(const MultiHeadModel<T>&, const LabeledImageSet&, std::size_t);

OSSL_INSTANTIATE_EVAL(float)
OSSL_INSTANTIATE_EVAL(double)

}  // namespace ossl
