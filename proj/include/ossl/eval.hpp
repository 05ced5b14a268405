#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "ossl/data.hpp"
#include "ossl/nn.hpp"

namespace ossl {

struct EvalResult {
  std::string dataset;
  std::string head;
  double accuracy = 0.0;  // trace / total; 0 for an empty set
  std::size_t count = 0;
  std::vector<double> per_class;                       // correct / support, 0 where support is 0
  std::vector<std::vector<std::size_t>> confusion;     // [true][predicted]
};

/// Tallies predictions against labels into an EvalResult.
EvalResult tally_predictions(const std::vector<std::size_t>& predicted, const std::vector<std::size_t>& truth,
                             std::size_t classes);

/// Semantic or auxiliary head accuracy. Throws ValueError for a class-count
/// mismatch and for HeadKind::rotation (use rotation_accuracy).
template <typename T>
EvalResult accuracy(const MultiHeadModel<T>& model, const LabeledImageSet& set, HeadKind head,
                    std::size_t chunk = 256);

/// 4-way rotation accuracy over all four rotated copies of every image.
template <typename T>
EvalResult rotation_accuracy(const MultiHeadModel<T>& model, const LabeledImageSet& set, std::size_t chunk = 128);

/// Backbone features for every image, row-major [M, D].
template <typename T>
Tensor<T> compute_features(const MultiHeadModel<T>& model, const LabeledImageSet& set, std::size_t chunk = 256);

/// OSSLEMB1: "OSSLEMB1", u32 M, u32 D, M*D little-endian f32, M u16 labels.
struct Embeddings {
  std::size_t rows = 0;
  std::size_t dim = 0;
  std::vector<float> values;
  std::vector<std::uint16_t> labels;
};

std::vector<std::uint8_t> encode_embeddings(const Embeddings& e);
Embeddings decode_embeddings(const std::vector<std::uint8_t>& bytes, const std::string& source);
Embeddings load_embeddings(const std::filesystem::path& path);
void save_embeddings(const Embeddings& e, const std::filesystem::path& path);

Embeddings export_embeddings(const MultiHeadModel<float>& model, const LabeledImageSet& set,
                             const std::filesystem::path& path);

}  // namespace ossl
