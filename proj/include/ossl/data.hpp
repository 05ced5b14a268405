#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "ossl/nn.hpp"
#include "ossl/tensor.hpp"

namespace ossl {

enum class SetRole { train, ood_test };

/// Images in [0,1] (before normalization) with integer class labels.
struct LabeledImageSet {
  Tensor<float> images;  // [M, C, H, W]
  std::vector<std::uint16_t> labels;
  std::string name;
  SetRole role = SetRole::train;
  std::size_t class_count = 10;

  std::size_t size() const noexcept { return labels.size(); }
  InputSpec image_spec() const { return {images.dim(1), images.dim(2), images.dim(3)}; }
};

/// IDX pair (big-endian magic 0x00000803 for images, 0x00000801 for labels).
/// Pixels are scaled by 1/255.
LabeledImageSet load_idx(const std::filesystem::path& images_path, const std::filesystem::path& labels_path,
                         std::size_t class_count = 10);

/// CIFAR-10 binary batches: 3073-byte records (label, then R, G, B 32x32 planes).
LabeledImageSet load_cifar_bin(const std::vector<std::filesystem::path>& paths, std::size_t class_count = 10);

// OSSLRAW1 interchange: "OSSLRAW1", u32 M, C, H, W, class_count (little-endian),
// M*C*H*W f32 pixels in [0,1], then M u16 labels.
std::vector<std::uint8_t> encode_raw_tensor(const LabeledImageSet& set);
LabeledImageSet decode_raw_tensor(const std::vector<std::uint8_t>& bytes, const std::string& source);
void save_raw_tensor(const LabeledImageSet& set, const std::filesystem::path& path);
LabeledImageSet load_raw_tensor(const std::filesystem::path& path);

enum class ResizeKind { none, bilinear, nearest };
std::string_view to_string(ResizeKind kind);
ResizeKind parse_resize(std::string_view name);

struct ChannelNorm {
  double mean = 0.0;
  double std = 1.0;
};

struct PreprocessSpec {
  InputSpec target;
  bool grayscale = false;                // 3 -> 1 channels via luma (0.299, 0.587, 0.114)
  ResizeKind resize = ResizeKind::none;
  std::vector<ChannelNorm> normalize;    // per target channel; empty means none
};

/// Channel conversion, then resize, then (x - mean) / std. Labels are untouched.
LabeledImageSet preprocess(const LabeledImageSet& set, const PreprocessSpec& spec);

/// Per-channel population mean and standard deviation over every pixel.
std::vector<ChannelNorm> channel_statistics(const LabeledImageSet& set);

/// Deterministic permutation of [0, count) as a function of (seed, epoch).
std::vector<std::size_t> epoch_permutation(std::size_t count, std::uint64_t shuffle_seed, std::uint64_t epoch);

/// Index batches for one epoch; the final short batch is kept.
std::vector<std::vector<std::size_t>> batch_iter(std::size_t count, std::size_t batch_size,
                                                 std::uint64_t shuffle_seed, std::uint64_t epoch);

struct Batch {
  Tensor<float> images;
  std::vector<std::uint16_t> labels;
};

Batch gather_batch(const LabeledImageSet& set, const std::vector<std::size_t>& indices);

/// First `count` examples (or all, if fewer).
LabeledImageSet take_first(const LabeledImageSet& set, std::size_t count);

/// Class-template images plus Gaussian pixel noise, clipped to [0,1]. Labels cycle 0..classes-1.
/// Templates depend only on the class and shape, so sets drawn with different seeds share classes.
LabeledImageSet make_synthetic_blobs(std::size_t count, std::size_t classes, const InputSpec& shape,
                                     std::uint64_t seed, double noise = 0.1);

}  // namespace ossl
