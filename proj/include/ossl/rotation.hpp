#pragma once

#include <array>
#include <cstddef>
#include <vector>

#include "ossl/tape.hpp"
#include "ossl/tensor.hpp"

namespace ossl {

inline constexpr std::array<int, 4> kRotationDegrees = {0, 90, 180, 270};

/// Exact counterclockwise rotation of a [C,H,W] image by r * 90 degrees
/// (r in 0..3). Odd r swaps the spatial extents. Pure pixel permutation.
template <typename T>
Tensor<T> rotate90(const Tensor<T>& image, int r);

/// Four rotated copies of every source image.
template <typename T>
struct RotationBatch {
  Tensor<T> images;                      // [4N, C, H, W]; rows 4k..4k+3 are image k at 0, 90, 180, 270
  Tensor<T> rot_labels;                  // [4N, 4] one-hot
  std::vector<std::size_t> source_index;  // row -> source image
  std::vector<std::size_t> rows_for(int r) const;  // rows holding rotation r, in source order
};

/// Requires square images (H == W).
template <typename T>
RotationBatch<T> make_rotation_batch(const Tensor<T>& images);

/// Same batch, with the rotation recorded on `tape` so gradients reach `images`.
template <typename T>
RotationBatch<T> make_rotation_batch(Tape<T>& tape, const Tensor<T>& images);

}  // namespace ossl
