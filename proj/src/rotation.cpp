#include "ossl/rotation.hpp"

#include <array>
#include <string>

namespace ossl {

namespace {

template <typename T>
void rotate_plane(const T* src, std::size_t H, std::size_t W, int r, T* dst) {
  // Destination extents: (W, H) for odd r, (H, W) otherwise.
  switch (r) {
    case 0:
      std::copy_n(src, H * W, dst);
      break;
    case 1:  // out[i][j] = in[j][W-1-i], out is W x H
      for (std::size_t i = 0; i < W; ++i) {
        for (std::size_t j = 0; j < H; ++j) dst[i * H + j] = src[j * W + (W - 1 - i)];
      }
      break;
    case 2:
      for (std::size_t i = 0; i < H; ++i) {
        for (std::size_t j = 0; j < W; ++j) dst[i * W + j] = src[(H - 1 - i) * W + (W - 1 - j)];
      }
      break;
    case 3:  // out[i][j] = in[H-1-j][i], out is W x H
      for (std::size_t i = 0; i < W; ++i) {
        for (std::size_t j = 0; j < H; ++j) dst[i * H + j] = src[(H - 1 - j) * W + i];
      }
      break;
  }
}

void check_r(int r) {
  if (r < 0 || r > 3) throw ValueError("rotation index must be in 0..3, got " + std::to_string(r));
}

}  // namespace

template <typename T>
Tensor<T> rotate90(const Tensor<T>& image, int r) {
  check_r(r);
  if (image.rank() != 3) throw DimensionError("image.rank", "rotate90 expects [C,H,W], got " + shape_str(image.shape()));
  const std::size_t C = image.dim(0), H = image.dim(1), W = image.dim(2);
  Tensor<T> out(r % 2 ? Shape{C, W, H} : Shape{C, H, W});
  for (std::size_t c = 0; c < C; ++c) {
    rotate_plane(image.data().data() + c * H * W, H, W, r, out.data().data() + c * H * W);
  }
  return out;
}

template <typename T>
std::vector<std::size_t> RotationBatch<T>::rows_for(int r) const {
  check_r(r);
  std::vector<std::size_t> rows;
  for (std::size_t row = static_cast<std::size_t>(r); row < source_index.size(); row += 4) rows.push_back(row);
  return rows;
}

template <typename T>
RotationBatch<T> make_rotation_batch(const Tensor<T>& images) {
  if (images.rank() != 4) {
    throw DimensionError("images.rank", "make_rotation_batch expects [N,C,H,W], got " + shape_str(images.shape()));
  }
  const std::size_t N = images.dim(0), C = images.dim(1), H = images.dim(2), W = images.dim(3);
  if (H != W) {
    throw DimensionError("images.W", "rotation batches need square images, got " + std::to_string(H) + "x" +
                                         std::to_string(W));
  }
  const std::size_t plane = H * W, per_image = C * plane;
  RotationBatch<T> batch{Tensor<T>(Shape{4 * N, C, H, W}), Tensor<T>(Shape{4 * N, 4}), {}};
  batch.source_index.resize(4 * N);
  for (std::size_t k = 0; k < N; ++k) {
    for (int r = 0; r < 4; ++r) {
      const std::size_t row = 4 * k + static_cast<std::size_t>(r);
      for (std::size_t c = 0; c < C; ++c) {
        rotate_plane(images.data().data() + k * per_image + c * plane, H, W, r,
                     batch.images.data().data() + row * per_image + c * plane);
      }
      batch.rot_labels[row * 4 + static_cast<std::size_t>(r)] = T(1);
      batch.source_index[row] = k;
    }
  }
  return batch;
}

template <typename T>
RotationBatch<T> make_rotation_batch(Tape<T>& tape, const Tensor<T>& images) {
  RotationBatch<T> batch = make_rotation_batch(images);
  if (!tape.needs_grad({&images})) return batch;
  batch.images.set_requires_grad(true);
  const std::size_t N = images.dim(0), C = images.dim(1), H = images.dim(2);
  const std::size_t plane = H * H, per_image = C * plane;
  // Every output pixel is one input pixel, so the backward pass scatters
  // through the same plane permutations.
  std::vector<std::size_t> identity(plane);
  for (std::size_t i = 0; i < plane; ++i) identity[i] = i;
  std::array<std::vector<std::size_t>, 4> source;
  for (int r = 0; r < 4; ++r) {
    source[r].resize(plane);
    rotate_plane(identity.data(), H, H, r, source[r].data());
  }
  Tensor<T> out = batch.images;
  tape.record(OpKind::rotation_batch, out, {&images}, [images, out, source, N, C, plane, per_image]() mutable {
    const auto g = out.grad();
    auto gx = images.grad_slot();
    for (std::size_t k = 0; k < N; ++k)
      for (std::size_t r = 0; r < 4; ++r)
        for (std::size_t c = 0; c < C; ++c) {
          const std::size_t src = k * per_image + c * plane, dst = (4 * k + r) * per_image + c * plane;
          for (std::size_t i = 0; i < plane; ++i) gx[src + source[r][i]] += g[dst + i];
        }
  });
  return batch;
}

template Tensor<float> rotate90(const Tensor<float>&, int);
template Tensor<double> rotate90(const Tensor<double>&, int);
template struct RotationBatch<float>;
template struct RotationBatch<double>;
template RotationBatch<float> make_rotation_batch(const Tensor<float>&);
template RotationBatch<double> make_rotation_batch(const Tensor<double>&);
template RotationBatch<float> make_rotation_batch(Tape<float>&, const Tensor<float>&);
template RotationBatch<double> make_rotation_batch(Tape<double>&, const Tensor<double>&);

}  // namespace ossl
