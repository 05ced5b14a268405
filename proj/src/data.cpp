#include "ossl/data.hpp"

#include <algorithm>
#include <cmath>

#include "ossl/binary_io.hpp"
#include "ossl/rng.hpp"

namespace ossl {

namespace {

constexpr std::uint32_t kIdxImagesMagic = 0x00000803;
constexpr std::uint32_t kIdxLabelsMagic = 0x00000801;
constexpr std::size_t kCifarRecord = 3073;
constexpr std::string_view kRawMagic = "OSSLRAW1";
constexpr std::uint64_t kBlobTemplateSeed = 0x0b10b5ULL;

Tensor<float> make_images(std::size_t m, std::size_t c, std::size_t h, std::size_t w) {
  return Tensor<float>(Shape{m, c, h, w});
}

}  // namespace

LabeledImageSet load_idx(const std::filesystem::path& images_path, const std::filesystem::path& labels_path,
                         std::size_t class_count) {
  const auto image_bytes = io::read_file(images_path);
  const auto label_bytes = io::read_file(labels_path);
  io::ByteReader ri(images_path.string(), image_bytes);
  io::ByteReader rl(labels_path.string(), label_bytes);

  const std::uint32_t im_magic = ri.u32_be("IDX magic");
  if (im_magic != kIdxImagesMagic) ri.fail_at(0, "bad IDX image magic " + std::to_string(im_magic) + " (expected 2051)");
  const std::uint32_t lb_magic = rl.u32_be("IDX magic");
  if (lb_magic != kIdxLabelsMagic) rl.fail_at(0, "bad IDX label magic " + std::to_string(lb_magic) + " (expected 2049)");

  const std::uint32_t count = ri.u32_be("image count");
  const std::uint32_t rows = ri.u32_be("row count");
  const std::uint32_t cols = ri.u32_be("column count");
  if (rows == 0 || cols == 0) ri.fail_at(8, "image extents must be positive");
  const std::uint32_t label_count = rl.u32_be("label count");
  if (label_count != count) {
    rl.fail_at(4, "label count " + std::to_string(label_count) + " does not match image count " +
                      std::to_string(count));
  }
  const std::size_t plane = std::size_t{rows} * cols;
  ri.need(plane * count, "image payload");
  rl.need(count, "label payload");
  if (ri.remaining() != plane * count) ri.fail_at(16 + plane * count, "trailing bytes after image payload");
  if (rl.remaining() != count) rl.fail_at(8 + std::size_t{count}, "trailing bytes after label payload");

  LabeledImageSet set;
  set.images = make_images(count, 1, rows, cols);
  set.class_count = class_count;
  set.name = images_path.stem().string();
  const std::uint8_t* px = ri.cursor();
  for (std::size_t i = 0; i < plane * count; ++i) set.images[i] = static_cast<float>(px[i]) / 255.0f;
  set.labels.resize(count);
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t at = rl.offset();
    const std::uint8_t v = rl.u8("label");
    if (v >= class_count) rl.fail_at(at, "label " + std::to_string(v) + " outside [0, " + std::to_string(class_count) + ")");
    set.labels[i] = v;
  }
  return set;
}

LabeledImageSet load_cifar_bin(const std::vector<std::filesystem::path>& paths, std::size_t class_count) {
  std::vector<std::vector<std::uint8_t>> files;
  std::size_t total = 0;
  for (const auto& p : paths) {
    files.push_back(io::read_file(p));
    const std::size_t n = files.back().size();
    if (n % kCifarRecord != 0) {
      throw FormatError(p.string(), n - n % kCifarRecord,
                        "file length " + std::to_string(n) + " is not a multiple of " + std::to_string(kCifarRecord));
    }
    total += n / kCifarRecord;
  }
  LabeledImageSet set;
  set.images = make_images(total, 3, 32, 32);
  set.labels.resize(total);
  set.class_count = class_count;
  set.name = paths.empty() ? "cifar" : paths.front().stem().string();
  std::size_t m = 0;
  for (std::size_t f = 0; f < files.size(); ++f) {
    const auto& bytes = files[f];
    for (std::size_t off = 0; off < bytes.size(); off += kCifarRecord, ++m) {
      if (bytes[off] >= class_count) {
        throw FormatError(paths[f].string(), off, "label " + std::to_string(bytes[off]) + " out of range");
      }
      set.labels[m] = bytes[off];
      float* dst = set.images.data().data() + m * 3072;
      for (std::size_t i = 0; i < 3072; ++i) dst[i] = static_cast<float>(bytes[off + 1 + i]) / 255.0f;
    }
  }
  return set;
}

std::vector<std::uint8_t> encode_raw_tensor(const LabeledImageSet& set) {
  io::ByteWriter w;
  w.raw(kRawMagic);
  w.u32(static_cast<std::uint32_t>(set.size()));
  w.u32(static_cast<std::uint32_t>(set.images.dim(1)));
  w.u32(static_cast<std::uint32_t>(set.images.dim(2)));
  w.u32(static_cast<std::uint32_t>(set.images.dim(3)));
  w.u32(static_cast<std::uint32_t>(set.class_count));
  for (float v : set.images.data()) w.f32(v);
  for (auto l : set.labels) w.u16(l);
  return w.take();
}

LabeledImageSet decode_raw_tensor(const std::vector<std::uint8_t>& bytes, const std::string& source) {
  io::ByteReader r(source, bytes);
  if (r.raw(kRawMagic.size(), "magic") != kRawMagic) r.fail_at(0, "bad magic (expected \"OSSLRAW1\")");
  const std::uint32_t m = r.u32_le("count");
  const std::uint32_t c = r.u32_le("channels");
  const std::uint32_t h = r.u32_le("height");
  const std::uint32_t w = r.u32_le("width");
  const std::uint32_t classes = r.u32_le("class_count");
  if (c == 0 || h == 0 || w == 0) r.fail_at(12, "image extents must be positive");
  if (classes == 0) r.fail_at(24, "class_count must be positive");
  const std::size_t pixels = std::size_t{m} * c * h * w;
  const std::size_t expected = pixels * 4 + std::size_t{m} * 2;
  if (r.remaining() != expected) {
    r.fail("payload length " + std::to_string(r.remaining()) + " does not match the " + std::to_string(expected) +
           " bytes implied by the header");
  }
  LabeledImageSet set;
  set.images = make_images(m, c, h, w);
  set.class_count = classes;
  set.name = std::filesystem::path(source).stem().string();
  for (std::size_t i = 0; i < pixels; ++i) {
    const std::size_t at = r.offset();
    const float v = r.f32_le("pixel");
    if (!(v >= 0.0f && v <= 1.0f)) r.fail_at(at, "pixel value outside [0,1]");
    set.images[i] = v;
  }
  set.labels.resize(m);
  for (auto& l : set.labels) {
    const std::size_t at = r.offset();
    l = r.u16_le("label");
    if (l >= classes) r.fail_at(at, "label " + std::to_string(l) + " outside [0, " + std::to_string(classes) + ")");
  }
  return set;
}

void save_raw_tensor(const LabeledImageSet& set, const std::filesystem::path& path) {
  io::write_file(path, encode_raw_tensor(set));
}

LabeledImageSet load_raw_tensor(const std::filesystem::path& path) {
  return decode_raw_tensor(io::read_file(path), path.string());
}

std::string_view to_string(ResizeKind kind) {
  switch (kind) {
    case ResizeKind::none: return "none";
    case ResizeKind::bilinear: return "bilinear";
    case ResizeKind::nearest: return "nearest";
  }
  return "unknown";
}

ResizeKind parse_resize(std::string_view name) {
  if (name == "none") return ResizeKind::none;
  if (name == "bilinear") return ResizeKind::bilinear;
  if (name == "nearest") return ResizeKind::nearest;
  throw ValueError("unknown resize '" + std::string(name) + "' (expected none, bilinear or nearest)");
}

namespace {

void resize_plane(const std::vector<double>& src, std::size_t ih, std::size_t iw, ResizeKind kind, std::size_t oh,
                  std::size_t ow, double* dst) {
  if (kind == ResizeKind::nearest) {
    for (std::size_t i = 0; i < oh; ++i) {
      const std::size_t si = i * ih / oh;
      for (std::size_t j = 0; j < ow; ++j) dst[i * ow + j] = src[si * iw + j * iw / ow];
    }
    return;
  }
  // Bilinear with pixel-center alignment, clamped at the borders.
  const auto coord = [](std::size_t o, std::size_t in, std::size_t out, std::size_t& lo, std::size_t& hi,
                        double& frac) {
    double s = (static_cast<double>(o) + 0.5) * static_cast<double>(in) / static_cast<double>(out) - 0.5;
    s = std::clamp(s, 0.0, static_cast<double>(in - 1));
    lo = static_cast<std::size_t>(std::floor(s));
    hi = std::min(lo + 1, in - 1);
    frac = s - static_cast<double>(lo);
  };
  for (std::size_t i = 0; i < oh; ++i) {
    std::size_t y0, y1;
    double fy;
    coord(i, ih, oh, y0, y1, fy);
    for (std::size_t j = 0; j < ow; ++j) {
      std::size_t x0, x1;
      double fx;
      coord(j, iw, ow, x0, x1, fx);
      const double top = src[y0 * iw + x0] * (1.0 - fx) + src[y0 * iw + x1] * fx;
      const double bottom = src[y1 * iw + x0] * (1.0 - fx) + src[y1 * iw + x1] * fx;
      dst[i * ow + j] = top * (1.0 - fy) + bottom * fy;
    }
  }
}

}  // namespace

LabeledImageSet preprocess(const LabeledImageSet& set, const PreprocessSpec& spec) {
  const std::size_t M = set.size(), C = set.images.dim(1), H = set.images.dim(2), W = set.images.dim(3);
  const auto& t = spec.target;
  if (spec.grayscale) {
    if (C != 3 || t.channels != 1) {
      throw ValueError("grayscale conversion needs 3 source channels and 1 target channel, got " + std::to_string(C) +
                       " -> " + std::to_string(t.channels));
    }
  } else if (C != t.channels) {
    throw ValueError("cannot convert " + std::to_string(C) + " channels to " + std::to_string(t.channels) +
                     " without grayscale");
  }
  if (spec.resize == ResizeKind::none && (H != t.height || W != t.width)) {
    throw DimensionError("target.H", "resize 'none' but source is " + std::to_string(H) + "x" + std::to_string(W) +
                                         " and target " + std::to_string(t.height) + "x" + std::to_string(t.width));
  }
  if (!spec.normalize.empty() && spec.normalize.size() != t.channels) {
    throw ValueError("normalize needs one (mean, std) pair per target channel");
  }
  for (const auto& n : spec.normalize) {
    if (!(n.std > 0.0)) throw ValueError("normalization std must be positive");
  }

  LabeledImageSet out;
  out.labels = set.labels;
  out.name = set.name;
  out.role = set.role;
  out.class_count = set.class_count;
  out.images = Tensor<float>(Shape{M, t.channels, t.height, t.width});
  std::vector<double> plane(H * W);
  std::vector<double> resized(t.height * t.width);
  for (std::size_t m = 0; m < M; ++m) {
    const float* src = set.images.data().data() + m * C * H * W;
    for (std::size_t c = 0; c < t.channels; ++c) {
      if (spec.grayscale) {
        for (std::size_t i = 0; i < H * W; ++i) {
          plane[i] = 0.299 * src[i] + 0.587 * src[H * W + i] + 0.114 * src[2 * H * W + i];
        }
      } else {
        for (std::size_t i = 0; i < H * W; ++i) plane[i] = src[c * H * W + i];
      }
      if (spec.resize == ResizeKind::none) {
        resized = plane;
      } else {
        resize_plane(plane, H, W, spec.resize, t.height, t.width, resized.data());
      }
      const ChannelNorm n = spec.normalize.empty() ? ChannelNorm{} : spec.normalize[c];
      float* dst = out.images.data().data() + (m * t.channels + c) * t.height * t.width;
      for (std::size_t i = 0; i < resized.size(); ++i) dst[i] = static_cast<float>((resized[i] - n.mean) / n.std);
    }
  }
  return out;
}

std::vector<ChannelNorm> channel_statistics(const LabeledImageSet& set) {
  const std::size_t M = set.size(), C = set.images.dim(1), HW = set.images.dim(2) * set.images.dim(3);
  std::vector<ChannelNorm> out(C);
  if (M == 0) return out;
  for (std::size_t c = 0; c < C; ++c) {
    double s = 0.0, s2 = 0.0;
    for (std::size_t m = 0; m < M; ++m) {
      const float* p = set.images.data().data() + (m * C + c) * HW;
      for (std::size_t i = 0; i < HW; ++i) {
        s += p[i];
        s2 += static_cast<double>(p[i]) * p[i];
      }
    }
    const double n = static_cast<double>(M * HW);
    out[c].mean = s / n;
    out[c].std = std::sqrt(std::max(s2 / n - out[c].mean * out[c].mean, 0.0));
    if (out[c].std == 0.0) out[c].std = 1.0;
  }
  return out;
}

std::vector<std::size_t> epoch_permutation(std::size_t count, std::uint64_t shuffle_seed, std::uint64_t epoch) {
  std::vector<std::size_t> perm(count);
  for (std::size_t i = 0; i < count; ++i) perm[i] = i;
  const CounterRng rng(shuffle_seed, epoch);
  std::uint64_t counter = 0;
  for (std::size_t i = count; i > 1; --i) {
    const std::size_t j = rng.below(i, counter);
    std::swap(perm[i - 1], perm[j]);
  }
  return perm;
}

std::vector<std::vector<std::size_t>> batch_iter(std::size_t count, std::size_t batch_size,
                                                 std::uint64_t shuffle_seed, std::uint64_t epoch) {
  if (batch_size == 0) throw ValueError("batch_size must be positive");
  const auto perm = epoch_permutation(count, shuffle_seed, epoch);
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t start = 0; start < count; start += batch_size) {
    const std::size_t end = std::min(count, start + batch_size);
    batches.emplace_back(perm.begin() + static_cast<std::ptrdiff_t>(start),
                         perm.begin() + static_cast<std::ptrdiff_t>(end));
  }
  return batches;
}

Batch gather_batch(const LabeledImageSet& set, const std::vector<std::size_t>& indices) {
  const std::size_t C = set.images.dim(1), H = set.images.dim(2), W = set.images.dim(3), per = C * H * W;
  Batch b{Tensor<float>(Shape{indices.size(), C, H, W}), std::vector<std::uint16_t>(indices.size())};
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] >= set.size()) throw DimensionError("indices", "batch index out of range");
    std::copy_n(set.images.data().data() + indices[i] * per, per, b.images.data().data() + i * per);
    b.labels[i] = set.labels[indices[i]];
  }
  return b;
}

LabeledImageSet take_first(const LabeledImageSet& set, std::size_t count) {
  count = std::min(count, set.size());
  std::vector<std::size_t> idx(count);
  for (std::size_t i = 0; i < count; ++i) idx[i] = i;
  Batch b = gather_batch(set, idx);
  LabeledImageSet out = set;
  out.images = std::move(b.images);
  out.labels = std::move(b.labels);
  return out;
}

LabeledImageSet make_synthetic_blobs(std::size_t count, std::size_t classes, const InputSpec& shape,
                                     std::uint64_t seed, double noise) {
  if (classes < 2) throw ValueError("synthetic blobs need at least 2 classes");
  const std::size_t per = shape.channels * shape.height * shape.width;
  std::vector<std::vector<double>> templates(classes, std::vector<double>(per));
  for (std::size_t k = 0; k < classes; ++k) {
    const CounterRng rng(kBlobTemplateSeed, k);
    for (std::size_t i = 0; i < per; ++i) templates[k][i] = 0.2 + 0.6 * rng.uniform(i);
  }
  LabeledImageSet set;
  set.images = Tensor<float>(Shape{count, shape.channels, shape.height, shape.width});
  set.labels.resize(count);
  set.class_count = classes;
  set.name = "synthetic";
  for (std::size_t m = 0; m < count; ++m) {
    const std::size_t k = m % classes;
    set.labels[m] = static_cast<std::uint16_t>(k);
    const CounterRng rng(seed, m);
    for (std::size_t i = 0; i < per; ++i) {
      set.images[m * per + i] = static_cast<float>(std::clamp(templates[k][i] + noise * rng.normal(i), 0.0, 1.0));
    }
  }
  return set;
}

}  // namespace ossl
