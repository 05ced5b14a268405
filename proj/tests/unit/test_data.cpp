#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <set>

#include "gen.hpp"
#include "ossl/data.hpp"

using namespace ossl;
namespace fs = std::filesystem;
using Bytes = std::vector<std::uint8_t>;

namespace {

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / "ossl_test_data";
  fs::create_directories(dir);
  return dir / name;
}

void write(const fs::path& p, const Bytes& b) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out.write(reinterpret_cast<const char*>(b.data()), static_cast<std::streamsize>(b.size()));
}

void be32(Bytes& b, std::uint32_t v) {
  for (int s = 24; s >= 0; s -= 8) b.push_back(static_cast<std::uint8_t>(v >> s));
}

Bytes idx_images(std::uint32_t count, std::uint32_t rows, std::uint32_t cols, std::uint32_t magic = 0x803) {
  Bytes b;
  be32(b, magic);
  be32(b, count);
  be32(b, rows);
  be32(b, cols);
  for (std::uint32_t i = 0; i < count * rows * cols; ++i) b.push_back(static_cast<std::uint8_t>(i * 17));
  return b;
}

Bytes idx_labels(const std::vector<std::uint8_t>& labels, std::uint32_t magic = 0x801) {
  Bytes b;
  be32(b, magic);
  be32(b, static_cast<std::uint32_t>(labels.size()));
  b.insert(b.end(), labels.begin(), labels.end());
  return b;
}

template <typename F>
std::size_t error_offset(F&& f) {
  try {
    f();
  } catch (const FormatError& e) {
    return e.offset();
  }
  return SIZE_MAX;
}

std::size_t idx_error(const Bytes& images, const Bytes& labels, std::size_t classes = 10) {
  const auto pi = scratch("img.idx"), pl = scratch("lab.idx");
  write(pi, images);
  write(pl, labels);
  return error_offset([&] { load_idx(pi, pl, classes); });
}

LabeledImageSet small_set(std::size_t m, std::size_t c, std::size_t h, std::size_t w, std::uint64_t seed) {
  testsupport::Gen g(seed);
  LabeledImageSet s;
  s.images = g.tensor<float>({m, c, h, w}, 0, 1);
  s.labels = g.labels(m, 5);
  s.class_count = 5;
  s.name = "small";
  return s;
}

}  // namespace

TEST(Idx, LoadsFixture) {
  write(scratch("a-images.idx"), idx_images(3, 2, 2));
  write(scratch("a-labels.idx"), idx_labels({7, 0, 9}));
  const auto s = load_idx(scratch("a-images.idx"), scratch("a-labels.idx"));
  ASSERT_EQ(s.images.shape(), (Shape{3, 1, 2, 2}));
  EXPECT_EQ(s.labels, (std::vector<std::uint16_t>{7, 0, 9}));
  for (std::size_t i = 0; i < 12; ++i) EXPECT_EQ(s.images[i], static_cast<float>(static_cast<std::uint8_t>(i * 17)) / 255.0f);
  EXPECT_EQ(s.class_count, 10u);
}

TEST(Idx, NegativeCases) {
  EXPECT_EQ(idx_error(idx_images(2, 2, 2, 0x804), idx_labels({1, 2})), 0u);
  EXPECT_EQ(idx_error(idx_images(2, 2, 2), idx_labels({1, 2}, 0x803)), 0u);
  EXPECT_EQ(idx_error(idx_images(2, 2, 2), idx_labels({1, 2, 3})), 4u);
  auto trunc = idx_images(2, 2, 2);
  trunc.pop_back();
  EXPECT_EQ(idx_error(trunc, idx_labels({1, 2})), 16u);
  auto extra = idx_images(2, 2, 2);
  extra.push_back(0);
  EXPECT_EQ(idx_error(extra, idx_labels({1, 2})), 24u);
  EXPECT_EQ(idx_error(idx_images(2, 2, 2), idx_labels({1, 12})), 9u);
  EXPECT_EQ(idx_error(Bytes{0, 0}, idx_labels({1})), 0u);
  EXPECT_THROW(load_idx("/nonexistent/x.idx", "/nonexistent/y.idx"), IoError);
}

TEST(Idx, HandWrittenTwoImageFixture) {
  Bytes img = {0, 0, 8, 3, 0, 0, 0, 2, 0, 0, 0, 4, 0, 0, 0, 4};
  for (int i = 0; i < 16; ++i) img.push_back(static_cast<std::uint8_t>(i));
  for (int i = 0; i < 16; ++i) img.push_back(static_cast<std::uint8_t>(255 - i * 16));
  write(scratch("h-images.idx"), img);
  write(scratch("h-labels.idx"), Bytes{0, 0, 8, 1, 0, 0, 0, 2, 4, 1});
  const auto s = load_idx(scratch("h-images.idx"), scratch("h-labels.idx"));
  ASSERT_EQ(s.images.shape(), (Shape{2, 1, 4, 4}));
  EXPECT_EQ(s.labels, (std::vector<std::uint16_t>{4, 1}));
  for (int i = 0; i < 16; ++i) {
    EXPECT_EQ(s.images[i], static_cast<float>(i) / 255.0f);
    EXPECT_EQ(s.images[16 + i], static_cast<float>(255 - i * 16) / 255.0f);
  }
}

TEST(Idx, ZeroImageFileIsEmptySet) {
  write(scratch("z-images.idx"), idx_images(0, 28, 28));
  write(scratch("z-labels.idx"), idx_labels({}));
  const auto s = load_idx(scratch("z-images.idx"), scratch("z-labels.idx"));
  EXPECT_EQ(s.images.shape(), (Shape{0, 1, 28, 28}));
  EXPECT_TRUE(s.labels.empty());
}

TEST(Cifar, LoadsRecordsAcrossFiles) {
  Bytes a(2 * 3073), b(3073);
  a[0] = 3;
  a[1] = 255;
  a[3073] = 9;
  a[3073 + 1 + 1024] = 51;  // first green pixel of the second record
  b[0] = 0;
  b[3072] = 102;
  write(scratch("c1.bin"), a);
  write(scratch("c2.bin"), b);
  const auto s = load_cifar_bin({scratch("c1.bin"), scratch("c2.bin")});
  ASSERT_EQ(s.images.shape(), (Shape{3, 3, 32, 32}));
  EXPECT_EQ(s.labels, (std::vector<std::uint16_t>{3, 9, 0}));
  EXPECT_EQ(s.images[0], 1.0f);
  EXPECT_EQ(s.images[3072 + 1024], 0.2f);
  EXPECT_EQ(s.images[2 * 3072 + 3071], 0.4f);
}

TEST(Cifar, SingleRecordRampAndBoundaries) {
  Bytes rec(3073);
  rec[0] = 7;
  for (std::size_t i = 0; i < 3072; ++i) rec[1 + i] = static_cast<std::uint8_t>(i % 256);
  write(scratch("ramp.bin"), rec);
  const auto s = load_cifar_bin({scratch("ramp.bin")});
  ASSERT_EQ(s.images.shape(), (Shape{1, 3, 32, 32}));
  EXPECT_EQ(s.labels, (std::vector<std::uint16_t>{7}));
  for (std::size_t i = 0; i < 3072; ++i) ASSERT_EQ(s.images[i], static_cast<float>(i % 256) / 255.0f);

  write(scratch("empty.bin"), Bytes{});
  EXPECT_EQ(load_cifar_bin({scratch("empty.bin")}).images.shape(), (Shape{0, 3, 32, 32}));
  write(scratch("short.bin"), Bytes(3072));
  EXPECT_EQ(error_offset([] { load_cifar_bin({scratch("short.bin")}); }), 0u);
}

TEST(Cifar, NegativeCases) {
  write(scratch("bad.bin"), Bytes(3073 + 100));
  EXPECT_EQ(error_offset([] { load_cifar_bin({scratch("bad.bin")}); }), 3073u);
  Bytes bad_label(2 * 3073);
  bad_label[3073] = 10;
  write(scratch("badlabel.bin"), bad_label);
  EXPECT_EQ(error_offset([] { load_cifar_bin({scratch("badlabel.bin")}); }), 3073u);
}

TEST(RawTensor, RoundTripIsBitwise) {
  const auto s = small_set(4, 3, 5, 6, 1);
  const auto bytes = encode_raw_tensor(s);
  EXPECT_EQ(bytes.size(), 8u + 20 + 360 * 4 + 4 * 2);
  const auto back = decode_raw_tensor(bytes, "x.raw");
  EXPECT_TRUE(bitwise_equal(back.images, s.images));
  EXPECT_EQ(back.labels, s.labels);
  EXPECT_EQ(back.class_count, 5u);
  save_raw_tensor(s, scratch("rt.raw"));
  EXPECT_EQ(encode_raw_tensor(load_raw_tensor(scratch("rt.raw"))), bytes);
}

TEST(RawTensor, EmptySetAndCrossFormatEquality) {
  LabeledImageSet empty;
  empty.images = Tensor<float>(Shape{0, 1, 4, 4});
  empty.class_count = 10;
  const auto e = decode_raw_tensor(encode_raw_tensor(empty), "e.raw");
  EXPECT_EQ(e.images.shape(), (Shape{0, 1, 4, 4}));
  EXPECT_TRUE(e.labels.empty());

  // OSSLRAW1 bytes assembled by hand from the IDX fixture bytes must load to the same values.
  write(scratch("x-images.idx"), idx_images(3, 4, 4));
  write(scratch("x-labels.idx"), idx_labels({2, 5, 8}));
  const auto via_idx = load_idx(scratch("x-images.idx"), scratch("x-labels.idx"));
  Bytes raw = {'O', 'S', 'S', 'L', 'R', 'A', 'W', '1'};
  auto le32 = [&](std::uint32_t v) {
    for (int sh = 0; sh < 32; sh += 8) raw.push_back(static_cast<std::uint8_t>(v >> sh));
  };
  for (std::uint32_t v : {3u, 1u, 4u, 4u, 10u}) le32(v);
  const auto idx_bytes = idx_images(3, 4, 4);
  for (std::size_t i = 16; i < idx_bytes.size(); ++i) {
    const float f = static_cast<float>(idx_bytes[i]) / 255.0f;
    std::uint32_t u;
    std::memcpy(&u, &f, 4);
    le32(u);
  }
  for (std::uint8_t l : {2, 5, 8}) {
    raw.push_back(l);
    raw.push_back(0);
  }
  const auto via_raw = decode_raw_tensor(raw, "x.raw");
  EXPECT_TRUE(bitwise_equal(via_raw.images, via_idx.images));
  EXPECT_EQ(via_raw.labels, via_idx.labels);
  EXPECT_EQ(encode_raw_tensor(via_idx), raw);
}

TEST(RawTensor, NegativeCases) {
  const auto bytes = encode_raw_tensor(small_set(2, 1, 2, 2, 2));
  auto offset = [](const Bytes& b) { return error_offset([&] { decode_raw_tensor(b, "x.raw"); }); };
  auto magic = bytes;
  magic[7] = '2';
  EXPECT_EQ(offset(magic), 0u);
  auto truncated = bytes;
  truncated.pop_back();
  EXPECT_EQ(offset(truncated), 28u);
  auto longer = bytes;
  longer.push_back(0);
  EXPECT_EQ(offset(longer), 28u);
  auto pixel = bytes;
  const float bad = 1.5f;
  std::memcpy(pixel.data() + 28 + 4, &bad, 4);
  EXPECT_EQ(offset(pixel), 32u);
  auto label = bytes;
  label[label.size() - 2] = 5;  // class_count is 5
  label[label.size() - 1] = 0;
  EXPECT_EQ(offset(label), bytes.size() - 2);
  EXPECT_NE(offset(Bytes{'O', 'S'}), SIZE_MAX);
}

TEST(Preprocess, IdentitySpecIsNoOp) {
  const auto s = small_set(3, 1, 4, 4, 3);
  PreprocessSpec spec;
  spec.target = {1, 4, 4};
  const auto out = preprocess(s, spec);
  EXPECT_TRUE(bitwise_equal(out.images, s.images));
  EXPECT_EQ(out.labels, s.labels);
}

TEST(Preprocess, ConstantImageSurvivesEveryResize) {
  LabeledImageSet s;
  s.images = Tensor<float>(Shape{1, 3, 7, 5}, 0.25f);
  s.labels = {0};
  for (auto kind : {ResizeKind::bilinear, ResizeKind::nearest}) {
    PreprocessSpec spec;
    spec.target = {1, 16, 16};
    spec.grayscale = true;
    spec.resize = kind;
    spec.normalize = {{0.25, 0.5}};
    const auto out = preprocess(s, spec);
    ASSERT_EQ(out.images.shape(), (Shape{1, 1, 16, 16}));
    for (float v : out.images.data()) EXPECT_NEAR(v, 0.0f, 1e-7);
  }
}

TEST(Preprocess, NearestUpscaleOfCheckerboard) {
  LabeledImageSet s;
  s.images = Tensor<float>(Shape{1, 1, 2, 2}, std::vector<float>{0, 1, 1, 0});
  s.labels = {0};
  PreprocessSpec spec;
  spec.target = {1, 4, 4};
  spec.resize = ResizeKind::nearest;
  const auto out = preprocess(s, spec);
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 4; ++j) EXPECT_EQ(out.images[i * 4 + j], static_cast<float>(((i / 2) + (j / 2)) % 2));
}

TEST(Preprocess, BilinearHalfPixelCenters) {
  LabeledImageSet s;
  s.images = Tensor<float>(Shape{1, 1, 1, 2}, std::vector<float>{0, 1});
  s.labels = {0};
  PreprocessSpec spec;
  spec.target = {1, 1, 4};
  spec.resize = ResizeKind::bilinear;
  const auto out = preprocess(s, spec);
  // Output centers map to input x = -0.25, 0.25, 0.75, 1.25, clamped to [0, 1].
  const float want[] = {0.0f, 0.25f, 0.75f, 1.0f};
  for (int j = 0; j < 4; ++j) EXPECT_NEAR(out.images[j], want[j], 1e-7);
}

TEST(Preprocess, LumaWeights) {
  LabeledImageSet s;
  s.images = Tensor<float>(Shape{1, 3, 1, 1}, std::vector<float>{1, 0.5f, 0});
  s.labels = {0};
  PreprocessSpec spec;
  spec.target = {1, 1, 1};
  spec.grayscale = true;
  EXPECT_NEAR(preprocess(s, spec).images[0], 0.299 + 0.5 * 0.587, 1e-7);
  spec.target = {3, 1, 1};
  EXPECT_THROW(preprocess(s, spec), ValueError);
}

TEST(ChannelStatistics, PopulationMomentsAndZeroStd) {
  LabeledImageSet s;
  s.images = Tensor<float>(Shape{2, 2, 1, 2}, std::vector<float>{0, 1, 0.5f, 0.5f, 1, 0, 0.5f, 0.5f});
  s.labels = {0, 0};
  const auto st = channel_statistics(s);
  ASSERT_EQ(st.size(), 2u);
  EXPECT_DOUBLE_EQ(st[0].mean, 0.5);
  EXPECT_DOUBLE_EQ(st[0].std, 0.5);
  EXPECT_DOUBLE_EQ(st[1].mean, 0.5);
  EXPECT_DOUBLE_EQ(st[1].std, 1.0);
}

// Property: every epoch's batches partition [0, count) and depend only on (seed, epoch).
TEST(BatchIter, PartitionsAndIsDeterministic) {
  testsupport::Gen g(4);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t count = g.index(50), bs = 1 + g.index(9);
    const std::uint64_t seed = g.index(1000), epoch = 1 + g.index(10);
    const auto batches = batch_iter(count, bs, seed, epoch);
    EXPECT_EQ(batches.size(), (count + bs - 1) / bs);
    std::multiset<std::size_t> seen;
    for (std::size_t i = 0; i < batches.size(); ++i) {
      EXPECT_EQ(batches[i].size(), i + 1 < batches.size() ? bs : count - bs * i);
      seen.insert(batches[i].begin(), batches[i].end());
    }
    std::multiset<std::size_t> want;
    for (std::size_t i = 0; i < count; ++i) want.insert(i);
    EXPECT_EQ(seen, want);
    EXPECT_EQ(batch_iter(count, bs, seed, epoch), batches);
  }
  EXPECT_NE(epoch_permutation(100, 1, 1), epoch_permutation(100, 1, 2));
  EXPECT_NE(epoch_permutation(100, 1, 1), epoch_permutation(100, 2, 1));
}

TEST(GatherBatch, CopiesRowsInIndexOrder) {
  const auto s = small_set(5, 1, 2, 2, 5);
  const auto b = gather_batch(s, {4, 1});
  ASSERT_EQ(b.images.shape(), (Shape{2, 1, 2, 2}));
  for (std::size_t i = 0; i < 4; ++i) {
    EXPECT_EQ(b.images[i], s.images[16 + i]);
    EXPECT_EQ(b.images[4 + i], s.images[4 + i]);
  }
  EXPECT_EQ(b.labels, (std::vector<std::uint16_t>{s.labels[4], s.labels[1]}));
  EXPECT_EQ(take_first(s, 3).size(), 3u);
  EXPECT_EQ(take_first(s, 30).size(), 5u);
}

TEST(SyntheticBlobs, ShapesLabelsRangeAndSharedTemplates) {
  const auto a = make_synthetic_blobs(10, 3, {1, 8, 8}, 1, 0.0);
  const auto b = make_synthetic_blobs(10, 3, {1, 8, 8}, 2, 0.0);
  EXPECT_EQ(a.labels[4], 1);
  EXPECT_TRUE(bitwise_equal(a.images, b.images));  // noise-free: only templates
  const auto n = make_synthetic_blobs(10, 3, {1, 8, 8}, 1, 0.5);
  for (float v : n.images.data()) {
    EXPECT_GE(v, 0.0f);
    EXPECT_LE(v, 1.0f);
  }
  EXPECT_TRUE(bitwise_equal(n.images, make_synthetic_blobs(10, 3, {1, 8, 8}, 1, 0.5).images));
}
