#include <gtest/gtest.h>

#include <algorithm>

#include "gen.hpp"
#include "oracles.hpp"
#include "ossl/ops.hpp"
#include "ossl/rotation.hpp"

using namespace ossl;
using testsupport::Gen;
using testsupport::to_vec;

TEST(Rotate90, QuarterTurnFixture) {
  // 1 2 3          3 6
  // 4 5 6   --->   2 5
  //                1 4
  Tensor<float> img(Shape{1, 2, 3}, std::vector<float>{1, 2, 3, 4, 5, 6});
  const auto r = rotate90(img, 1);
  EXPECT_EQ(r.shape(), (Shape{1, 3, 2}));
  EXPECT_EQ(std::vector<float>(r.data().begin(), r.data().end()), (std::vector<float>{3, 6, 2, 5, 1, 4}));
  const auto h = rotate90(img, 2);
  EXPECT_EQ(std::vector<float>(h.data().begin(), h.data().end()), (std::vector<float>{6, 5, 4, 3, 2, 1}));
}

TEST(Rotate90, IdentityAndRangeErrors) {
  Gen g(1);
  auto img = g.tensor<float>({2, 4, 4});
  EXPECT_TRUE(bitwise_equal(rotate90(img, 0), img));
  EXPECT_FALSE(rotate90(img, 0).same_storage(img));
  EXPECT_THROW(rotate90(img, 4), ValueError);
  EXPECT_THROW(rotate90(img, -1), ValueError);
  EXPECT_THROW(rotate90(Tensor<float>(Shape{4, 4}), 1), DimensionError);
}

// Property: r_a then r_b equals r_(a+b mod 4), and every rotation is a pixel permutation.
TEST(Rotate90, GroupLawOnRandomImages) {
  Gen g(2);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t c = 1 + g.index(3), h = 1 + g.index(6), w = 1 + g.index(6);
    auto img = g.tensor<double>({c, h, w});
    for (int a = 0; a < 4; ++a) {
      const auto ra = rotate90(img, a);
      EXPECT_EQ(to_vec(ra), oracle::rotate_ccw(to_vec(img), c, h, w, a));
      for (int b = 0; b < 4; ++b) EXPECT_TRUE(bitwise_equal(rotate90(ra, b), rotate90(img, (a + b) % 4)));
      auto sorted_in = to_vec(img), sorted_out = to_vec(ra);
      std::sort(sorted_in.begin(), sorted_in.end());
      std::sort(sorted_out.begin(), sorted_out.end());
      EXPECT_EQ(sorted_in, sorted_out);
    }
  }
}

TEST(RotationBatch, LayoutLabelsAndRowsFor) {
  Gen g(3);
  auto imgs = g.tensor<float>({3, 2, 5, 5});
  const auto batch = make_rotation_batch(imgs);
  ASSERT_EQ(batch.images.shape(), (Shape{12, 2, 5, 5}));
  ASSERT_EQ(batch.rot_labels.shape(), (Shape{12, 4}));
  const std::size_t per = 2 * 25;
  for (std::size_t k = 0; k < 3; ++k) {
    Tensor<float> src(Shape{2, 5, 5}, std::vector<float>(imgs.data().begin() + k * per, imgs.data().begin() + (k + 1) * per));
    for (int r = 0; r < 4; ++r) {
      const std::size_t row = 4 * k + r;
      Tensor<float> got(Shape{2, 5, 5},
                        std::vector<float>(batch.images.data().begin() + row * per, batch.images.data().begin() + (row + 1) * per));
      EXPECT_TRUE(bitwise_equal(got, rotate90(src, r)));
      EXPECT_EQ(batch.source_index[row], k);
      for (int j = 0; j < 4; ++j) EXPECT_EQ(batch.rot_labels[row * 4 + j], j == r ? 1.0f : 0.0f);
    }
  }
  EXPECT_EQ(batch.rows_for(2), (std::vector<std::size_t>{2, 6, 10}));
}

TEST(RotationBatch, ConstantImagesGiveIdenticalPixelsDistinctLabels) {
  const auto batch = make_rotation_batch(Tensor<float>(Shape{2, 3, 6, 6}, 0.5f));
  const std::size_t per = 3 * 36;
  for (std::size_t row = 0; row < 8; ++row) {
    EXPECT_TRUE(std::equal(batch.images.data().begin() + row * per, batch.images.data().begin() + (row + 1) * per,
                           batch.images.data().begin()));
    for (std::size_t j = 0; j < 4; ++j) EXPECT_EQ(batch.rot_labels[row * 4 + j], j == row % 4 ? 1.0f : 0.0f);
  }
}

TEST(RotationBatch, RequiresSquareImages) {
  try {
    make_rotation_batch(Tensor<float>(Shape{1, 1, 4, 6}));
    FAIL();
  } catch (const DimensionError& e) {
    EXPECT_EQ(e.axis(), "images.W");
  }
}

// The pixels of rotation r come back through the inverse turn, (4 - r) % 4.
TEST(RotationBatch, TapedGradientIsSumOfInverseRotations) {
  Gen g(9);
  auto x = g.tensor<double>({2, 2, 3, 3}, -1, 1, true);
  const auto w = g.tensor<double>({8, 2, 3, 3});
  Tape<double> tape;
  const auto batch = make_rotation_batch(tape, x);
  EXPECT_TRUE(bitwise_equal(batch.images, make_rotation_batch(x).images));
  tape.backward(sum(tape, mul(tape, batch.images, w)));

  const auto wv = to_vec(w);
  std::vector<double> want(x.numel(), 0.0);
  for (std::size_t k = 0; k < 2; ++k)
    for (int r = 0; r < 4; ++r) {
      const std::vector<double> row(wv.begin() + (4 * k + r) * 18, wv.begin() + (4 * k + r + 1) * 18);
      const auto back = oracle::rotate_ccw(row, 2, 3, 3, (4 - r) % 4);
      for (std::size_t i = 0; i < 18; ++i) want[k * 18 + i] += back[i];
    }
  for (std::size_t i = 0; i < want.size(); ++i) EXPECT_NEAR(x.grad()[i], want[i], 1e-15) << i;

  Tape<double> inference(Tape<double>::Mode::inference);
  EXPECT_FALSE(make_rotation_batch(inference, x).images.requires_grad());
}
