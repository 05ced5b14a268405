#include <gtest/gtest.h>

#include <cmath>

#include "ossl/ops.hpp"
#include "ossl/tape.hpp"
#include "ossl/tensor.hpp"

using namespace ossl;

TEST(Tensor, FillConstructorSetsShapeAndValues) {
  Tensor<float> t(Shape{2, 3}, 1.5f);
  EXPECT_EQ(t.rank(), 2u);
  EXPECT_EQ(t.numel(), 6u);
  for (float v : t.data()) EXPECT_EQ(v, 1.5f);
  EXPECT_FALSE(t.requires_grad());
}

TEST(Tensor, DataLengthMismatchNamesDataAxis) {
  try {
    Tensor<double>(Shape{2, 2}, std::vector<double>{1, 2, 3});
    FAIL() << "expected DimensionError";
  } catch (const DimensionError& e) {
    EXPECT_EQ(e.axis(), "data");
  }
}

TEST(Tensor, ZeroExtentOnlyAllowedOnLeadingAxis) {
  EXPECT_NO_THROW(Tensor<float>(Shape{0, 3}));
  try {
    Tensor<float>(Shape{3, 0});
    FAIL() << "expected DimensionError";
  } catch (const DimensionError& e) {
    EXPECT_EQ(e.axis(), "axis1");
  }
  EXPECT_THROW(Tensor<float>(Shape{}), DimensionError);
}

TEST(Tensor, CopiesAliasClonesDoNot) {
  Tensor<float> a(Shape{3}, 0.0f);
  Tensor<float> alias = a;
  Tensor<float> deep = a.clone();
  a[1] = 7.0f;
  EXPECT_EQ(alias[1], 7.0f);
  EXPECT_EQ(deep[1], 0.0f);
  EXPECT_TRUE(alias.same_storage(a));
  EXPECT_FALSE(deep.same_storage(a));
}

TEST(Tensor, GradSlotRequiresFlag) {
  Tensor<double> plain(Shape{2});
  EXPECT_THROW(plain.grad_slot(), AutogradError);
  Tensor<double> p(Shape{2}, 0.0, true);
  EXPECT_FALSE(p.has_grad());
  auto g = p.grad_slot();
  EXPECT_EQ(g.size(), 2u);
  EXPECT_EQ(g[0], 0.0);
  EXPECT_TRUE(p.has_grad());
  p.zero_grad();
  EXPECT_FALSE(p.has_grad());
}

TEST(Tensor, ItemNeedsSingleElement) {
  EXPECT_EQ(Tensor<float>::scalar(3.0f).item(), 3.0f);
  EXPECT_THROW(Tensor<float>(Shape{2}).item(), DimensionError);
}

TEST(Tensor, BitwiseEqualDistinguishesSignedZero) {
  Tensor<double> a(Shape{1}, std::vector<double>{0.0});
  Tensor<double> b(Shape{1}, std::vector<double>{-0.0});
  EXPECT_FALSE(bitwise_equal(a, b));
  EXPECT_TRUE(bitwise_equal(a, a.clone()));
  EXPECT_FALSE(bitwise_equal(a, a.reshaped(Shape{1, 1})));
}

TEST(Tape, BackwardTwiceIsAnError) {
  Tape<double> tape;
  Tensor<double> x(Shape{3}, 1.0, true);
  auto s = sum(tape, x);
  tape.backward(s);
  EXPECT_THROW(tape.backward(s), AutogradError);
}

TEST(Tape, NonScalarLossIsAnError) {
  Tape<double> tape;
  Tensor<double> x(Shape{3}, 1.0, true);
  auto y = scale(tape, x, 2.0);
  EXPECT_THROW(tape.backward(y), AutogradError);
}

TEST(Tape, LossFromAnotherTapeIsAnError) {
  Tape<double> a, b;
  Tensor<double> x(Shape{3}, 1.0, true);
  auto s = sum(a, x);
  EXPECT_THROW(b.backward(s), AutogradError);
}

TEST(Tape, InferenceModeRecordsNothing) {
  Tape<double> tape(Tape<double>::Mode::inference);
  Tensor<double> x(Shape{3}, 1.0, true);
  auto s = sum(tape, x);
  EXPECT_EQ(tape.size(), 0u);
  EXPECT_FALSE(s.requires_grad());
  EXPECT_EQ(s.item(), 3.0);
}

TEST(Tape, ConstantsAreNotRecorded) {
  Tape<double> tape;
  Tensor<double> x(Shape{3}, 1.0);
  auto s = sum(tape, x);
  EXPECT_EQ(tape.size(), 0u);
  EXPECT_THROW(tape.backward(s), AutogradError);
}
