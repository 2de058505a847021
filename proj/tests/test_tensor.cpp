#include <gtest/gtest.h>

#include "advtag/tensor.hpp"

using namespace advtag;

TEST(Tensor, ShapeAndAccess) {
  Tensor m = Tensor::matrix(2, 3, {1, 2, 3, 4, 5, 6});
  EXPECT_EQ(m.rank(), 2u);
  EXPECT_EQ(m.rows(), 2u);
  EXPECT_EQ(m.cols(), 3u);
  EXPECT_EQ(m.at(1, 2), 6.0);
  EXPECT_EQ(m.row(1)[0], 4.0);
  EXPECT_EQ(m.size(), 6u);
}

TEST(Tensor, DataSizeMustMatchShape) {
  EXPECT_THROW(Tensor(Shape{2, 2}, std::vector<double>{1, 2, 3}), std::invalid_argument);
}

TEST(Tensor, ItemRequiresOneElement) {
  EXPECT_EQ(Tensor::scalar(2.5).item(), 2.5);
  EXPECT_THROW(Tensor::vector({1, 2}).item(), std::exception);
}

TEST(Tensor, NormAndFiniteness) {
  Tensor v = Tensor::vector({3, 4});
  EXPECT_DOUBLE_EQ(v.squared_norm(), 25.0);
  EXPECT_TRUE(v.all_finite());
  v[0] = std::numeric_limits<double>::quiet_NaN();
  EXPECT_FALSE(v.all_finite());
}

TEST(Tensor, Axpy) {
  Tensor a = Tensor::vector({1, 1});
  a.axpy(2.0, Tensor::vector({1, -1}));
  EXPECT_EQ(a, Tensor::vector({3, -1}));
  EXPECT_THROW(a.axpy(1.0, Tensor::vector({1})), ShapeError);
}

TEST(Tensor, IdentityIsDiagonal) {
  Tensor i = Tensor::identity(3);
  for (std::size_t r = 0; r < 3; ++r) {
    for (std::size_t c = 0; c < 3; ++c) EXPECT_EQ(i.at(r, c), r == c ? 1.0 : 0.0);
  }
}

TEST(Tensor, ShapeErrorCarriesOperands) {
  const ShapeError e("matmul", {2, 3}, {4, 5});
  EXPECT_EQ(e.primitive(), "matmul");
  EXPECT_EQ(e.lhs(), (Shape{2, 3}));
  EXPECT_EQ(e.rhs(), (Shape{4, 5}));
  EXPECT_NE(std::string(e.what()).find("matmul"), std::string::npos);
}
