#include "groundrl/geometry.hpp"

#include <gtest/gtest.h>

#include "groundrl/rng.hpp"

namespace groundrl {
namespace {

Box random_box(Rng& rng, double extent) {
  for (;;) {
    double x1 = rng.uniform() * extent;
    double x2 = rng.uniform() * extent;
    double y1 = rng.uniform() * extent;
    double y2 = rng.uniform() * extent;
    if (x2 < x1) std::swap(x1, x2);
    if (y2 < y1) std::swap(y1, y2);
    if (x2 > x1 && y2 > y1) return Box(x1, y1, x2, y2);
  }
}

TEST(BoxTest, RejectsDegenerate) {
  EXPECT_THROW(Box(0, 0, 0, 4), DegenerateBoxError);
  EXPECT_THROW(Box(0, 0, 4, 0), DegenerateBoxError);
  EXPECT_THROW(Box(2, 2, 2, 2), DegenerateBoxError);
  EXPECT_THROW(Box(3, 0, 1, 4), DegenerateBoxError);
}

TEST(BoxTest, RejectsBadCoordinates) {
  EXPECT_THROW(Box(-1, 0, 4, 4), CoordinateError);
  EXPECT_THROW(Box(0, 0, std::numeric_limits<double>::infinity(), 4),
               CoordinateError);
  EXPECT_THROW(Box(0, std::nan(""), 4, 4), CoordinateError);
}

TEST(ImageDimsTest, RejectsNonPositive) {
  EXPECT_THROW(ImageDims(0, 10), CoordinateError);
  EXPECT_THROW(ImageDims(10, -1), CoordinateError);
}

TEST(CenterTest, KnownValues) {
  const Point a = center(Box(0, 0, 4, 4));
  EXPECT_EQ(a.x, 2);
  EXPECT_EQ(a.y, 2);
  const Point b = center(Box(1, 2, 3, 6));
  EXPECT_EQ(b.x, 2);
  EXPECT_EQ(b.y, 4);
  const Point c = center(Box(0, 0, 1, 1));
  EXPECT_EQ(c.x, 0.5);
  EXPECT_EQ(c.y, 0.5);
}

TEST(IouTest, KnownValues) {
  EXPECT_EQ(iou(Box(0, 0, 2, 2), Box(0, 0, 2, 2)), 1.0);
  EXPECT_EQ(iou(Box(0, 0, 2, 2), Box(5, 5, 7, 7)), 0.0);
  EXPECT_NEAR(iou(Box(0, 0, 2, 2), Box(1, 1, 3, 3)), 1.0 / 7.0, 1e-15);
}

TEST(IouTest, EdgeTouchingIsZero) {
  EXPECT_EQ(iou(Box(0, 0, 2, 2), Box(2, 0, 4, 2)), 0.0);
  EXPECT_EQ(iou(Box(0, 0, 2, 2), Box(0, 2, 2, 4)), 0.0);
}

TEST(IouTest, SymmetricAndBounded) {
  Rng rng(17);
  for (int i = 0; i < 500; ++i) {
    const Box a = random_box(rng, 100);
    const Box b = random_box(rng, 100);
    const double ab = iou(a, b);
    EXPECT_EQ(ab, iou(b, a));
    EXPECT_GE(ab, 0.0);
    EXPECT_LE(ab, 1.0);
    EXPECT_EQ(iou(a, a), 1.0);
  }
}

// For nested boxes a inside b, IoU reduces to area(a)/area(b). Exhaustive
// over integer-grid boxes up to 8x8.
TEST(IouTest, NestedBruteForce) {
  for (int ax1 = 0; ax1 < 8; ++ax1) {
    for (int ax2 = ax1 + 1; ax2 <= 8; ++ax2) {
      for (int bx1 = 0; bx1 <= ax1; ++bx1) {
        for (int bx2 = ax2; bx2 <= 8; ++bx2) {
          const Box a(ax1, 1, ax2, 3);
          const Box b(bx1, 0, bx2, 4);
          EXPECT_DOUBLE_EQ(iou(a, b), a.area() / b.area());
        }
      }
    }
  }
}

TEST(RelativeBoxSizeTest, KnownValues) {
  const ImageDims dims(100, 100);
  EXPECT_EQ(relative_box_size(Box(0, 0, 100, 100), dims), 1.0);
  EXPECT_DOUBLE_EQ(relative_box_size(Box(10, 10, 30, 20), dims), 0.15);
  EXPECT_DOUBLE_EQ(relative_box_size(Box(0, 0, 50, 100), dims), 0.75);
}

TEST(RelativeBoxSizeTest, OutOfBoundsRejected) {
  EXPECT_THROW(relative_box_size(Box(50, 50, 150, 80), ImageDims(100, 100)),
               OutOfBoundsError);
  EXPECT_THROW(relative_box_size(Box(0, 0, 10, 110), ImageDims(100, 100)),
               OutOfBoundsError);
}

TEST(RelativeBoxSizeTest, TranslationInvariant) {
  const ImageDims dims(200, 100);
  Rng rng(23);
  for (int i = 0; i < 200; ++i) {
    const double w = 1 + rng.uniform() * 50;
    const double h = 1 + rng.uniform() * 40;
    const double x = rng.uniform() * (200 - w);
    const double y = rng.uniform() * (100 - h);
    const double x2 = rng.uniform() * (200 - w);
    const double y2 = rng.uniform() * (100 - h);
    EXPECT_NEAR(relative_box_size(Box(x, y, x + w, y + h), dims),
                relative_box_size(Box(x2, y2, x2 + w, y2 + h), dims), 1e-12);
  }
}

}  // namespace
}  // namespace groundrl
