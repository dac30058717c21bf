#ifndef GROUNDRL_GEOMETRY_HPP_
#define GROUNDRL_GEOMETRY_HPP_

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace groundrl {

struct DegenerateBoxError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct CoordinateError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct OutOfBoundsError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// Axis-aligned rectangle in pixel coordinates, corners (x1,y1) top-left
/// and (x2,y2) bottom-right. Coordinates are real-valued so integer pixel
/// boxes and continuous model outputs share one code path.
struct Box {
  double x1, y1, x2, y2;

  // Placeholder unit box; containers of sample records need it.
  Box() : x1(0), y1(0), x2(1), y2(1) {}

  Box(double x1_, double y1_, double x2_, double y2_)
      : x1(x1_), y1(y1_), x2(x2_), y2(y2_) {
    if (!std::isfinite(x1) || !std::isfinite(y1) || !std::isfinite(x2) ||
        !std::isfinite(y2) || x1 < 0 || y1 < 0 || x2 < 0 || y2 < 0) {
      throw CoordinateError("box coordinates must be finite and non-negative");
    }
    if (x2 <= x1 || y2 <= y1) {
      throw DegenerateBoxError("degenerate box: require x2 > x1 and y2 > y1");
    }
  }

  double width() const { return x2 - x1; }
  double height() const { return y2 - y1; }
  double area() const { return width() * height(); }

  bool operator==(const Box& o) const = default;
};

struct ImageDims {
  double width, height;

  ImageDims() : width(1), height(1) {}

  ImageDims(double w, double h) : width(w), height(h) {
    if (!(w > 0) || !(h > 0)) {
      throw CoordinateError("image dimensions must be positive");
    }
  }

  bool operator==(const ImageDims& o) const = default;
};

struct Point {
  double x, y;
};

inline Point center(const Box& box) {
  return {(box.x1 + box.x2) / 2.0, (box.y1 + box.y2) / 2.0};
}

inline bool box_in_image(const Box& box, const ImageDims& dims) {
  return box.x1 >= 0 && box.y1 >= 0 && box.x2 <= dims.width &&
         box.y2 <= dims.height;
}

/// Intersection over union. Edge-touching boxes intersect with area 0.
inline double iou(const Box& a, const Box& b) {
  const double ix = std::max(
      0.0, std::min(a.x2, b.x2) - std::max(a.x1, b.x1));
  const double iy = std::max(
      0.0, std::min(a.y2, b.y2) - std::max(a.y1, b.y1));
  const double inter = ix * iy;
  const double uni = a.area() + b.area() - inter;
  return inter / uni;
}

/// Relative box size: (width + height) / (image width + image height).
/// Strictly in (0, 1] for an in-bounds box; a proxy for sample difficulty
/// (smaller boxes are harder to locate).
inline double relative_box_size(const Box& box, const ImageDims& dims) {
  if (!box_in_image(box, dims)) {
    throw OutOfBoundsError("box extends outside the image");
  }
  return (box.width() + box.height()) / (dims.width + dims.height);
}

}  // namespace groundrl

#endif  // GROUNDRL_GEOMETRY_HPP_
