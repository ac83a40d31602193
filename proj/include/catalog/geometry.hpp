#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <string>
#include <type_traits>

#include "catalog/error.hpp"

namespace catalog {

// Axis-aligned rectangle in corner form: [x0, x1] x [y0, y1].
template <typename Scalar>
struct BasicCorners {
  Scalar x0{}, y0{}, x1{}, y1{};

  Scalar width() const { return x1 - x0; }
  Scalar height() const { return y1 - y0; }
  Scalar area() const { return width() * height(); }
  bool empty() const { return !(x1 > x0) || !(y1 > y0); }
};

// Center-form box (x_c, y_c, w, h) in absolute page pixels, origin top-left,
// y pointing down.
template <typename Scalar>
struct BasicBox {
  static_assert(std::is_floating_point_v<Scalar>, "boxes hold floating point coordinates");

  using Vector2 = Eigen::Matrix<Scalar, 2, 1>;

  Scalar x_c{}, y_c{}, w{}, h{};

  bool valid() const {
    return w > Scalar(0) && h > Scalar(0) && std::isfinite(x_c) && std::isfinite(y_c) &&
           std::isfinite(w) && std::isfinite(h);
  }

  Vector2 center() const { return Vector2(x_c, y_c); }

  BasicCorners<Scalar> corners() const {
    const Scalar hw = w / Scalar(2);
    const Scalar hh = h / Scalar(2);
    return {x_c - hw, y_c - hh, x_c + hw, y_c + hh};
  }

  static BasicBox from_corners(const BasicCorners<Scalar>& c) {
    return {(c.x0 + c.x1) / Scalar(2), (c.y0 + c.y1) / Scalar(2), c.x1 - c.x0, c.y1 - c.y0};
  }

  friend bool operator==(const BasicBox&, const BasicBox&) = default;
};

using BoundingBox = BasicBox<double>;
using Corners = BasicCorners<double>;

template <typename Scalar>
void validate_box(const BasicBox<Scalar>& b) {
  if (!b.valid()) {
    throw ValidationError("invalid box (x_c=" + std::to_string(b.x_c) + ", y_c=" + std::to_string(b.y_c) +
                          ", w=" + std::to_string(b.w) + ", h=" + std::to_string(b.h) +
                          "): width and height must be positive");
  }
}

template <typename Scalar>
BasicCorners<Scalar> intersect(const BasicCorners<Scalar>& a, const BasicCorners<Scalar>& b) {
  return {std::max(a.x0, b.x0), std::max(a.y0, b.y0), std::min(a.x1, b.x1), std::min(a.y1, b.y1)};
}

// Intersection over union. Symmetric, 0 for disjoint boxes.
template <typename Scalar>
Scalar iou(const BasicBox<Scalar>& a, const BasicBox<Scalar>& b) {
  validate_box(a);
  validate_box(b);
  const auto ca = a.corners();
  const auto cb = b.corners();
  const auto inter = intersect(ca, cb);
  if (inter.empty()) return Scalar(0);
  const Scalar inter_area = inter.area();
  const Scalar union_area = ca.area() + cb.area() - inter_area;
  return std::clamp(inter_area / union_area, Scalar(0), Scalar(1));
}

template <typename Scalar>
Scalar center_distance(const BasicBox<Scalar>& a, const BasicBox<Scalar>& b) {
  validate_box(a);
  validate_box(b);
  return (a.center() - b.center()).norm();
}

}  // namespace catalog
