// Copyright 2026 The edl3d Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

/// \file
/// \brief Oriented 3D boxes: corners, rotated BEV overlap, 3D IoU, the DIoU
/// center-distance penalty and AP at 40 recall points.
///
/// Frame: right-handed, z vertical. The bird's-eye-view plane is (x, y) and
/// yaw rotates about z, measured from +x towards +y. `l` lies along the
/// heading, `w` across it.
///
/// The overlap routines are templates over the scalar type so the loss code
/// can evaluate them on `Dual<N>` and obtain exact gradients.
#ifndef EDL3D_BOX_GEOMETRY_HPP_
#define EDL3D_BOX_GEOMETRY_HPP_

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <string_view>
#include <vector>

#include "edl3d/dual.hpp"

namespace edl3d {

/// Number of regressed box parameters, ordered x, y, z, l, w, h, rot.
inline constexpr std::size_t kNumBoxParams = 7;

enum class BoxParam : std::size_t { kX = 0, kY, kZ, kL, kW, kH, kRot };

inline constexpr std::array<std::string_view, kNumBoxParams> kBoxParamNames = {
    "x", "y", "z", "l", "w", "h", "rot"};

template <typename T>
struct BasicBox {
  T x{}, y{}, z{};
  T l{}, w{}, h{};
  T rot{};

  static BasicBox from_array(const std::array<T, kNumBoxParams>& a) {
    return {a[0], a[1], a[2], a[3], a[4], a[5], a[6]};
  }
  std::array<T, kNumBoxParams> to_array() const { return {x, y, z, l, w, h, rot}; }
};

using Box3D = BasicBox<double>;

/// A scored detection for AP evaluation. score in [0, 1].
struct Detection {
  Box3D box;
  double score = 0.0;
};

template <typename T>
struct Point2 {
  T x{}, y{};
};

/// Wraps an angle into [-pi/2, pi/2) modulo pi. Throws InvalidInput on a
/// non-finite angle.
double normalize_yaw(double angle);

/// Throws InvalidInput unless every field is finite and l, w, h > 0.
void validate_box(const Box3D& b);

/// Four BEV corners in counter-clockwise order, starting at the
/// (+l/2, -w/2) corner in the box frame.
std::array<Point2<double>, 4> bev_corners(const Box3D& b);

double iou_bev(const Box3D& a, const Box3D& b);
double iou_3d(const Box3D& a, const Box3D& b);

/// Squared 3D center distance over the squared diagonal of the axis-aligned
/// box enclosing all corners of both boxes. Always in [0, 1].
double diou_penalty(const Box3D& a, const Box3D& b);

/// AP sampled at recall 1/40, 2/40, ..., 1. `dets[f]` and `gts[f]` belong to
/// frame f. Detections are matched greedily in descending score order to the
/// unmatched ground truth of highest 3D IoU >= iou_thresh. Precision at a
/// recall level is the maximum precision over all operating points reaching
/// at least that recall.
///
/// Throws UndefinedResult when there is no ground truth at all.
double ap_r40(const std::vector<std::vector<Detection>>& dets,
              const std::vector<std::vector<Box3D>>& gts, double iou_thresh);

namespace geometry_detail {

using std::cos;
using std::sin;

template <typename T>
T cross(const Point2<T>& o, const Point2<T>& a, const Point2<T>& b) {
  return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
}

template <typename T>
std::array<Point2<T>, 4> corners(const BasicBox<T>& b) {
  const T c = cos(b.rot);
  const T s = sin(b.rot);
  const T hl = b.l * T(0.5);
  const T hw = b.w * T(0.5);
  // Box-frame offsets, CCW: (+,-), (+,+), (-,+), (-,-).
  const std::array<std::array<double, 2>, 4> sign = {
      {{1.0, -1.0}, {1.0, 1.0}, {-1.0, 1.0}, {-1.0, -1.0}}};
  std::array<Point2<T>, 4> out;
  for (std::size_t i = 0; i < 4; ++i) {
    const T u = hl * T(sign[i][0]);
    const T v = hw * T(sign[i][1]);
    out[i] = {b.x + u * c - v * s, b.y + u * s + v * c};
  }
  return out;
}

/// Sutherland-Hodgman: clips `subject` against each edge of the convex CCW
/// polygon `clip`. Points on an edge count as inside.
template <typename T>
std::vector<Point2<T>> clip_convex(std::vector<Point2<T>> subject,
                                   const std::array<Point2<T>, 4>& clip) {
  for (std::size_t e = 0; e < clip.size() && !subject.empty(); ++e) {
    const Point2<T>& e0 = clip[e];
    const Point2<T>& e1 = clip[(e + 1) % clip.size()];
    std::vector<Point2<T>> kept;
    kept.reserve(subject.size() + 2);
    for (std::size_t i = 0; i < subject.size(); ++i) {
      const Point2<T>& cur = subject[i];
      const Point2<T>& nxt = subject[(i + 1) % subject.size()];
      const T dc = cross(e0, e1, cur);
      const T dn = cross(e0, e1, nxt);
      const bool cur_in = value_of(dc) >= 0.0;
      const bool nxt_in = value_of(dn) >= 0.0;
      if (cur_in) kept.push_back(cur);
      if (cur_in != nxt_in) {
        const T t = dc / (dc - dn);
        kept.push_back({cur.x + (nxt.x - cur.x) * t, cur.y + (nxt.y - cur.y) * t});
      }
    }
    subject = std::move(kept);
  }
  return subject;
}

template <typename T>
T polygon_area(const std::vector<Point2<T>>& poly) {
  if (poly.size() < 3) return T(0.0);
  T twice(0.0);
  for (std::size_t i = 0; i < poly.size(); ++i) {
    const auto& p = poly[i];
    const auto& q = poly[(i + 1) % poly.size()];
    twice += p.x * q.y - q.x * p.y;
  }
  // Collinear or touching overlaps collapse to zero (or a rounding sliver of
  // either sign).
  if (value_of(twice) <= 0.0) return T(0.0);
  return twice * T(0.5);
}

template <typename T>
T bev_intersection(const BasicBox<T>& a, const BasicBox<T>& b) {
  const auto ca = corners(a);
  const auto cb = corners(b);
  return polygon_area(clip_convex(std::vector<Point2<T>>(ca.begin(), ca.end()), cb));
}

template <typename T>
T vertical_overlap(const BasicBox<T>& a, const BasicBox<T>& b) {
  const T top = std::min(a.z + a.h * T(0.5), b.z + b.h * T(0.5));
  const T bottom = std::max(a.z - a.h * T(0.5), b.z - b.h * T(0.5));
  const T d = top - bottom;
  return value_of(d) > 0.0 ? d : T(0.0);
}

template <typename T>
T iou_bev(const BasicBox<T>& a, const BasicBox<T>& b) {
  const T inter = bev_intersection(a, b);
  const T uni = a.l * a.w + b.l * b.w - inter;
  return inter / uni;
}

template <typename T>
T iou_3d(const BasicBox<T>& a, const BasicBox<T>& b) {
  const T inter = bev_intersection(a, b) * vertical_overlap(a, b);
  const T uni = a.l * a.w * a.h + b.l * b.w * b.h - inter;
  return inter / uni;
}

template <typename T>
T diou_penalty(const BasicBox<T>& a, const BasicBox<T>& b) {
  const auto ca = corners(a);
  const auto cb = corners(b);
  T min_x = ca[0].x, max_x = ca[0].x, min_y = ca[0].y, max_y = ca[0].y;
  auto grow = [&](const Point2<T>& p) {
    min_x = std::min(min_x, p.x);
    max_x = std::max(max_x, p.x);
    min_y = std::min(min_y, p.y);
    max_y = std::max(max_y, p.y);
  };
  for (const auto& p : ca) grow(p);
  for (const auto& p : cb) grow(p);
  const T min_z = std::min(a.z - a.h * T(0.5), b.z - b.h * T(0.5));
  const T max_z = std::max(a.z + a.h * T(0.5), b.z + b.h * T(0.5));
  const T dx = max_x - min_x, dy = max_y - min_y, dz = max_z - min_z;
  const T diag2 = dx * dx + dy * dy + dz * dz;
  const T cx = a.x - b.x, cy = a.y - b.y, cz = a.z - b.z;
  return (cx * cx + cy * cy + cz * cz) / diag2;
}

}  // namespace geometry_detail
}  // namespace edl3d

#endif  // EDL3D_BOX_GEOMETRY_HPP_
