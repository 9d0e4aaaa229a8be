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

#include "edl3d/box_geometry.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "edl3d/error.hpp"

namespace edl3d {

double normalize_yaw(double angle) {
  if (!std::isfinite(angle)) {
    throw InvalidInput(fmt::format("normalize_yaw: non-finite angle {}", angle));
  }
  constexpr double kPi = std::numbers::pi;
  if (angle >= -kPi / 2.0 && angle < kPi / 2.0) return angle;
  double r = std::fmod(angle + kPi / 2.0, kPi);
  if (r < 0.0) r += kPi;
  r -= kPi / 2.0;
  // fmod can land exactly on +pi/2 after the shift back for inputs a hair
  // below a multiple of pi.
  if (r >= kPi / 2.0) r -= kPi;
  return r;
}

void validate_box(const Box3D& b) {
  for (double v : b.to_array()) {
    if (!std::isfinite(v)) throw InvalidInput("box has a non-finite field");
  }
  if (!(b.l > 0.0 && b.w > 0.0 && b.h > 0.0)) {
    throw InvalidInput(
        fmt::format("degenerate box: l={} w={} h={} (all must be > 0)", b.l, b.w, b.h));
  }
}

std::array<Point2<double>, 4> bev_corners(const Box3D& b) {
  validate_box(b);
  return geometry_detail::corners(b);
}

double iou_bev(const Box3D& a, const Box3D& b) {
  validate_box(a);
  validate_box(b);
  return std::clamp(geometry_detail::iou_bev(a, b), 0.0, 1.0);
}

double iou_3d(const Box3D& a, const Box3D& b) {
  validate_box(a);
  validate_box(b);
  return std::clamp(geometry_detail::iou_3d(a, b), 0.0, 1.0);
}

double diou_penalty(const Box3D& a, const Box3D& b) {
  validate_box(a);
  validate_box(b);
  return std::clamp(geometry_detail::diou_penalty(a, b), 0.0, 1.0);
}

double ap_r40(const std::vector<std::vector<Detection>>& dets,
              const std::vector<std::vector<Box3D>>& gts, double iou_thresh) {
  if (!(iou_thresh > 0.0 && iou_thresh <= 1.0)) {
    throw InvalidInput(fmt::format("ap_r40: iou_thresh {} outside (0, 1]", iou_thresh));
  }
  if (dets.size() != gts.size()) {
    throw InvalidInput(fmt::format("ap_r40: {} detection frames vs {} ground-truth frames",
                                   dets.size(), gts.size()));
  }
  std::size_t num_gt = 0;
  for (const auto& frame : gts) num_gt += frame.size();
  if (num_gt == 0) throw UndefinedResult("ap_r40: recall undefined without ground truth");

  struct Ranked {
    std::size_t frame;
    std::size_t index;
    double score;
  };
  std::vector<Ranked> ranked;
  for (std::size_t f = 0; f < dets.size(); ++f) {
    for (std::size_t i = 0; i < dets[f].size(); ++i) {
      const double s = dets[f][i].score;
      if (!(s >= 0.0 && s <= 1.0)) {
        throw InvalidInput(fmt::format("ap_r40: detection score {} outside [0, 1]", s));
      }
      ranked.push_back({f, i, s});
    }
  }
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const Ranked& a, const Ranked& b) { return a.score > b.score; });

  std::vector<std::vector<bool>> taken(gts.size());
  for (std::size_t f = 0; f < gts.size(); ++f) taken[f].assign(gts[f].size(), false);

  std::vector<double> precision;
  std::vector<double> recall;
  precision.reserve(ranked.size());
  recall.reserve(ranked.size());
  std::size_t tp = 0;
  for (std::size_t k = 0; k < ranked.size(); ++k) {
    const auto& r = ranked[k];
    const Box3D& box = dets[r.frame][r.index].box;
    double best = -1.0;
    std::size_t best_gt = 0;
    for (std::size_t g = 0; g < gts[r.frame].size(); ++g) {
      if (taken[r.frame][g]) continue;
      const double iou = iou_3d(box, gts[r.frame][g]);
      if (iou >= iou_thresh && iou > best) {
        best = iou;
        best_gt = g;
      }
    }
    if (best >= 0.0) {
      taken[r.frame][best_gt] = true;
      ++tp;
    }
    precision.push_back(static_cast<double>(tp) / static_cast<double>(k + 1));
    recall.push_back(static_cast<double>(tp) / static_cast<double>(num_gt));
  }

  // Running maximum from the tail: interpolated precision at recall >= r.
  std::vector<double> envelope(precision.size());
  double running = 0.0;
  for (std::size_t k = precision.size(); k-- > 0;) {
    running = std::max(running, precision[k]);
    envelope[k] = running;
  }

  constexpr int kRecallPoints = 40;
  double sum = 0.0;
  std::size_t cursor = 0;
  for (int i = 1; i <= kRecallPoints; ++i) {
    const double level = static_cast<double>(i) / kRecallPoints;
    while (cursor < recall.size() && recall[cursor] < level - 1e-12) ++cursor;
    if (cursor < recall.size()) sum += envelope[cursor];
  }
  return sum / kRecallPoints;
}

}  // namespace edl3d
