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
/// \brief Text formats: KITTI object labels, pseudo labels with appended
/// uncertainty columns, calibration maps and uncertainty reports.
///
/// KITTI line (15 fields, optional 16th score):
///   type truncated occluded alpha x1 y1 x2 y2 h w l x y z rotation_y [score]
/// in the camera frame (x right, y down, z forward, y at the box bottom).
///
/// Pseudo-label line (23 fields, optional 24th foreground point count):
///   <15 KITTI fields> u_x u_y u_z u_l u_w u_h u_rot confidence [points]
///
/// Camera -> internal frame: x = z_cam, y = -x_cam, z = h/2 - y_cam,
/// rot = normalize_yaw(-rotation_y - pi/2).
#ifndef EDL3D_KITTI_IO_HPP_
#define EDL3D_KITTI_IO_HPP_

#include <array>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "edl3d/box_geometry.hpp"
#include "edl3d/calibration.hpp"
#include "edl3d/metrics.hpp"

namespace edl3d {

inline constexpr std::size_t kKittiFields = 15;
inline constexpr std::size_t kPseudoLabelFields = kKittiFields + kNumBoxParams + 1;

struct KittiLabelLine {
  std::string type;
  double truncated = 0.0;
  int occluded = 0;
  double alpha = 0.0;
  std::array<double, 4> bbox2d{};
  double h = 0.0, w = 0.0, l = 0.0;
  double x = 0.0, y = 0.0, z = 0.0;
  double rotation_y = 0.0;
  std::optional<double> score;

  bool is_dont_care() const { return type == "DontCare"; }
  /// False for DontCare rows, which carry -1 placeholders.
  bool evaluable() const { return !is_dont_care(); }
};

/// Throws ParseError (with the offending column) on a wrong field count or
/// a non-numeric field, or on non-positive dimensions outside DontCare rows.
KittiLabelLine parse_kitti(std::string_view line);

/// KITTI devkit layout: two decimals, occlusion as an integer.
std::string format_kitti(const KittiLabelLine& label);

Box3D to_box3d(const KittiLabelLine& label);

/// Writes `box` into the camera-frame fields of `meta`. Of the two
/// rotation_y values that represent the same box, the one closest to
/// meta.rotation_y is kept.
KittiLabelLine from_box3d(const Box3D& box, KittiLabelLine meta);

struct PseudoLabel {
  KittiLabelLine label;
  UncertaintyVector uncertainty;
  double confidence = 0.0;
  std::optional<int> points;

  Box3D box() const { return to_box3d(label); }
};

/// Parses a 23/24-column line. Uncertainties must be >= 0, and within
/// [0, 1] unless `stage` is kRaw. Confidence must be in [0, 1].
PseudoLabel parse_pseudo_label(std::string_view line,
                               UncertaintyStage stage = UncertaintyStage::kRaw);

/// Six-decimal fixed point on every numeric column.
std::string format_pseudo_label(const PseudoLabel& p);

void write_pseudo_labels(const std::vector<PseudoLabel>& records, std::ostream& os);
/// Throws IoError naming the path on failure.
void write_pseudo_labels(const std::vector<PseudoLabel>& records,
                         const std::filesystem::path& path);

/// Blank lines are skipped; parse errors are rethrown with path and line.
std::vector<KittiLabelLine> read_kitti_file(const std::filesystem::path& path);
std::vector<PseudoLabel> read_pseudo_label_file(const std::filesystem::path& path,
                                                UncertaintyStage stage = UncertaintyStage::kRaw);

/// Header `param min max kappa` then one row per box parameter, in order.
void write_calibration_map(const CalibrationMap& map, std::ostream& os);
void write_calibration_map(const CalibrationMap& map, const std::filesystem::path& path);
CalibrationMap parse_calibration_map(const std::string& text);
CalibrationMap read_calibration_map(const std::filesystem::path& path);

/// Header `param nll spearman_residual spearman_iou` then one row per
/// parameter; undefined correlations print as `nan`.
void write_report(const UncReport& report, std::ostream& os);

std::string read_text_file(const std::filesystem::path& path);

}  // namespace edl3d

#endif  // EDL3D_KITTI_IO_HPP_
