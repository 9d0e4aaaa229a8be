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

#include "edl3d/kitti_io.hpp"

#include <fmt/format.h>
#include <fmt/ostream.h>

#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include "edl3d/error.hpp"

namespace edl3d {

namespace {

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    if (i >= line.size()) break;
    std::size_t j = i;
    while (j < line.size() && !std::isspace(static_cast<unsigned char>(line[j]))) ++j;
    out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

double to_double(std::string_view s, int column) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) {
    throw ParseError(fmt::format("column {}: '{}' is not a finite number", column, s), column);
  }
  return v;
}

int to_int(std::string_view s, int column) {
  int v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    // The devkit occasionally writes occlusion as a float ("0.00").
    const double d = to_double(s, column);
    if (d != std::floor(d)) {
      throw ParseError(fmt::format("column {}: '{}' is not an integer", column, s), column);
    }
    return static_cast<int>(d);
  }
  return v;
}

KittiLabelLine parse_kitti_fields(const std::vector<std::string_view>& f) {
  KittiLabelLine k;
  k.type = std::string(f[0]);
  k.truncated = to_double(f[1], 1);
  k.occluded = to_int(f[2], 2);
  k.alpha = to_double(f[3], 3);
  for (int i = 0; i < 4; ++i) k.bbox2d[i] = to_double(f[4 + i], 4 + i);
  k.h = to_double(f[8], 8);
  k.w = to_double(f[9], 9);
  k.l = to_double(f[10], 10);
  k.x = to_double(f[11], 11);
  k.y = to_double(f[12], 12);
  k.z = to_double(f[13], 13);
  k.rotation_y = to_double(f[14], 14);
  if (!k.is_dont_care()) {
    const double dims[3] = {k.h, k.w, k.l};
    for (int i = 0; i < 3; ++i) {
      if (!(dims[i] > 0.0)) {
        throw ParseError(
            fmt::format("column {}: dimension {} must be positive for {}", 8 + i, dims[i], k.type),
            8 + i);
      }
    }
  }
  return k;
}

double wrap_pi(double a) {
  constexpr double kPi = std::numbers::pi;
  double r = std::fmod(a + kPi, 2.0 * kPi);
  if (r < 0.0) r += 2.0 * kPi;
  return r - kPi;
}

template <typename Fn>
auto with_location(const std::filesystem::path& path, int line_no, Fn&& fn) {
  try {
    return fn();
  } catch (const ParseError& e) {
    throw ParseError(fmt::format("{}:{}: {}", path.string(), line_no, e.what()), e.column());
  }
}

std::ofstream open_for_write(const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError(fmt::format("cannot open '{}' for writing", path.string()));
  return os;
}

void finish_write(std::ofstream& os, const std::filesystem::path& path) {
  os.flush();
  if (!os) throw IoError(fmt::format("write to '{}' failed", path.string()));
}

std::string format_param(double v) { return fmt::format("{:.17g}", v); }

}  // namespace

KittiLabelLine parse_kitti(std::string_view line) {
  const auto f = split_fields(line);
  if (f.size() != kKittiFields && f.size() != kKittiFields + 1) {
    const int col = static_cast<int>(std::min(f.size(), kKittiFields + 1));
    throw ParseError(fmt::format("expected 15 or 16 fields, got {} (column {} missing or extra)",
                                 f.size(), col),
                     col);
  }
  KittiLabelLine k = parse_kitti_fields(f);
  if (f.size() == kKittiFields + 1) k.score = to_double(f[15], 15);
  return k;
}

std::string format_kitti(const KittiLabelLine& k) {
  std::string s = fmt::format(
      "{} {:.2f} {} {:.2f} {:.2f} {:.2f} {:.2f} {:.2f} {:.2f} {:.2f} {:.2f} {:.2f} {:.2f} {:.2f} "
      "{:.2f}",
      k.type, k.truncated, k.occluded, k.alpha, k.bbox2d[0], k.bbox2d[1], k.bbox2d[2],
      k.bbox2d[3], k.h, k.w, k.l, k.x, k.y, k.z, k.rotation_y);
  if (k.score) s += fmt::format(" {:.2f}", *k.score);
  return s;
}

Box3D to_box3d(const KittiLabelLine& k) {
  return {k.z, -k.x, 0.5 * k.h - k.y, k.l, k.w, k.h,
          normalize_yaw(-k.rotation_y - std::numbers::pi / 2.0)};
}

KittiLabelLine from_box3d(const Box3D& b, KittiLabelLine meta) {
  meta.x = -b.y;
  meta.y = 0.5 * b.h - b.z;
  meta.z = b.x;
  meta.l = b.l;
  meta.w = b.w;
  meta.h = b.h;
  const double ry = wrap_pi(-b.rot - std::numbers::pi / 2.0);
  const double flipped = wrap_pi(ry + std::numbers::pi);
  meta.rotation_y = std::abs(wrap_pi(ry - meta.rotation_y)) <=
                            std::abs(wrap_pi(flipped - meta.rotation_y))
                        ? ry
                        : flipped;
  return meta;
}

PseudoLabel parse_pseudo_label(std::string_view line, UncertaintyStage stage) {
  const auto f = split_fields(line);
  if (f.size() != kPseudoLabelFields && f.size() != kPseudoLabelFields + 1) {
    const int col = static_cast<int>(std::min(f.size(), kPseudoLabelFields + 1));
    throw ParseError(
        fmt::format("expected 23 or 24 fields, got {} (column {} missing or extra)", f.size(), col),
        col);
  }
  PseudoLabel p;
  p.label = parse_kitti_fields(f);
  p.uncertainty.stage = stage;
  for (std::size_t j = 0; j < kNumBoxParams; ++j) {
    const int col = static_cast<int>(kKittiFields + j);
    const double u = to_double(f[kKittiFields + j], col);
    const bool bounded = stage != UncertaintyStage::kRaw;
    if (u < 0.0 || (bounded && u > 1.0)) {
      throw ParseError(fmt::format("column {}: uncertainty {} out of range", col, u), col);
    }
    p.uncertainty.values[j] = u;
  }
  const int conf_col = static_cast<int>(kPseudoLabelFields - 1);
  p.confidence = to_double(f[kPseudoLabelFields - 1], conf_col);
  if (p.confidence < 0.0 || p.confidence > 1.0) {
    throw ParseError(fmt::format("column {}: confidence {} outside [0, 1]", conf_col, p.confidence),
                     conf_col);
  }
  if (f.size() == kPseudoLabelFields + 1) {
    p.points = to_int(f[kPseudoLabelFields], static_cast<int>(kPseudoLabelFields));
  }
  return p;
}

std::string format_pseudo_label(const PseudoLabel& p) {
  const auto& k = p.label;
  std::string s = fmt::format(
      "{} {:.6f} {} {:.6f} {:.6f} {:.6f} {:.6f} {:.6f} {:.6f} {:.6f} {:.6f} {:.6f} {:.6f} {:.6f} "
      "{:.6f}",
      k.type, k.truncated, k.occluded, k.alpha, k.bbox2d[0], k.bbox2d[1], k.bbox2d[2],
      k.bbox2d[3], k.h, k.w, k.l, k.x, k.y, k.z, k.rotation_y);
  for (double u : p.uncertainty.values) s += fmt::format(" {:.6f}", u);
  s += fmt::format(" {:.6f}", p.confidence);
  if (p.points) s += fmt::format(" {}", *p.points);
  return s;
}

void write_pseudo_labels(const std::vector<PseudoLabel>& records, std::ostream& os) {
  for (const auto& r : records) os << format_pseudo_label(r) << '\n';
}

void write_pseudo_labels(const std::vector<PseudoLabel>& records,
                         const std::filesystem::path& path) {
  auto os = open_for_write(path);
  write_pseudo_labels(records, os);
  finish_write(os, path);
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError(fmt::format("cannot open '{}' for reading", path.string()));
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

std::vector<KittiLabelLine> read_kitti_file(const std::filesystem::path& path) {
  std::istringstream in(read_text_file(path));
  std::vector<KittiLabelLine> out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (split_fields(line).empty()) continue;
    out.push_back(with_location(path, line_no, [&] { return parse_kitti(line); }));
  }
  return out;
}

std::vector<PseudoLabel> read_pseudo_label_file(const std::filesystem::path& path,
                                                UncertaintyStage stage) {
  std::istringstream in(read_text_file(path));
  std::vector<PseudoLabel> out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (split_fields(line).empty()) continue;
    out.push_back(with_location(path, line_no, [&] { return parse_pseudo_label(line, stage); }));
  }
  return out;
}

void write_calibration_map(const CalibrationMap& map, std::ostream& os) {
  os << "param min max kappa\n";
  for (std::size_t j = 0; j < kNumBoxParams; ++j) {
    const auto& p = map.params[j];
    os << kBoxParamNames[j] << ' ' << format_param(p.min) << ' ' << format_param(p.max) << ' '
       << format_param(p.kappa) << '\n';
  }
}

void write_calibration_map(const CalibrationMap& map, const std::filesystem::path& path) {
  auto os = open_for_write(path);
  write_calibration_map(map, os);
  finish_write(os, path);
}

CalibrationMap parse_calibration_map(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::vector<std::string> lines;
  while (std::getline(in, line)) {
    if (!split_fields(line).empty()) lines.push_back(line);
  }
  if (lines.empty() || split_fields(lines[0]) !=
                           std::vector<std::string_view>{"param", "min", "max", "kappa"}) {
    throw ParseError("calibration map: missing header 'param min max kappa'");
  }
  if (lines.size() != kNumBoxParams + 1) {
    throw ParseError(fmt::format("calibration map: expected {} parameter rows, got {}",
                                 kNumBoxParams, lines.size() - 1));
  }
  CalibrationMap map;
  for (std::size_t j = 0; j < kNumBoxParams; ++j) {
    const auto f = split_fields(lines[j + 1]);
    if (f.size() != 4) {
      throw ParseError(fmt::format("calibration map row {}: expected 4 fields", j + 1),
                       static_cast<int>(f.size()));
    }
    if (f[0] != kBoxParamNames[j]) {
      throw ParseError(fmt::format("calibration map row {}: expected parameter '{}', got '{}'",
                                   j + 1, kBoxParamNames[j], f[0]),
                       0);
    }
    map.params[j] = {to_double(f[1], 1), to_double(f[2], 2), to_double(f[3], 3)};
  }
  try {
    map.validate();
  } catch (const InvalidInput& e) {
    throw ParseError(e.what());
  }
  return map;
}

CalibrationMap read_calibration_map(const std::filesystem::path& path) {
  try {
    return parse_calibration_map(read_text_file(path));
  } catch (const ParseError& e) {
    throw ParseError(fmt::format("{}: {}", path.string(), e.what()), e.column());
  }
}

void write_report(const UncReport& report, std::ostream& os) {
  auto corr = [](const std::optional<double>& v) {
    return v ? fmt::format("{:.6f}", *v) : std::string("nan");
  };
  os << "param nll spearman_residual spearman_iou\n";
  for (std::size_t j = 0; j < kNumBoxParams; ++j) {
    const auto& p = report.params[j];
    fmt::print(os, "{} {:.6f} {} {}\n", kBoxParamNames[j], p.nll, corr(p.spearman_vs_residual),
               corr(p.spearman_vs_iou));
  }
}

}  // namespace edl3d
