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
/// \brief Pseudo-label uncertainty post-processing.
///
/// Raw epistemic uncertainties are min-max scaled to [0, 1] per box
/// parameter, then passed through x^(1/kappa_j) with kappa_j chosen on
/// labeled data to minimize the Gaussian NLL of the residuals, and finally
/// through x^(1/eps_j) with eps_j a downstream hyperparameter. All three steps
/// are strictly increasing, so rank correlations are unchanged.
#ifndef EDL3D_CALIBRATION_HPP_
#define EDL3D_CALIBRATION_HPP_

#include <array>
#include <span>
#include <vector>

#include "edl3d/box_geometry.hpp"

namespace edl3d {

enum class UncertaintyStage { kRaw, kScaled, kCalibrated };

struct UncertaintyVector {
  std::array<double, kNumBoxParams> values{};
  UncertaintyStage stage = UncertaintyStage::kRaw;
};

struct ParamCalibration {
  double min = 0.0;
  double max = 1.0;
  double kappa = 1.0;
};

struct CalibrationMap {
  std::array<ParamCalibration, kNumBoxParams> params{};

  /// Throws InvalidInput unless max > min and kappa in [0, 10] everywhere.
  void validate() const;
};

/// Per-parameter (or shared) exponent of the downstream rescaling.
struct Epsilon {
  std::array<double, kNumBoxParams> values{1, 1, 1, 1, 1, 1, 1};

  static Epsilon shared(double eps);
  void validate() const;
};

struct MinMax {
  double min = 0.0;
  double max = 0.0;
};

/// Floor applied to the variance inside gaussian_nll.
inline constexpr double kVarianceFloor = 1e-6;

inline constexpr double kKappaMin = 0.1;
inline constexpr double kKappaMax = 10.0;
inline constexpr int kKappaGridSize = 100;

/// The searched kappa values 0.1, 0.2, ..., 10.0. The kappa = 0 point of the
/// [0, 10] interval is never evaluated since x^(1/0) is undefined.
std::vector<double> kappa_grid();

/// Extrema of every parameter column. Needs >= 2 raw vectors. Throws
/// UndefinedResult on a constant column.
std::array<MinMax, kNumBoxParams> fit_minmax(std::span<const UncertaintyVector> raw);

/// clip((u - min) / (max - min), 0, 1).
double minmax_apply(double u, double min, double max);

/// 0.5 log(2 pi v) + r^2 / (2 v) with v raised to kVarianceFloor if smaller.
double gaussian_nll(double residual, double variance);

/// Mean gaussian_nll(residual_i, scaled_i^(1/kappa)).
double mean_nll_at_kappa(std::span<const double> scaled, std::span<const double> residuals,
                         double kappa);

/// Grid argmin of mean_nll_at_kappa; ties resolve to the smallest kappa.
double fit_kappa(std::span<const double> scaled, std::span<const double> residuals);

/// Column-wise fit_kappa over aligned scaled vectors and residual rows.
std::array<double, kNumBoxParams> fit_kappa(
    std::span<const UncertaintyVector> scaled,
    std::span<const std::array<double, kNumBoxParams>> residuals);

/// fit_minmax followed by fit_kappa on the same collection.
CalibrationMap fit_calibration(std::span<const UncertaintyVector> raw,
                               std::span<const std::array<double, kNumBoxParams>> residuals);

/// Min-max stage only.
UncertaintyVector scale_uncertainties(const UncertaintyVector& raw, const CalibrationMap& map);

/// Full pipeline on one raw vector. Throws InvalidInput if `raw` is not at the
/// raw stage.
UncertaintyVector apply_calibration(const UncertaintyVector& raw, const CalibrationMap& map,
                                    const Epsilon& eps = {});

}  // namespace edl3d

#endif  // EDL3D_CALIBRATION_HPP_
