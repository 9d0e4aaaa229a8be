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

#include "edl3d/calibration.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "edl3d/error.hpp"

namespace edl3d {

void CalibrationMap::validate() const {
  for (std::size_t j = 0; j < kNumBoxParams; ++j) {
    const auto& p = params[j];
    if (!(std::isfinite(p.min) && std::isfinite(p.max) && p.max > p.min)) {
      throw InvalidInput(fmt::format("calibration map: {} has min {} >= max {}",
                                     kBoxParamNames[j], p.min, p.max));
    }
    if (!(p.kappa >= 0.0 && p.kappa <= kKappaMax)) {
      throw InvalidInput(fmt::format("calibration map: {} kappa {} outside [0, 10]",
                                     kBoxParamNames[j], p.kappa));
    }
  }
}

Epsilon Epsilon::shared(double eps) {
  Epsilon e;
  e.values.fill(eps);
  e.validate();
  return e;
}

void Epsilon::validate() const {
  for (double v : values) {
    if (!(v > 0.0) || !std::isfinite(v)) {
      throw InvalidInput(fmt::format("epsilon must be finite and > 0, got {}", v));
    }
  }
}

std::vector<double> kappa_grid() {
  std::vector<double> grid;
  grid.reserve(kKappaGridSize);
  for (int k = 1; k <= kKappaGridSize; ++k) grid.push_back(static_cast<double>(k) / 10.0);
  return grid;
}

std::array<MinMax, kNumBoxParams> fit_minmax(std::span<const UncertaintyVector> raw) {
  if (raw.size() < 2) {
    throw InvalidInput(fmt::format("fit_minmax needs >= 2 samples, got {}", raw.size()));
  }
  std::array<MinMax, kNumBoxParams> out;
  for (std::size_t j = 0; j < kNumBoxParams; ++j) {
    out[j] = {std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
  }
  for (const auto& u : raw) {
    if (u.stage != UncertaintyStage::kRaw) {
      throw InvalidInput("fit_minmax expects raw uncertainties");
    }
    for (std::size_t j = 0; j < kNumBoxParams; ++j) {
      const double v = u.values[j];
      if (!std::isfinite(v)) throw InvalidInput("fit_minmax: non-finite uncertainty");
      out[j].min = std::min(out[j].min, v);
      out[j].max = std::max(out[j].max, v);
    }
  }
  for (std::size_t j = 0; j < kNumBoxParams; ++j) {
    if (!(out[j].max > out[j].min)) {
      throw UndefinedResult(fmt::format("fit_minmax: constant column for {} (value {})",
                                        kBoxParamNames[j], out[j].min));
    }
  }
  return out;
}

double minmax_apply(double u, double min, double max) {
  if (!(max > min)) throw InvalidInput("minmax_apply: max must exceed min");
  return std::clamp((u - min) / (max - min), 0.0, 1.0);
}

double gaussian_nll(double residual, double variance) {
  const double v = std::max(variance, kVarianceFloor);
  return 0.5 * std::log(2.0 * std::numbers::pi * v) + residual * residual / (2.0 * v);
}

double mean_nll_at_kappa(std::span<const double> scaled, std::span<const double> residuals,
                         double kappa) {
  if (scaled.empty() || scaled.size() != residuals.size()) {
    throw InvalidInput(fmt::format("kappa fit: {} uncertainties vs {} residuals", scaled.size(),
                                   residuals.size()));
  }
  if (!(kappa > 0.0)) throw InvalidInput("kappa must be > 0 when evaluated");
  const double inv = 1.0 / kappa;
  double sum = 0.0;
  for (std::size_t i = 0; i < scaled.size(); ++i) {
    sum += gaussian_nll(residuals[i], std::pow(scaled[i], inv));
  }
  return sum / static_cast<double>(scaled.size());
}

double fit_kappa(std::span<const double> scaled, std::span<const double> residuals) {
  double best_kappa = 0.0;
  double best_nll = std::numeric_limits<double>::infinity();
  for (double kappa : kappa_grid()) {
    const double nll = mean_nll_at_kappa(scaled, residuals, kappa);
    if (nll < best_nll) {
      best_nll = nll;
      best_kappa = kappa;
    }
  }
  return best_kappa;
}

std::array<double, kNumBoxParams> fit_kappa(
    std::span<const UncertaintyVector> scaled,
    std::span<const std::array<double, kNumBoxParams>> residuals) {
  if (scaled.empty() || scaled.size() != residuals.size()) {
    throw InvalidInput(fmt::format("fit_kappa: {} uncertainty vectors vs {} residual rows",
                                   scaled.size(), residuals.size()));
  }
  std::array<double, kNumBoxParams> out{};
  std::vector<double> u(scaled.size());
  std::vector<double> r(scaled.size());
  for (std::size_t j = 0; j < kNumBoxParams; ++j) {
    for (std::size_t i = 0; i < scaled.size(); ++i) {
      if (scaled[i].stage != UncertaintyStage::kScaled) {
        throw InvalidInput("fit_kappa expects min-max scaled uncertainties");
      }
      u[i] = scaled[i].values[j];
      r[i] = residuals[i][j];
    }
    out[j] = fit_kappa(u, r);
  }
  return out;
}

CalibrationMap fit_calibration(std::span<const UncertaintyVector> raw,
                               std::span<const std::array<double, kNumBoxParams>> residuals) {
  const auto bounds = fit_minmax(raw);
  CalibrationMap map;
  for (std::size_t j = 0; j < kNumBoxParams; ++j) {
    map.params[j] = {bounds[j].min, bounds[j].max, 1.0};
  }
  std::vector<UncertaintyVector> scaled;
  scaled.reserve(raw.size());
  for (const auto& u : raw) scaled.push_back(scale_uncertainties(u, map));
  const auto kappas = fit_kappa(scaled, residuals);
  for (std::size_t j = 0; j < kNumBoxParams; ++j) map.params[j].kappa = kappas[j];
  return map;
}

UncertaintyVector scale_uncertainties(const UncertaintyVector& raw, const CalibrationMap& map) {
  if (raw.stage != UncertaintyStage::kRaw) {
    throw InvalidInput("min-max scaling expects raw uncertainties");
  }
  UncertaintyVector out{{}, UncertaintyStage::kScaled};
  for (std::size_t j = 0; j < kNumBoxParams; ++j) {
    out.values[j] = minmax_apply(raw.values[j], map.params[j].min, map.params[j].max);
  }
  return out;
}

UncertaintyVector apply_calibration(const UncertaintyVector& raw, const CalibrationMap& map,
                                    const Epsilon& eps) {
  if (raw.stage != UncertaintyStage::kRaw) {
    throw InvalidInput("apply_calibration expects raw uncertainties");
  }
  map.validate();
  eps.validate();
  UncertaintyVector out = scale_uncertainties(raw, map);
  for (std::size_t j = 0; j < kNumBoxParams; ++j) {
    const double kappa = map.params[j].kappa;
    if (!(kappa > 0.0)) throw InvalidInput("apply_calibration: kappa must be > 0");
    out.values[j] = std::pow(std::pow(out.values[j], 1.0 / kappa), 1.0 / eps.values[j]);
  }
  out.stage = UncertaintyStage::kCalibrated;
  return out;
}

}  // namespace edl3d
