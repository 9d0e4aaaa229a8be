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

#include "edl3d/metrics.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "edl3d/error.hpp"

namespace edl3d {

std::vector<double> average_ranks(std::span<const double> xs) {
  std::vector<std::size_t> order(xs.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return xs[a] < xs[b]; });
  std::vector<double> ranks(xs.size());
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i + 1;
    while (j < order.size() && xs[order[j]] == xs[order[i]]) ++j;
    // Positions i..j-1 (0-based) share rank mean((i+1)..j).
    const double rank = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t k = i; k < j; ++k) ranks[order[k]] = rank;
    i = j;
  }
  return ranks;
}

double spearman(std::span<const double> xs, std::span<const double> ys) {
  if (xs.size() != ys.size()) {
    throw InvalidInput(fmt::format("spearman: lengths {} and {} differ", xs.size(), ys.size()));
  }
  if (xs.size() < 3) throw InvalidInput("spearman needs at least 3 pairs");
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (!std::isfinite(xs[i]) || !std::isfinite(ys[i])) {
      throw InvalidInput("spearman: non-finite value");
    }
  }
  const auto rx = average_ranks(xs);
  const auto ry = average_ranks(ys);
  const double n = static_cast<double>(rx.size());
  // Mean rank is (n + 1) / 2 regardless of ties.
  const double mean = 0.5 * (n + 1.0);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    const double dx = rx[i] - mean;
    const double dy = ry[i] - mean;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) {
    throw UndefinedResult("spearman: correlation undefined for a constant series");
  }
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

std::array<double, kNumBoxParams> EvalRecord::residuals() const {
  auto g = gt.to_array();
  auto p = pred.to_array();
  constexpr auto kRot = static_cast<std::size_t>(BoxParam::kRot);
  g[kRot] = normalize_yaw(g[kRot]);
  p[kRot] = normalize_yaw(p[kRot]);
  std::array<double, kNumBoxParams> r{};
  for (std::size_t j = 0; j < kNumBoxParams; ++j) r[j] = g[j] - p[j];
  return r;
}

UncReport uncertainty_report(std::span<const EvalRecord> records) {
  if (records.size() < 3) {
    throw InvalidInput(
        fmt::format("uncertainty_report needs >= 3 records, got {}", records.size()));
  }
  UncReport report;
  report.source = records.front().uncertainty.stage;
  report.num_records = records.size();

  const std::size_t n = records.size();
  std::vector<double> ious(n);
  std::vector<std::array<double, kNumBoxParams>> res(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (records[i].uncertainty.stage != report.source) {
      throw InvalidInput("uncertainty_report: records mix uncertainty stages");
    }
    ious[i] = iou_3d(records[i].pred, records[i].gt);
    res[i] = records[i].residuals();
  }

  auto try_spearman = [](std::span<const double> a,
                         std::span<const double> b) -> std::optional<double> {
    try {
      return spearman(a, b);
    } catch (const UndefinedResult&) {
      return std::nullopt;
    }
  };

  std::vector<double> u(n), mag(n);
  for (std::size_t j = 0; j < kNumBoxParams; ++j) {
    double nll = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      u[i] = records[i].uncertainty.values[j];
      mag[i] = std::abs(res[i][j]);
      nll += gaussian_nll(res[i][j], u[i]);
    }
    auto& p = report.params[j];
    p.nll = nll / static_cast<double>(n);
    p.spearman_vs_residual = try_spearman(u, mag);
    p.spearman_vs_iou = try_spearman(u, ious);
  }
  return report;
}

}  // namespace edl3d
