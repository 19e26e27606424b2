#include "stratwave/grid.hpp"

#include <algorithm>
#include <cmath>

#include "stratwave/errors.hpp"

namespace stratwave {

std::vector<double> build_zeta_rows(const std::vector<double>& breakpoints, int intervals,
                                    int min_per_layer) {
  std::vector<double> breaks = breakpoints;
  std::sort(breaks.begin(), breaks.end());
  breaks.erase(std::unique(breaks.begin(), breaks.end(),
                           [](double a, double b) { return std::abs(a - b) < 1e-13; }),
               breaks.end());
  if (breaks.size() < 2 || std::abs(breaks.front() + 1.0) > 1e-12 ||
      std::abs(breaks.back()) > 1e-12)
    throw InvalidArgumentError("build_zeta_rows: breakpoints must span [-1, 0]");
  breaks.front() = -1.0;
  breaks.back() = 0.0;

  const int segments = static_cast<int>(breaks.size()) - 1;
  std::vector<int> counts(segments);
  for (int s = 0; s < segments; ++s) {
    const double len = breaks[s + 1] - breaks[s];
    counts[s] = std::max(min_per_layer, static_cast<int>(std::llround(intervals * len)));
  }
  // Equalize adjacent spacings until the ratio bound holds.
  for (int pass = 0; pass < 1000; ++pass) {
    bool changed = false;
    for (int s = 0; s + 1 < segments; ++s) {
      const double ha = (breaks[s + 1] - breaks[s]) / counts[s];
      const double hb = (breaks[s + 2] - breaks[s + 1]) / counts[s + 1];
      if (ha > 4.0 * hb) {
        ++counts[s];
        changed = true;
      } else if (hb > 4.0 * ha) {
        ++counts[s + 1];
        changed = true;
      }
    }
    if (!changed) break;
  }

  std::vector<double> rows;
  rows.push_back(-1.0);
  for (int s = 0; s < segments; ++s) {
    for (int k = 1; k <= counts[s]; ++k)
      rows.push_back(breaks[s] + (breaks[s + 1] - breaks[s]) * k / counts[s]);
    rows.back() = breaks[s + 1];
  }
  rows.back() = 0.0;
  return rows;
}

StripGrid StripGrid::build(double half_period, int nx, int zeta_intervals,
                           const std::vector<double>& breakpoints, int min_cells_per_layer) {
  if (nx < 16 || nx % 2 != 0)
    throw InvalidArgumentError("grid: nx must be even and at least 16");
  if (!(half_period >= 4.0)) throw InvalidArgumentError("grid: require L/d >= 4");
  StripGrid grid;
  grid.nx = nx;
  grid.half_period = half_period;
  grid.zeta = build_zeta_rows(breakpoints, zeta_intervals, min_cells_per_layer);
  grid.validate(breakpoints);
  return grid;
}

void StripGrid::validate(const std::vector<double>& breakpoints) const {
  if (nx < 16 || nx % 2 != 0)
    throw InvalidArgumentError("grid: nx must be even and at least 16");
  if (rows() < 3 || std::abs(zeta.front() + 1.0) > 1e-12 || std::abs(zeta.back()) > 1e-12)
    throw InvalidArgumentError("grid: zeta rows must span [-1, 0]");
  for (int j = 0; j + 1 < rows(); ++j)
    if (!(zeta[j] < zeta[j + 1]))
      throw InvalidArgumentError("grid: zeta rows must be strictly increasing");
  for (int j = 1; j + 1 < cells_z(); ++j) {
    const double ha = zeta[j + 1] - zeta[j];
    const double hb = zeta[j + 2] - zeta[j + 1];
    if (ha > 4.0 * hb + 1e-14 || hb > 4.0 * ha + 1e-14)
      throw InvalidArgumentError("grid: adjacent row spacing ratio exceeds 4");
  }
  for (double b : breakpoints) {
    bool found = false;
    for (double z : zeta)
      if (std::abs(z - b) <= 1e-12) {
        found = true;
        break;
      }
    if (!found) throw InvalidArgumentError("grid: not interface-aligned");
  }
}

}  // namespace stratwave
