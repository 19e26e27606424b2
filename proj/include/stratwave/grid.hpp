#pragma once

#include <vector>

namespace stratwave {

// Tensor grid on the periodic strip [-L/d, L/d) x [-1, 0]. Columns are the nx
// periodic xi nodes; zeta rows are interface-aligned and may be nonuniform.
struct StripGrid {
  int nx = 0;
  double half_period = 0.0;  // L/d
  std::vector<double> zeta;  // rows, zeta[0] = -1, zeta[nz] = 0

  int rows() const { return static_cast<int>(zeta.size()); }
  int cells_z() const { return rows() - 1; }
  int nodes() const { return nx * rows(); }
  double dxi() const { return 2.0 * half_period / nx; }
  double xi(int i) const { return -half_period + dxi() * i; }
  int node(int i, int j) const { return j * nx + i; }
  int wrap(int i) const { return (i % nx + nx) % nx; }

  // Every breakpoint is a row; adjacent row spacing ratio <= 4; nx even >= 16.
  static StripGrid build(double half_period, int nx, int zeta_intervals,
                         const std::vector<double>& breakpoints, int min_cells_per_layer = 2);
  void validate(const std::vector<double>& breakpoints) const;
};

// Partition [-1, 0] into about `intervals` cells with rows at every breakpoint,
// uniform within layers, at least `min_per_layer` cells per layer, and adjacent
// spacing ratio at most 4.
std::vector<double> build_zeta_rows(const std::vector<double>& breakpoints, int intervals,
                                    int min_per_layer = 1);

}  // namespace stratwave
