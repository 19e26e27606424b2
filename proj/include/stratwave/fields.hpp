#pragma once

#include <vector>

#include "stratwave/bernoulli.hpp"
#include "stratwave/density.hpp"
#include "stratwave/solver.hpp"

namespace stratwave {

// Height above the bed on the Dubreil-Jacotin rectangle [-L, L] x [p0, 0],
// rows aligned with the zeta rows of the originating strip grid.
struct HeightField {
  std::vector<double> q;  // columns, length units
  std::vector<double> p;  // rows, p[0] = p0, p.back() = 0
  std::vector<double> h;  // node(i, j) = j * nq + i
  std::vector<int> interface_rows;  // density interfaces among the rows
  double depth = 0.0;

  int nq() const { return static_cast<int>(q.size()); }
  int np() const { return static_cast<int>(p.size()); }
  double at(int i, int j) const { return h[j * nq() + i]; }
  double& at(int i, int j) { return h[j * nq() + i]; }
  // Row ranges [begin, end] of each layer, sharing interface rows.
  std::vector<std::pair<int, int>> layer_rows() const;
};

HeightField w_to_height(const WaveField& wave, const DensityProfile& rho,
                        const FlowParameters& params);
WaveField height_to_w(const HeightField& height, const DensityProfile& rho,
                      const FlowParameters& params);

// Eulerian samples at streamline-coordinate nodes; interface rows appear once
// per adjacent layer since the tangential velocity may jump there.
struct EulerianFields {
  struct Sample {
    double x, y, u, v, psi, rho;
  };
  struct LayerBlock {
    int layer = 0;
    int row_begin = 0, row_end = 0;     // rows of the height field
    std::vector<Sample> samples;        // row-major: (row - row_begin) * nq + i
  };
  std::vector<double> x;    // columns
  std::vector<double> eta;  // surface profile per column
  std::vector<LayerBlock> layers;
  double speed = 0.0;
};

EulerianFields height_to_velocity(const HeightField& height, const DensityProfile& rho,
                                  const FlowParameters& params);

// int sqrt(rho) (u - c) dy along each column; equals p0 for an exact flow.
std::vector<double> column_mass_flux(const EulerianFields& fields,
                                     const DensityProfile& rho,
                                     const FlowParameters& params);

struct StreamfunctionColumn {
  double x0 = 0.0;
  std::vector<double> y;    // accepted step points, surface downward
  std::vector<double> psi;  // matching psi samples
  double bed_value = 0.0;   // should equal -p0
  double max_identity_error = 0.0;  // max |y - (h(x0, -psi) - d)|
  int steps = 0;
};

// Integrates psi_y = -1/h_p(x0, -psi) from the surface (psi = 0) down to the
// bed with adaptive fourth-order steps over a monotone per-layer interpolant
// of the column heights. Extra stops at `y_targets` when provided.
StreamfunctionColumn reconstruct_streamfunction(const HeightField& height,
                                                const DensityProfile& rho,
                                                const FlowParameters& params, double x0,
                                                const std::vector<double>& y_targets = {});

struct PressureField {
  struct LayerBlock {
    int layer = 0;
    int row_begin = 0, row_end = 0;
    std::vector<double> P;  // (row - row_begin) * nq + i
  };
  std::vector<double> q;
  std::vector<double> p;
  std::vector<LayerBlock> layers;
  std::vector<double> bed;        // trace at p = p0
  double surface_error = 0.0;     // max |P(., 0) - P_atm|
  double max_interface_jump = 0.0;
  double sup_abs = 0.0;
};

// Semi-Lagrangian pressure: P = C_layer + P_atm - (1 + h_q^2)/(2 h_p^2)
// - g rho h + B(p), with the cumulative layer constants of BernoulliData.
PressureField pressure_field(const HeightField& height, const DensityProfile& rho,
                             const FlowParameters& params, const BernoulliData& bdata);

std::vector<double> bed_pressure_trace(const PressureField& pressure);

}  // namespace stratwave
