#pragma once

#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "stratwave/density.hpp"
#include "stratwave/flux.hpp"
#include "stratwave/grid.hpp"
#include "stratwave/spectrum.hpp"

namespace stratwave {

// Dimensionless streamline displacement w on a strip grid, with the Richardson
// number of the solve and provenance of the density it was computed against.
struct WaveField {
  StripGrid grid;
  std::vector<double> w;  // node values, bed row included (identically 0 there)
  double lambda = 0.0;
  std::string density_id;
  std::optional<double> penalization_s;  // nullopt = "off"

  double at(int i, int j) const { return w[grid.node(grid.wrap(i), j)]; }
  double& at(int i, int j) { return w[grid.node(grid.wrap(i), j)]; }
  double sup_norm() const;
};

// Optional manufactured-solution forcing: a volume source per node and an
// imposed conormal flux along the top boundary.
struct SourceTerm {
  std::vector<double> interior;  // same layout as w; bed row ignored
  std::vector<double> top_flux;  // per column: rho F2 - lambda rho w at zeta = 0
};

// Per-grid cache: one-sided density samples and the within-layer interpolation
// stencils used at cell-half midpoints. Rebuilding it is how a density change
// enters the operator.
class Discretization {
 public:
  struct Stencil {
    int rows[3] = {0, 0, 0};
    double val[3] = {0.0, 0.0, 0.0};
    double der[3] = {0.0, 0.0, 0.0};
    int n = 0;
  };

  Discretization(StripGrid grid, const RescaledDensity& density);

  const StripGrid& grid() const { return grid_; }
  const std::string& density_id() const { return density_id_; }
  double rho_bed() const { return rho_bed_; }
  double rho_surface() const { return rho_surface_; }

  std::vector<double> rho_cell;     // density at cell midpoints
  std::vector<double> rho_half_lo;  // per row j >= 1, at zeta_j - dm/4
  std::vector<double> rho_half_up;  // per row j <= nz-1, at zeta_j + dp/4
  std::vector<Stencil> sten_lo;     // interpolation at zeta_j - dm/4, one-sided
  std::vector<Stencil> sten_up;     // interpolation at zeta_j + dp/4, one-sided

 private:
  StripGrid grid_;
  std::string density_id_;
  double rho_bed_ = 0.0;
  double rho_surface_ = 0.0;
};

// Finite-volume residual of the quasilinear system, one value per node (area
// averaged; bed row zero). Fluxes are evaluated at cell-face midpoints with
// density sampled one-sidedly inside each layer; the surface row carries the
// conormal condition through its boundary flux.
std::vector<double> residual(const Discretization& disc, double lambda,
                             const std::vector<double>& w, const FluxModel& flux,
                             const SourceTerm* source = nullptr);

// Conservation audit of the same assembly: the cell sums telescope so that
// sum(R * area) - boundary fluxes - volume terms vanishes identically.
struct FluxAudit {
  double cell_sum = 0.0;     // sum over CVs of the divergence-part integrals
  double bottom_flux = 0.0;  // total conormal flux through zeta = -1 + dz/2 faces
  double top_flux = 0.0;     // total imposed flux through zeta = 0
};
FluxAudit residual_audit(const Discretization& disc, double lambda,
                         const std::vector<double>& w, const FluxModel& flux,
                         const SourceTerm* source = nullptr);

// Exact analytic linearization of `residual` in the unknowns (rows 1..nz).
// Triplet layout: unknown index (i, j) -> (j-1)*nx + i.
struct JacobianTriplets {
  std::vector<int> row, col;
  std::vector<double> value;
  int size = 0;
  void add(int r, int c, double v) {
    row.push_back(r);
    col.push_back(c);
    value.push_back(v);
  }
};
JacobianTriplets jacobian(const Discretization& disc, double lambda,
                          const std::vector<double>& w, const FluxModel& flux);

// d(residual)/d(lambda), needed by the amplitude-constrained solves.
std::vector<double> residual_dlambda(const Discretization& disc,
                                     const std::vector<double>& w);

// Discrete wave energy int rho |grad w|^2 / (1 + w_zeta) and its gradient.
double wave_energy(const Discretization& disc, const std::vector<double>& w);
std::vector<double> wave_energy_gradient(const Discretization& disc,
                                         const std::vector<double>& w);

// Sup over cells of |grad w|^2 (cell-centered gradients).
double grad_sup_squared(const Discretization& disc, const std::vector<double>& w);
// Smallest cell value of 1 + w_zeta; nonpositive means stagnation.
double min_one_plus_wzeta(const Discretization& disc, const std::vector<double>& w);

struct NewtonOptions {
  double tolerance = 1e-10;  // sup-norm residual
  int max_iterations = 30;
  std::optional<PenalizationParams> penalization = PenalizationParams{};
  const SourceTerm* source = nullptr;
};

struct SolveReport {
  int iterations = 0;
  std::vector<double> residual_history;
  bool converged = false;
  bool flagged = false;
  std::string flag_reason;
  bool penalized_at_end = false;
  int penalization_off_iteration = -1;
  std::map<std::string, double> extras;
  std::vector<std::pair<double, double>> branch_path;  // (amplitude R, lambda)
};

// Damped Newton at fixed lambda. Penalization, when active, is switched off
// permanently once |grad w|_inf^2 < s/2, and convergence is then re-verified
// against the physical residual.
SolveReport newton_solve(const Discretization& disc, double lambda, std::vector<double>& w,
                         const NewtonOptions& options);

struct BranchOptions {
  double amplitude_cap = 0.2;
  double initial_step_fraction = 0.25;
  int max_steps = 200;
  NewtonOptions newton;
};

struct BranchResult {
  WaveField wave;
  EigenResult eigen;
  SolveReport report;
};

// Departs the trivial branch at lambda_crit along the critical mode and
// continues the amplitude constraint int rho |grad w|^2/(1+w_zeta) = R^2 up to
// the requested R, treating lambda as an unknown of the bordered system.
BranchResult branch_continuation(const StripGrid& grid, const RescaledDensity& density,
                                 const FlowParameters& params, double amplitude,
                                 const BranchOptions& options = {});

struct ContinuationResult {
  WaveField wave;
  SolveReport report;
};

// Homotopy (1-t) rho_start + t rho_target at fixed lambda, Newton re-solve at
// each step warm-started from the previous wave. The grid must already be
// aligned with the union of both breakpoint sets.
ContinuationResult density_continuation(const WaveField& start, const RescaledDensity& rho_start,
                                        const RescaledDensity& rho_target, double lambda,
                                        int steps, const NewtonOptions& options = {});

struct DiagnosticCheck {
  std::string name;
  bool asserted = false;  // false = monitored only
  bool passed = true;
  double value = 0.0;
  double threshold = 0.0;
  std::string detail;
};

struct DiagnosticsReport {
  std::vector<DiagnosticCheck> checks;
  bool all_asserted_passed() const;
  const DiagnosticCheck* find(const std::string& name) const;
};

// Qualitative checks on a converged wave: the gradient energy inequality with
// C1 = 16 lambda^2 rho(-1)/rho(0), evenness, elevation, supercriticality
// (asserted), plus monitored amplitude ratios and crest decay.
DiagnosticsReport diagnostics(const Discretization& disc, const WaveField& wave,
                              const EigenResult& eigen);

}  // namespace stratwave
