#include "stratwave/solver.hpp"

#include <Eigen/SparseCore>
#include <Eigen/SparseLU>

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "stratwave/errors.hpp"

namespace stratwave {

namespace {

constexpr double kArmijoSlope = 1e-4;
constexpr int kMaxBacktracks = 25;

// Lagrange interpolation weights (value and derivative) at z for up to 3 nodes.
Discretization::Stencil make_stencil(const std::vector<double>& zeta, const int* rows, int n,
                                     double z) {
  Discretization::Stencil st;
  st.n = n;
  for (int k = 0; k < n; ++k) st.rows[k] = rows[k];
  if (n == 2) {
    const double za = zeta[rows[0]], zb = zeta[rows[1]];
    st.val[0] = (zb - z) / (zb - za);
    st.val[1] = (z - za) / (zb - za);
    st.der[0] = -1.0 / (zb - za);
    st.der[1] = 1.0 / (zb - za);
    return st;
  }
  for (int k = 0; k < 3; ++k) {
    const double zk = zeta[rows[k]];
    const double za = zeta[rows[(k + 1) % 3]];
    const double zb = zeta[rows[(k + 2) % 3]];
    st.val[k] = (z - za) * (z - zb) / ((zk - za) * (zk - zb));
    st.der[k] = ((z - za) + (z - zb)) / ((zk - za) * (zk - zb));
  }
  return st;
}

}  // namespace

double WaveField::sup_norm() const {
  double m = 0.0;
  for (double v : w) m = std::max(m, std::abs(v));
  return m;
}

Discretization::Discretization(StripGrid grid, const RescaledDensity& density)
    : grid_(std::move(grid)), density_id_(density.id) {
  grid_.validate(density.breakpoints);
  const auto& zeta = grid_.zeta;
  const int nz = grid_.cells_z();

  // Layer index per cell from the density breakpoints.
  std::vector<int> layer_of_cell(nz, 0);
  const auto& breaks = density.breakpoints;
  for (int j = 0; j < nz; ++j) {
    const double zc = 0.5 * (zeta[j] + zeta[j + 1]);
    int layer = 0;
    while (layer + 2 < static_cast<int>(breaks.size()) && zc > breaks[layer + 1]) ++layer;
    layer_of_cell[j] = layer;
  }
  // Row range per layer; stencils never cross an interface.
  auto layer_rows = [&](int cell, int* rlo, int* rhi) {
    int lo = cell, hi = cell;
    while (lo > 0 && layer_of_cell[lo - 1] == layer_of_cell[cell]) --lo;
    while (hi + 1 < nz && layer_of_cell[hi + 1] == layer_of_cell[cell]) ++hi;
    *rlo = lo;
    *rhi = hi + 1;
  };

  rho_cell.assign(nz, 0.0);
  for (int j = 0; j < nz; ++j)
    rho_cell[j] = density.value(0.5 * (zeta[j] + zeta[j + 1]), Side::Below);
  rho_bed_ = density.at_bed();
  rho_surface_ = density.at_surface();

  const int rows_count = grid_.rows();
  rho_half_lo.assign(rows_count, 0.0);
  rho_half_up.assign(rows_count, 0.0);
  sten_lo.assign(rows_count, Stencil{});
  sten_up.assign(rows_count, Stencil{});
  for (int j = 1; j < rows_count; ++j) {
    const int cell = j - 1;
    const double z = zeta[j] - 0.25 * (zeta[j] - zeta[j - 1]);
    rho_half_lo[j] = density.value(z, Side::Below);
    int rlo, rhi;
    layer_rows(cell, &rlo, &rhi);
    if (cell - 1 >= rlo) {
      const int rows3[3] = {cell - 1, cell, cell + 1};
      sten_lo[j] = make_stencil(zeta, rows3, 3, z);
    } else if (cell + 2 <= rhi) {
      const int rows3[3] = {cell, cell + 1, cell + 2};
      sten_lo[j] = make_stencil(zeta, rows3, 3, z);
    } else {
      const int rows2[2] = {cell, cell + 1};
      sten_lo[j] = make_stencil(zeta, rows2, 2, z);
    }
  }
  for (int j = 1; j + 1 < rows_count; ++j) {
    const int cell = j;
    const double z = zeta[j] + 0.25 * (zeta[j + 1] - zeta[j]);
    rho_half_up[j] = density.value(z, Side::Below);
    int rlo, rhi;
    layer_rows(cell, &rlo, &rhi);
    if (cell + 2 <= rhi) {
      const int rows3[3] = {cell, cell + 1, cell + 2};
      sten_up[j] = make_stencil(zeta, rows3, 3, z);
    } else if (cell - 1 >= rlo) {
      const int rows3[3] = {cell - 1, cell, cell + 1};
      sten_up[j] = make_stencil(zeta, rows3, 3, z);
    } else {
      const int rows2[2] = {cell, cell + 1};
      sten_up[j] = make_stencil(zeta, rows2, 2, z);
    }
  }
}

namespace {

struct AssemblyMode {
  std::vector<double>* R = nullptr;
  JacobianTriplets* J = nullptr;
  FluxAudit* audit = nullptr;
  bool include_volume = true;
};

void assemble(const Discretization& disc, double lambda, const std::vector<double>& w,
              const FluxModel& flux, const SourceTerm* source, const AssemblyMode& mode) {
  const StripGrid& grid = disc.grid();
  const auto& zeta = grid.zeta;
  const int nx = grid.nx;
  const int nz = grid.cells_z();
  const double dxi = grid.dxi();

  std::vector<double> raw;
  if (mode.R || mode.audit) raw.assign(grid.nodes(), 0.0);

  auto unknown = [&](int i, int j) { return (j - 1) * nx + i; };
  auto addJ = [&](int ri, int rj, int ci, int cj, double v) {
    if (!mode.J || cj == 0) return;
    mode.J->add(unknown(ri, rj), unknown(ci, cj), v);
  };
  auto wat = [&](int i, int j) { return w[grid.node(i, j)]; };

  // Vertical faces between rows j and j+1 carry rho (F2 - lambda w).
  for (int j = 0; j < nz; ++j) {
    const double dz = zeta[j + 1] - zeta[j];
    const double rho = disc.rho_cell[j];
    for (int i = 0; i < nx; ++i) {
      const int im = grid.wrap(i - 1), ip = grid.wrap(i + 1);
      const double wz = (wat(i, j + 1) - wat(i, j)) / dz;
      const double wx =
          (wat(ip, j) - wat(im, j) + wat(ip, j + 1) - wat(im, j + 1)) / (4.0 * dxi);
      const double wm = 0.5 * (wat(i, j) + wat(i, j + 1));
      const FluxJet jet = flux.eval(wx, wz);
      const double G = rho * (jet.g2 - lambda * wm) * dxi;
      if (!raw.empty()) {
        if (j >= 1) raw[grid.node(i, j)] += G;
        raw[grid.node(i, j + 1)] -= G;
      }
      if (mode.audit && j == 0) mode.audit->bottom_flux += G;
      if (mode.J) {
        const double c = rho * dxi;
        struct Dep {
          int ci, cj;
          double dwx, dwz, dwm;
        };
        const Dep deps[6] = {
            {i, j, 0.0, -1.0 / dz, 0.5},
            {i, j + 1, 0.0, 1.0 / dz, 0.5},
            {im, j, -1.0 / (4.0 * dxi), 0.0, 0.0},
            {ip, j, 1.0 / (4.0 * dxi), 0.0, 0.0},
            {im, j + 1, -1.0 / (4.0 * dxi), 0.0, 0.0},
            {ip, j + 1, 1.0 / (4.0 * dxi), 0.0, 0.0},
        };
        for (const Dep& dep : deps) {
          const double dG =
              c * (jet.h12 * dep.dwx + jet.h22 * dep.dwz - lambda * dep.dwm);
          if (dG == 0.0) continue;
          if (j >= 1) addJ(i, j, dep.ci, dep.cj, dG);
          addJ(i, j + 1, dep.ci, dep.cj, -dG);
        }
      }
    }
  }
  // Imposed conormal flux through the surface (zero unless manufactured).
  if (!raw.empty() || mode.audit) {
    for (int i = 0; i < nx; ++i) {
      const double Gtop = source ? source->top_flux[i] * dxi : 0.0;
      if (!raw.empty()) raw[grid.node(i, nz)] += Gtop;
      if (mode.audit) mode.audit->top_flux += Gtop;
    }
  }

  // Horizontal faces between columns i and i+1, split per layer half.
  for (int j = 1; j <= nz; ++j) {
    for (int half = 0; half < 2; ++half) {
      const bool lower = half == 0;
      if (!lower && j == nz) continue;
      const Discretization::Stencil& st = lower ? disc.sten_lo[j] : disc.sten_up[j];
      const double rho = lower ? disc.rho_half_lo[j] : disc.rho_half_up[j];
      const double len = lower ? 0.5 * (zeta[j] - zeta[j - 1]) : 0.5 * (zeta[j + 1] - zeta[j]);
      for (int i = 0; i < nx; ++i) {
        const int ip = grid.wrap(i + 1);
        double Wi = 0.0, Wip = 0.0, Di = 0.0, Dip = 0.0;
        for (int k = 0; k < st.n; ++k) {
          Wi += st.val[k] * wat(i, st.rows[k]);
          Wip += st.val[k] * wat(ip, st.rows[k]);
          Di += st.der[k] * wat(i, st.rows[k]);
          Dip += st.der[k] * wat(ip, st.rows[k]);
        }
        const double wx = (Wip - Wi) / dxi;
        const double wz = 0.5 * (Di + Dip);
        const FluxJet jet = flux.eval(wx, wz);
        const double H = rho * jet.g1 * len;
        if (!raw.empty()) {
          raw[grid.node(i, j)] += H;
          raw[grid.node(ip, j)] -= H;
        }
        if (mode.J) {
          for (int k = 0; k < st.n; ++k) {
            const double dH_i =
                rho * len * (jet.h11 * (-st.val[k] / dxi) + jet.h12 * (0.5 * st.der[k]));
            const double dH_ip =
                rho * len * (jet.h11 * (st.val[k] / dxi) + jet.h12 * (0.5 * st.der[k]));
            addJ(i, j, i, st.rows[k], dH_i);
            addJ(i, j, ip, st.rows[k], dH_ip);
            addJ(ip, j, i, st.rows[k], -dH_i);
            addJ(ip, j, ip, st.rows[k], -dH_ip);
          }
        }
      }
    }
  }

  // Non-divergence term lambda rho w_zeta over each half control volume.
  if (mode.include_volume) {
    for (int j = 1; j <= nz; ++j) {
      for (int half = 0; half < 2; ++half) {
        const bool lower = half == 0;
        if (!lower && j == nz) continue;
        const Discretization::Stencil& st = lower ? disc.sten_lo[j] : disc.sten_up[j];
        const double rho = lower ? disc.rho_half_lo[j] : disc.rho_half_up[j];
        const double len = lower ? 0.5 * (zeta[j] - zeta[j - 1]) : 0.5 * (zeta[j + 1] - zeta[j]);
        for (int i = 0; i < nx; ++i) {
          double Di = 0.0;
          for (int k = 0; k < st.n; ++k) Di += st.der[k] * wat(i, st.rows[k]);
          const double V = lambda * rho * Di * len * dxi;
          if (!raw.empty()) raw[grid.node(i, j)] += V;
          if (mode.J)
            for (int k = 0; k < st.n; ++k)
              addJ(i, j, i, st.rows[k], lambda * rho * st.der[k] * len * dxi);
        }
      }
    }
  }

  if (mode.audit) {
    double sum = 0.0;
    for (int j = 1; j <= nz; ++j)
      for (int i = 0; i < nx; ++i) sum += raw[grid.node(i, j)];
    mode.audit->cell_sum = sum;
  }

  if (mode.R) {
    for (int j = 1; j <= nz; ++j) {
      const double dm = zeta[j] - zeta[j - 1];
      const double dp = j < nz ? zeta[j + 1] - zeta[j] : 0.0;
      const double area = dxi * 0.5 * (dm + dp);
      for (int i = 0; i < nx; ++i) {
        double v = raw[grid.node(i, j)] / area;
        if (source && !source->interior.empty()) v -= source->interior[grid.node(i, j)];
        (*mode.R)[grid.node(i, j)] = v;
      }
    }
  }
  if (mode.J) {
    // Scale each Jacobian row by its control volume area.
    std::vector<double> inv_area(nz + 1, 0.0);
    for (int j = 1; j <= nz; ++j) {
      const double dm = zeta[j] - zeta[j - 1];
      const double dp = j < nz ? zeta[j + 1] - zeta[j] : 0.0;
      inv_area[j] = 1.0 / (dxi * 0.5 * (dm + dp));
    }
    for (std::size_t t = 0; t < mode.J->value.size(); ++t) {
      const int j = mode.J->row[t] / nx + 1;
      mode.J->value[t] *= inv_area[j];
    }
    mode.J->size = nz * nx;
  }
}

}  // namespace

std::vector<double> residual(const Discretization& disc, double lambda,
                             const std::vector<double>& w, const FluxModel& flux,
                             const SourceTerm* source) {
  std::vector<double> R(disc.grid().nodes(), 0.0);
  AssemblyMode mode;
  mode.R = &R;
  assemble(disc, lambda, w, flux, source, mode);
  return R;
}

FluxAudit residual_audit(const Discretization& disc, double lambda,
                         const std::vector<double>& w, const FluxModel& flux,
                         const SourceTerm* source) {
  FluxAudit audit;
  AssemblyMode mode;
  mode.audit = &audit;
  mode.include_volume = false;
  assemble(disc, lambda, w, flux, source, mode);
  return audit;
}

JacobianTriplets jacobian(const Discretization& disc, double lambda,
                          const std::vector<double>& w, const FluxModel& flux) {
  JacobianTriplets J;
  J.row.reserve(disc.grid().nodes() * 16);
  J.col.reserve(disc.grid().nodes() * 16);
  J.value.reserve(disc.grid().nodes() * 16);
  AssemblyMode mode;
  mode.J = &J;
  assemble(disc, lambda, w, flux, nullptr, mode);
  return J;
}

std::vector<double> residual_dlambda(const Discretization& disc, const std::vector<double>& w) {
  const StripGrid& grid = disc.grid();
  const auto& zeta = grid.zeta;
  const int nx = grid.nx, nz = grid.cells_z();
  const double dxi = grid.dxi();
  std::vector<double> raw(grid.nodes(), 0.0);
  auto wat = [&](int i, int j) { return w[grid.node(i, j)]; };

  for (int j = 0; j < nz; ++j) {
    const double rho = disc.rho_cell[j];
    for (int i = 0; i < nx; ++i) {
      const double G = rho * (-0.5 * (wat(i, j) + wat(i, j + 1))) * dxi;
      if (j >= 1) raw[grid.node(i, j)] += G;
      raw[grid.node(i, j + 1)] -= G;
    }
  }
  for (int j = 1; j <= nz; ++j) {
    for (int half = 0; half < 2; ++half) {
      const bool lower = half == 0;
      if (!lower && j == nz) continue;
      const Discretization::Stencil& st = lower ? disc.sten_lo[j] : disc.sten_up[j];
      const double rho = lower ? disc.rho_half_lo[j] : disc.rho_half_up[j];
      const double len = lower ? 0.5 * (zeta[j] - zeta[j - 1]) : 0.5 * (zeta[j + 1] - zeta[j]);
      for (int i = 0; i < nx; ++i) {
        double Di = 0.0;
        for (int k = 0; k < st.n; ++k) Di += st.der[k] * wat(i, st.rows[k]);
        raw[grid.node(i, j)] += rho * Di * len * dxi;
      }
    }
  }
  for (int j = 1; j <= nz; ++j) {
    const double dm = zeta[j] - zeta[j - 1];
    const double dp = j < nz ? zeta[j + 1] - zeta[j] : 0.0;
    const double area = dxi * 0.5 * (dm + dp);
    for (int i = 0; i < nx; ++i) raw[grid.node(i, j)] /= area;
  }
  return raw;
}

namespace {

struct CellGradient {
  double gx, gz, area, rho;
};

template <typename F>
void for_each_cell_gradient(const Discretization& disc, const std::vector<double>& w, F&& fn) {
  const StripGrid& grid = disc.grid();
  const auto& zeta = grid.zeta;
  const int nx = grid.nx, nz = grid.cells_z();
  const double dxi = grid.dxi();
  for (int j = 0; j < nz; ++j) {
    const double dz = zeta[j + 1] - zeta[j];
    for (int i = 0; i < nx; ++i) {
      const int ip = grid.wrap(i + 1);
      const double w00 = w[grid.node(i, j)], w10 = w[grid.node(ip, j)];
      const double w01 = w[grid.node(i, j + 1)], w11 = w[grid.node(ip, j + 1)];
      CellGradient cell;
      cell.gx = (w10 + w11 - w00 - w01) / (2.0 * dxi);
      cell.gz = (w01 + w11 - w00 - w10) / (2.0 * dz);
      cell.area = dxi * dz;
      cell.rho = disc.rho_cell[j];
      fn(i, j, ip, cell);
    }
  }
}

}  // namespace

double wave_energy(const Discretization& disc, const std::vector<double>& w) {
  double total = 0.0;
  for_each_cell_gradient(disc, w, [&](int, int, int, const CellGradient& cell) {
    if (!(cell.gz > -1.0)) throw StagnationError("wave_energy: w_zeta <= -1 in a cell");
    total += cell.rho * (cell.gx * cell.gx + cell.gz * cell.gz) / (1.0 + cell.gz) * cell.area;
  });
  return total;
}

std::vector<double> wave_energy_gradient(const Discretization& disc,
                                         const std::vector<double>& w) {
  const StripGrid& grid = disc.grid();
  const auto& zeta = grid.zeta;
  const double dxi = grid.dxi();
  std::vector<double> g(grid.nodes(), 0.0);
  for_each_cell_gradient(disc, w, [&](int i, int j, int ip, const CellGradient& cell) {
    if (!(cell.gz > -1.0)) throw StagnationError("wave_energy_gradient: stagnation");
    const double dz = zeta[j + 1] - zeta[j];
    const double q = 1.0 + cell.gz;
    const double r2 = cell.gx * cell.gx + cell.gz * cell.gz;
    const double de_dgx = cell.rho * 2.0 * cell.gx / q * cell.area;
    const double de_dgz = cell.rho * (2.0 * cell.gz * q - r2) / (q * q) * cell.area;
    const double cx = 1.0 / (2.0 * dxi), cz = 1.0 / (2.0 * dz);
    g[grid.node(i, j)] += de_dgx * (-cx) + de_dgz * (-cz);
    g[grid.node(ip, j)] += de_dgx * (cx) + de_dgz * (-cz);
    g[grid.node(i, j + 1)] += de_dgx * (-cx) + de_dgz * (cz);
    g[grid.node(ip, j + 1)] += de_dgx * (cx) + de_dgz * (cz);
  });
  return g;
}

double grad_sup_squared(const Discretization& disc, const std::vector<double>& w) {
  double m = 0.0;
  for_each_cell_gradient(disc, w, [&](int, int, int, const CellGradient& cell) {
    m = std::max(m, cell.gx * cell.gx + cell.gz * cell.gz);
  });
  return m;
}

double min_one_plus_wzeta(const Discretization& disc, const std::vector<double>& w) {
  const StripGrid& grid = disc.grid();
  const auto& zeta = grid.zeta;
  double m = 1e300;
  for (int j = 0; j + 1 < grid.rows(); ++j) {
    const double dz = zeta[j + 1] - zeta[j];
    for (int i = 0; i < grid.nx; ++i)
      m = std::min(m, 1.0 + (w[grid.node(i, j + 1)] - w[grid.node(i, j)]) / dz);
  }
  return m;
}

namespace {

using SpMat = Eigen::SparseMatrix<double>;

SpMat to_sparse(const JacobianTriplets& J, int n) {
  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(J.value.size());
  for (std::size_t t = 0; t < J.value.size(); ++t)
    trips.emplace_back(J.row[t], J.col[t], J.value[t]);
  SpMat A(n, n);
  A.setFromTriplets(trips.begin(), trips.end());
  return A;
}

// Direct solve with one step of iterative refinement; the linear-solve
// contract is relative residual <= 1e-12.
Eigen::VectorXd solve_checked(const SpMat& A, const Eigen::VectorXd& b) {
  Eigen::SparseLU<SpMat> lu;
  lu.analyzePattern(A);
  lu.factorize(A);
  if (lu.info() != Eigen::Success) throw ConvergenceError("linear solve: factorization failed");
  Eigen::VectorXd x = lu.solve(b);
  const double bn = std::max(b.template lpNorm<Eigen::Infinity>(), 1e-300);
  if ((A * x - b).template lpNorm<Eigen::Infinity>() > 1e-12 * bn) x += lu.solve(b - A * x);
  if ((A * x - b).template lpNorm<Eigen::Infinity>() > 1e-10 * bn)
    throw ConvergenceError("linear solve: residual above tolerance");
  return x;
}

double sup_norm(const std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

}  // namespace

SolveReport newton_solve(const Discretization& disc, double lambda, std::vector<double>& w,
                         const NewtonOptions& options) {
  const StripGrid& grid = disc.grid();
  const int nx = grid.nx, nz = grid.cells_z();
  const int n = nx * nz;
  SolveReport report;

  FluxModel flux;
  bool penalized = false;
  double s = 0.0;
  if (options.penalization) {
    options.penalization->validate();
    flux.penalization = options.penalization;
    penalized = true;
    s = options.penalization->s;
  }

  auto maybe_switch_off = [&](int iter) {
    if (penalized && grad_sup_squared(disc, w) < 0.5 * s) {
      penalized = false;
      flux.penalization.reset();
      report.penalization_off_iteration = iter;
    }
  };

  for (int iter = 0; iter <= options.max_iterations; ++iter) {
    maybe_switch_off(iter);
    if (!penalized && min_one_plus_wzeta(disc, w) <= 0.0)
      throw StagnationError("newton_solve: w_zeta <= -1 with penalization off");

    std::vector<double> R = residual(disc, lambda, w, flux, options.source);
    const double norm = sup_norm(R);
    report.residual_history.push_back(norm);
    report.iterations = iter;
    if (norm <= options.tolerance) {
      report.converged = true;
      if (penalized) {
        // The converged state must satisfy the physical system too.
        FluxModel physical;
        if (min_one_plus_wzeta(disc, w) > 0.0 &&
            sup_norm(residual(disc, lambda, w, physical, options.source)) <= options.tolerance) {
          report.extras["physical_residual_ok"] = 1.0;
        } else {
          report.flagged = true;
          report.flag_reason = "converged only for the penalized system";
        }
      }
      break;
    }
    if (iter == options.max_iterations) {
      report.flagged = true;
      report.flag_reason = "no convergence within iteration budget";
      break;
    }

    JacobianTriplets Jt = jacobian(disc, lambda, w, flux);
    SpMat A = to_sparse(Jt, n);
    Eigen::VectorXd rhs(n);
    for (int j = 1; j <= nz; ++j)
      for (int i = 0; i < nx; ++i) rhs[(j - 1) * nx + i] = -R[grid.node(i, j)];
    Eigen::VectorXd delta = solve_checked(A, rhs);

    double alpha = 1.0;
    bool accepted = false;
    std::vector<double> trial(w.size());
    for (int bt = 0; bt < kMaxBacktracks; ++bt) {
      trial = w;
      for (int j = 1; j <= nz; ++j)
        for (int i = 0; i < nx; ++i)
          trial[grid.node(i, j)] += alpha * delta[(j - 1) * nx + i];
      double trial_norm;
      try {
        trial_norm = sup_norm(residual(disc, lambda, trial, flux, options.source));
      } catch (const StagnationError&) {
        alpha *= 0.5;
        continue;
      }
      if (trial_norm <= (1.0 - kArmijoSlope * alpha) * norm) {
        w = trial;
        accepted = true;
        break;
      }
      alpha *= 0.5;
    }
    if (!accepted) {
      report.flagged = true;
      report.flag_reason = "line search stalled";
      break;
    }
  }
  report.penalized_at_end = penalized;
  // Residual history must decrease monotonically once steps are accepted.
  for (std::size_t k = 2; k < report.residual_history.size(); ++k) {
    if (report.residual_history[k] >= report.residual_history[k - 1]) {
      report.flagged = true;
      if (report.flag_reason.empty()) report.flag_reason = "residual history not decreasing";
    }
  }
  return report;
}

namespace {

// One damped Newton run on the bordered system [residual; energy - R^2] with
// lambda appended as the extra unknown.
SolveReport constrained_newton(const Discretization& disc, std::vector<double>& w,
                               double& lambda, double target_energy_sq,
                               const NewtonOptions& options) {
  const StripGrid& grid = disc.grid();
  const int nx = grid.nx, nz = grid.cells_z();
  const int n = nx * nz;
  const double cscale = std::max(1.0, target_energy_sq);
  SolveReport report;

  FluxModel flux;
  bool penalized = false;
  double s = 0.0;
  if (options.penalization) {
    flux.penalization = options.penalization;
    penalized = true;
    s = options.penalization->s;
  }

  auto combined_norm = [&](const std::vector<double>& R, double cviol) {
    return std::max(sup_norm(R), std::abs(cviol) / cscale);
  };

  for (int iter = 0; iter <= options.max_iterations; ++iter) {
    if (penalized && grad_sup_squared(disc, w) < 0.5 * s) {
      penalized = false;
      flux.penalization.reset();
      report.penalization_off_iteration = iter;
    }
    if (!penalized && min_one_plus_wzeta(disc, w) <= 0.0)
      throw StagnationError("branch continuation: stagnation with penalization off");

    std::vector<double> R = residual(disc, lambda, w, flux, options.source);
    const double cviol = wave_energy(disc, w) - target_energy_sq;
    const double norm = combined_norm(R, cviol);
    report.residual_history.push_back(norm);
    report.iterations = iter;
    if (norm <= options.tolerance) {
      report.converged = true;
      if (penalized) {
        FluxModel physical;
        if (min_one_plus_wzeta(disc, w) > 0.0 &&
            sup_norm(residual(disc, lambda, w, physical, options.source)) <=
                options.tolerance) {
          report.extras["physical_residual_ok"] = 1.0;
        } else {
          report.flagged = true;
          report.flag_reason = "converged only for the penalized system";
        }
      }
      break;
    }
    if (iter == options.max_iterations) {
      report.flagged = true;
      report.flag_reason = "no convergence within iteration budget";
      break;
    }

    JacobianTriplets Jt = jacobian(disc, lambda, w, flux);
    const std::vector<double> dRdl = residual_dlambda(disc, w);
    const std::vector<double> dEdw = wave_energy_gradient(disc, w);
    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(Jt.value.size() + 2 * n + 1);
    for (std::size_t t = 0; t < Jt.value.size(); ++t)
      trips.emplace_back(Jt.row[t], Jt.col[t], Jt.value[t]);
    for (int j = 1; j <= nz; ++j)
      for (int i = 0; i < nx; ++i) {
        const int u = (j - 1) * nx + i;
        trips.emplace_back(u, n, dRdl[grid.node(i, j)]);
        const double e = dEdw[grid.node(i, j)] / cscale;
        if (e != 0.0) trips.emplace_back(n, u, e);
      }
    SpMat A(n + 1, n + 1);
    A.setFromTriplets(trips.begin(), trips.end());
    Eigen::VectorXd rhs(n + 1);
    for (int j = 1; j <= nz; ++j)
      for (int i = 0; i < nx; ++i) rhs[(j - 1) * nx + i] = -R[grid.node(i, j)];
    rhs[n] = -cviol / cscale;
    Eigen::VectorXd delta = solve_checked(A, rhs);

    double alpha = 1.0;
    bool accepted = false;
    for (int bt = 0; bt < kMaxBacktracks; ++bt) {
      std::vector<double> trial = w;
      for (int j = 1; j <= nz; ++j)
        for (int i = 0; i < nx; ++i)
          trial[grid.node(i, j)] += alpha * delta[(j - 1) * nx + i];
      const double lam_trial = lambda + alpha * delta[n];
      double trial_norm;
      try {
        trial_norm = combined_norm(residual(disc, lam_trial, trial, flux, options.source),
                                   wave_energy(disc, trial) - target_energy_sq);
      } catch (const StagnationError&) {
        alpha *= 0.5;
        continue;
      }
      if (trial_norm <= (1.0 - kArmijoSlope * alpha) * norm) {
        w = trial;
        lambda = lam_trial;
        accepted = true;
        break;
      }
      alpha *= 0.5;
    }
    if (!accepted) {
      report.flagged = true;
      report.flag_reason = "line search stalled";
      break;
    }
  }
  report.penalized_at_end = penalized;
  return report;
}

}  // namespace

BranchResult branch_continuation(const StripGrid& grid, const RescaledDensity& density,
                                 const FlowParameters& params, double amplitude,
                                 const BranchOptions& options) {
  params.validate();
  if (!(amplitude > 0.0) || amplitude > options.amplitude_cap)
    throw InvalidArgumentError("branch_continuation: amplitude must lie in (0, cap]");

  Discretization disc(grid, density);
  RayleighProblem problem{grid.zeta, density, grid.half_period};
  EigenResult eigen = lambda_crit(problem, params);

  // Critical mode as a strip field, cos(kappa xi) profile in the periodic
  // direction (constant for k = 0).
  const double kappa = eigen.wavenumber * M_PI / grid.half_period;
  std::vector<double> mode_field(grid.nodes(), 0.0);
  for (int j = 0; j < grid.rows(); ++j)
    for (int i = 0; i < grid.nx; ++i)
      mode_field[grid.node(i, j)] = eigen.mode[j] * std::cos(kappa * grid.xi(i));
  double mode_energy_quad = 0.0;  // sum rho |grad mode|^2, the small-amplitude scale
  {
    Discretization* dp = &disc;
    for_each_cell_gradient(*dp, mode_field, [&](int, int, int, const CellGradient& cell) {
      mode_energy_quad += cell.rho * (cell.gx * cell.gx + cell.gz * cell.gz) * cell.area;
    });
  }
  if (!(mode_energy_quad > 0.0))
    throw ConvergenceError("branch_continuation: degenerate critical mode");

  std::vector<double> w(grid.nodes(), 0.0);
  double lambda = eigen.lambda_crit;
  SolveReport report;
  double reached = 0.0;
  const double initial_step = amplitude * options.initial_step_fraction;
  double step = initial_step;
  int successes = 0;
  int steps_taken = 0;

  while (reached < amplitude * (1.0 - 1e-14)) {
    if (++steps_taken > options.max_steps) {
      report.flagged = true;
      report.flag_reason = "continuation exceeded step budget";
      break;
    }
    const double next = std::min(reached + step, amplitude);
    std::vector<double> w_trial;
    double lam_trial;
    if (reached == 0.0) {
      const double eps = next / std::sqrt(mode_energy_quad);
      w_trial = mode_field;
      for (double& v : w_trial) v *= eps;
      lam_trial = eigen.lambda_crit;
    } else {
      w_trial = w;
      const double scale = next / reached;
      for (double& v : w_trial) v *= scale;
      lam_trial = lambda;
    }
    SolveReport sub =
        constrained_newton(disc, w_trial, lam_trial, next * next, options.newton);
    if (sub.converged && !sub.flagged) {
      w = std::move(w_trial);
      lambda = lam_trial;
      reached = next;
      report.branch_path.emplace_back(reached, lambda);
      report.residual_history.push_back(sub.residual_history.back());
      report.iterations += sub.iterations;
      if (++successes >= 3) {
        step = std::min(2.0 * step, initial_step);
        successes = 0;
      }
    } else {
      step *= 0.5;
      successes = 0;
      if (step < amplitude * 1e-8) {
        report.flagged = true;
        report.flag_reason = "continuation step collapsed: " + sub.flag_reason;
        break;
      }
    }
  }

  BranchResult result;
  result.wave.grid = grid;
  result.wave.w = w;
  result.wave.lambda = lambda;
  result.wave.density_id = density.id;
  if (options.newton.penalization) result.wave.penalization_s = options.newton.penalization->s;
  result.eigen = eigen;
  result.report = report;
  result.report.converged = reached >= amplitude * (1.0 - 1e-14) && !report.flagged;

  if (result.report.converged) {
    if (result.wave.sup_norm() < 1e-8) {
      result.report.flagged = true;
      result.report.flag_reason = "failed to leave the trivial branch";
    }
    const auto super = supercriticality_check(lambda, eigen);
    result.report.extras["lambda"] = lambda;
    result.report.extras["lambda_crit"] = eigen.lambda_crit;
    result.report.extras["supercritical_margin"] = super.margin;
    result.report.extras["margin_per_R43"] =
        super.margin / std::pow(amplitude, 4.0 / 3.0);
    result.report.extras["energy"] = wave_energy(disc, w);
    if (!super.supercritical) {
      result.report.flagged = true;
      result.report.flag_reason = "returned wave is not supercritical";
    }
  }
  return result;
}

ContinuationResult density_continuation(const WaveField& start, const RescaledDensity& rho_start,
                                        const RescaledDensity& rho_target, double lambda,
                                        int steps, const NewtonOptions& options) {
  if (steps < 1) throw InvalidArgumentError("density_continuation: steps must be >= 1");
  ContinuationResult result;
  result.wave = start;
  result.wave.lambda = lambda;
  result.wave.density_id = rho_target.id;

  for (int k = 1; k <= steps; ++k) {
    const double t = static_cast<double>(k) / steps;
    RescaledDensity blend = blend_densities(rho_start, rho_target, t);
    Discretization disc(start.grid, blend);
    SolveReport sub = newton_solve(disc, lambda, result.wave.w, options);
    result.report.iterations += sub.iterations;
    result.report.residual_history.insert(result.report.residual_history.end(),
                                          sub.residual_history.begin(),
                                          sub.residual_history.end());
    if (!sub.converged || sub.flagged) {
      result.report.flagged = true;
      char buf[64];
      std::snprintf(buf, sizeof(buf), "failed at homotopy t = %.6f", t);
      result.report.flag_reason = std::string(buf) +
                                  (sub.flag_reason.empty() ? "" : ": " + sub.flag_reason);
      return result;
    }
  }
  result.report.converged = true;

  // Lipschitz bookkeeping: wave and density deviations in sup norm.
  double wdiff = 0.0;
  for (std::size_t k = 0; k < start.w.size(); ++k)
    wdiff = std::max(wdiff, std::abs(result.wave.w[k] - start.w[k]));
  double rdiff = 0.0;
  const int samples = 2048;
  for (int k = 0; k <= samples; ++k) {
    const double z = -1.0 + static_cast<double>(k) / samples;
    for (Side side : {Side::Below, Side::Above})
      rdiff = std::max(rdiff,
                       std::abs(rho_target.value(z, side) - rho_start.value(z, side)));
  }
  result.report.extras["w_delta_sup"] = wdiff;
  result.report.extras["rho_delta_sup"] = rdiff;
  if (rdiff > 0.0) result.report.extras["lipschitz_ratio"] = wdiff / rdiff;
  return result;
}

bool DiagnosticsReport::all_asserted_passed() const {
  for (const auto& check : checks)
    if (check.asserted && !check.passed) return false;
  return true;
}

const DiagnosticCheck* DiagnosticsReport::find(const std::string& name) const {
  for (const auto& check : checks)
    if (check.name == name) return &check;
  return nullptr;
}

DiagnosticsReport diagnostics(const Discretization& disc, const WaveField& wave,
                              const EigenResult& eigen) {
  const StripGrid& grid = wave.grid;
  const auto& zeta = grid.zeta;
  const int nx = grid.nx, nz = grid.cells_z();
  const double dxi = grid.dxi();
  const std::vector<double>& w = wave.w;
  DiagnosticsReport report;

  // w_xi at nodes by centered differences.
  std::vector<double> v(grid.nodes(), 0.0);
  for (int j = 0; j <= nz; ++j)
    for (int i = 0; i < nx; ++i)
      v[grid.node(i, j)] =
          (w[grid.node(grid.wrap(i + 1), j)] - w[grid.node(grid.wrap(i - 1), j)]) /
          (2.0 * dxi);

  double int_v2 = 0.0, int_gradv2 = 0.0, int_gradw2 = 0.0;
  double sup_wx = 0.0, sup_wz = 0.0;
  for (int j = 0; j < nz; ++j) {
    const double dz = zeta[j + 1] - zeta[j];
    const double area = dxi * dz;
    for (int i = 0; i < nx; ++i) {
      const int ip = grid.wrap(i + 1);
      auto corners = [&](const std::vector<double>& f, double* c) {
        c[0] = f[grid.node(i, j)];
        c[1] = f[grid.node(ip, j)];
        c[2] = f[grid.node(i, j + 1)];
        c[3] = f[grid.node(ip, j + 1)];
      };
      double cw[4], cv[4];
      corners(w, cw);
      corners(v, cv);
      const double vgx = (cv[1] + cv[3] - cv[0] - cv[2]) / (2.0 * dxi);
      const double vgz = (cv[2] + cv[3] - cv[0] - cv[1]) / (2.0 * dz);
      const double wgx = (cw[1] + cw[3] - cw[0] - cw[2]) / (2.0 * dxi);
      const double wgz = (cw[2] + cw[3] - cw[0] - cw[1]) / (2.0 * dz);
      int_v2 += 0.25 * (cv[0] * cv[0] + cv[1] * cv[1] + cv[2] * cv[2] + cv[3] * cv[3]) * area;
      int_gradv2 += (vgx * vgx + vgz * vgz) * area;
      int_gradw2 += (wgx * wgx + wgz * wgz) * area;
      sup_wx = std::max(sup_wx, std::abs(wgx));
      sup_wz = std::max(sup_wz, std::abs(wgz));
    }
  }

  const double lambda = wave.lambda;
  const double c1 = 16.0 * lambda * lambda * disc.rho_bed() / disc.rho_surface();
  DiagnosticCheck grad_energy;
  grad_energy.name = "gradient_energy_bound";
  grad_energy.asserted = true;
  grad_energy.value = int_gradv2;
  grad_energy.threshold = c1 * int_v2 + 1e-12 * std::max(1.0, int_v2);
  grad_energy.passed = grad_energy.value <= grad_energy.threshold;
  grad_energy.detail = "int |grad w_xi|^2 vs C1 int |w_xi|^2, C1 = 16 l^2 rho(-1)/rho(0)";
  report.checks.push_back(grad_energy);

  DiagnosticCheck evenness;
  evenness.name = "evenness";
  evenness.asserted = true;
  evenness.threshold = 1e-9;
  double asym = 0.0;
  for (int j = 0; j <= nz; ++j)
    for (int i = 0; i < nx; ++i)
      asym = std::max(asym, std::abs(w[grid.node(i, j)] - w[grid.node(grid.wrap(-i), j)]));
  evenness.value = asym;
  evenness.passed = asym <= evenness.threshold;
  report.checks.push_back(evenness);

  DiagnosticCheck elevation;
  elevation.name = "elevation";
  elevation.asserted = true;
  elevation.threshold = -1e-9;
  double wmin = 0.0;
  for (double x : w) wmin = std::min(wmin, x);
  elevation.value = wmin;
  elevation.passed = wmin >= elevation.threshold;
  report.checks.push_back(elevation);

  DiagnosticCheck super;
  super.name = "supercritical";
  super.asserted = true;
  super.value = lambda;
  super.threshold = eigen.lambda_crit;
  super.passed = lambda < eigen.lambda_crit;
  super.detail = "lambda < lambda_crit";
  report.checks.push_back(super);

  const double energy_l2 = std::sqrt(int_gradw2);
  const double denom = std::max({energy_l2, energy_l2 * energy_l2, 1e-300});
  DiagnosticCheck ratio_x;
  ratio_x.name = "sup_wxi_over_energy";
  ratio_x.asserted = false;
  ratio_x.value = sup_wx / denom;
  report.checks.push_back(ratio_x);
  DiagnosticCheck ratio_z;
  ratio_z.name = "sup_wzeta_over_energy";
  ratio_z.asserted = false;
  ratio_z.value = sup_wz / denom;
  report.checks.push_back(ratio_z);

  // Monotone decay away from the crest, per row, and an exponential fit of the
  // surface-row tail.
  double worst_violation = 0.0;
  for (int j = 1; j <= nz; ++j) {
    for (int i = nx / 2; i + 1 < nx; ++i) {
      // indices nx/2..nx-1 run xi = 0 .. just below L/d
      const double a = w[grid.node(i, j)], b = w[grid.node(i + 1, j)];
      worst_violation = std::max(worst_violation, b - a);
    }
  }
  DiagnosticCheck decay;
  decay.name = "monotone_decay_violation";
  decay.asserted = false;
  decay.value = worst_violation;
  report.checks.push_back(decay);

  DiagnosticCheck rate;
  rate.name = "decay_rate_fit";
  rate.asserted = false;
  {
    double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
    int count = 0;
    const double wmax = wave.sup_norm();
    for (int i = nx / 2 + nx / 8; i < nx - nx / 8; ++i) {
      const double val = w[grid.node(i, nz)];
      if (val > 1e-12 * std::max(1.0, wmax)) {
        const double x = grid.xi(i), y = std::log(val);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
        ++count;
      }
    }
    rate.value = count >= 3 ? -(count * sxy - sx * sy) / (count * sxx - sx * sx) : 0.0;
  }
  report.checks.push_back(rate);
  return report;
}

}  // namespace stratwave
