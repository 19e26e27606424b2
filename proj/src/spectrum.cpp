#include "stratwave/spectrum.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "stratwave/errors.hpp"
#include "stratwave/grid.hpp"
#include "stratwave/quadrature.hpp"

namespace stratwave {

double SymTridiag::quad(const std::vector<double>& v) const {
  double sum = 0.0;
  const int n = size();
  for (int i = 0; i < n; ++i) sum += diag[i] * v[i] * v[i];
  for (int i = 0; i + 1 < n; ++i) sum += 2.0 * off[i] * v[i] * v[i + 1];
  return sum;
}

void SymTridiag::axpy(double alpha, const SymTridiag& other) {
  for (int i = 0; i < size(); ++i) diag[i] += alpha * other.diag[i];
  for (std::size_t i = 0; i < off.size(); ++i) off[i] += alpha * other.off[i];
}

RayleighProblem RayleighProblem::with_resolution(const RescaledDensity& density,
                                                 double half_period_ratio, int intervals) {
  if (intervals < 8) throw InvalidArgumentError("rayleigh: need at least 8 intervals");
  RayleighProblem problem;
  problem.zeta_rows = build_zeta_rows(density.breakpoints, intervals, 1);
  problem.density = density;
  problem.half_period_ratio = half_period_ratio;
  return problem;
}

void RayleighProblem::validate() const {
  if (zeta_rows.size() < 3) throw InvalidArgumentError("rayleigh: too few rows");
  if (std::abs(zeta_rows.front() + 1.0) > 1e-12 || std::abs(zeta_rows.back()) > 1e-12)
    throw InvalidArgumentError("rayleigh: rows must span [-1, 0]");
  for (std::size_t j = 0; j + 1 < zeta_rows.size(); ++j)
    if (!(zeta_rows[j] < zeta_rows[j + 1]))
      throw InvalidArgumentError("rayleigh: rows must be strictly increasing");
  for (double b : density.breakpoints) {
    bool found = false;
    for (double z : zeta_rows)
      if (std::abs(z - b) <= 1e-12) {
        found = true;
        break;
      }
    if (!found) throw InvalidArgumentError("rayleigh: grid not interface-aligned");
  }
}

namespace {

struct PencilParts {
  SymTridiag gradient;   // int rho v'^2
  SymTridiag weight;     // int rho v^2  (kappa^2 multiplier)
  SymTridiag mass;       // -int rho' v^2 + jumps + surface
};

PencilParts assemble_parts(const RayleighProblem& problem) {
  const auto& rows = problem.zeta_rows;
  const int nz = static_cast<int>(rows.size()) - 1;  // unknowns: rows 1..nz
  PencilParts parts;
  parts.gradient.diag.assign(nz, 0.0);
  parts.gradient.off.assign(nz - 1, 0.0);
  parts.weight = parts.gradient;
  parts.mass = parts.gradient;

  const GaussRule& rule = gauss_legendre(8);
  for (int e = 0; e < nz; ++e) {
    const double za = rows[e], zb = rows[e + 1];
    const double h = zb - za;
    // Local (value, slope) quadratures of rho against products of hats.
    double rho_int = 0.0;
    double m00 = 0.0, m01 = 0.0, m11 = 0.0;   // int rho phi_a phi_b
    double s00 = 0.0, s01 = 0.0, s11 = 0.0;   // int rho' phi_a phi_b
    for (std::size_t q = 0; q < rule.nodes.size(); ++q) {
      const double z = 0.5 * (za + zb) + 0.5 * h * rule.nodes[q];
      const double wq = 0.5 * h * rule.weights[q];
      const double r = problem.density.value(z, Side::Below);
      const double rp = problem.density.slope(z, Side::Below);
      const double pa = (zb - z) / h, pb = (z - za) / h;
      rho_int += wq * r;
      m00 += wq * r * pa * pa;
      m01 += wq * r * pa * pb;
      m11 += wq * r * pb * pb;
      s00 += wq * rp * pa * pa;
      s01 += wq * rp * pa * pb;
      s11 += wq * rp * pb * pb;
    }
    const int ia = e - 1, ib = e;  // unknown indices of rows e, e+1 (row 0 eliminated)
    const double k = rho_int / (h * h);
    if (ia >= 0) {
      parts.gradient.diag[ia] += k;
      parts.gradient.off[ia] += -k;
      parts.weight.diag[ia] += m00;
      parts.weight.off[ia] += m01;
      parts.mass.diag[ia] += -s00;
      parts.mass.off[ia] += -s01;
    }
    parts.gradient.diag[ib] += k;
    parts.weight.diag[ib] += m11;
    parts.mass.diag[ib] += -s11;
  }
  // Interface point masses [rho] v(z_i)^2 and the surface term rho(0) v(0)^2.
  for (double b : problem.density.breakpoints) {
    if (b <= -1.0 + 1e-12 || b >= -1e-12) continue;
    int row = -1;
    for (int j = 1; j < nz; ++j)
      if (std::abs(rows[j] - b) <= 1e-12) row = j;
    if (row < 0) throw InvalidArgumentError("rayleigh: breakpoint not on a row");
    parts.mass.diag[row - 1] += problem.density.jump_at(b);
  }
  parts.mass.diag[nz - 1] += problem.density.at_surface();
  return parts;
}

int negative_inertia(const SymTridiag& K, const SymTridiag& M, double lambda) {
  const int n = K.size();
  int count = 0;
  double t = 0.0;
  for (int i = 0; i < n; ++i) {
    double a = K.diag[i] - lambda * M.diag[i];
    if (i > 0) {
      const double b = K.off[i - 1] - lambda * M.off[i - 1];
      a -= b * b / t;
    }
    if (std::abs(a) < 1e-300) a = -1e-300;
    if (a < 0.0) ++count;
    t = a;
  }
  return count;
}

// Thomas solve of (K - sigma M) x = rhs; valid while the shift keeps it SPD.
std::vector<double> shifted_solve(const SymTridiag& K, const SymTridiag& M, double sigma,
                                  std::vector<double> rhs) {
  const int n = K.size();
  std::vector<double> d(n), e(n > 1 ? n - 1 : 0);
  for (int i = 0; i < n; ++i) d[i] = K.diag[i] - sigma * M.diag[i];
  for (int i = 0; i + 1 < n; ++i) e[i] = K.off[i] - sigma * M.off[i];
  for (int i = 1; i < n; ++i) {
    const double m = e[i - 1] / d[i - 1];
    d[i] -= m * e[i - 1];
    rhs[i] -= m * rhs[i - 1];
  }
  rhs[n - 1] /= d[n - 1];
  for (int i = n - 2; i >= 0; --i) rhs[i] = (rhs[i] - e[i] * rhs[i + 1]) / d[i];
  return rhs;
}

std::vector<double> mat_vec(const SymTridiag& A, const std::vector<double>& v) {
  const int n = A.size();
  std::vector<double> out(n, 0.0);
  for (int i = 0; i < n; ++i) {
    out[i] = A.diag[i] * v[i];
    if (i > 0) out[i] += A.off[i - 1] * v[i - 1];
    if (i + 1 < n) out[i] += A.off[i] * v[i + 1];
  }
  return out;
}

}  // namespace

RayleighForms assemble_rayleigh(const RayleighProblem& problem, int wavenumber) {
  problem.validate();
  PencilParts parts = assemble_parts(problem);
  const double kappa = wavenumber * M_PI / problem.half_period_ratio;
  RayleighForms forms;
  forms.stiffness = parts.gradient;
  forms.stiffness.axpy(kappa * kappa, parts.weight);
  forms.mass = parts.mass;
  return forms;
}

double smallest_pencil_eigenvalue(const SymTridiag& K, const SymTridiag& M, int max_steps,
                                  int* steps_used) {
  if (negative_inertia(K, M, 0.0) != 0)
    throw InvalidArgumentError("pencil: stiffness form is not positive definite");
  double lo = 0.0, hi = 1.0;
  int steps = 0;
  while (negative_inertia(K, M, hi) < 1) {
    hi *= 2.0;
    if (++steps > 120)
      throw ConvergenceError("pencil: no finite eigenvalue below 2^120");
  }
  while (hi - lo > 1e-10 * std::max(hi, 1e-30)) {
    if (++steps > max_steps) {
      char buf[64];
      std::snprintf(buf, sizeof(buf), "%.17g", 0.5 * (lo + hi));
      throw ConvergenceError(std::string("pencil: bisection exceeded step limit, last quotient ") +
                             buf);
    }
    const double mid = 0.5 * (lo + hi);
    if (negative_inertia(K, M, mid) >= 1)
      hi = mid;
    else
      lo = mid;
  }
  if (steps_used) *steps_used = steps;
  return 0.5 * (lo + hi);
}

EigenResult lambda_crit(const RayleighProblem& problem, const FlowParameters& params) {
  problem.validate();
  params.validate();
  PencilParts parts = assemble_parts(problem);
  const double ell = problem.half_period_ratio;

  // Lower bound multiplier: quotient(kappa) >= kappa^2 * min_v weight/mass.
  const double m0 = smallest_pencil_eigenvalue(parts.weight, parts.mass);

  EigenResult best;
  best.lambda_crit = 0.0;
  int total_steps = 0;
  bool have = false;
  for (int k = 0; k <= 1000; ++k) {
    const double kappa = k * M_PI / ell;
    if (have && kappa * kappa * m0 > best.lambda_crit &&
        kappa * kappa > 10.0 * best.lambda_crit)
      break;
    SymTridiag K = parts.gradient;
    K.axpy(kappa * kappa, parts.weight);
    int steps = 0;
    const double lam = smallest_pencil_eigenvalue(K, parts.mass, 200, &steps);
    total_steps += steps;
    if (!have || lam < best.lambda_crit) {
      have = true;
      best.lambda_crit = lam;
      best.wavenumber = k;
      // Inverse iteration just below the eigenvalue; M is only PSD, so seed
      // with a vector that meets the mass form.
      const int n = K.size();
      std::vector<double> x(n, 1.0);
      const double sigma = lam * (1.0 - 1e-8) - 1e-14;
      for (int it = 0; it < 6; ++it) {
        std::vector<double> rhs = mat_vec(parts.mass, x);
        x = shifted_solve(K, parts.mass, sigma, rhs);
        double norm = 0.0;
        for (double v : x) norm = std::max(norm, std::abs(v));
        for (double& v : x) v /= norm;
      }
      const double mnorm = parts.mass.quad(x);
      if (mnorm > 0.0)
        for (double& v : x) v /= std::sqrt(mnorm);
      if (x[n - 1] < 0.0 || (std::abs(x[n - 1]) < 1e-12 &&
                             *std::max_element(x.begin(), x.end()) <
                                 -*std::min_element(x.begin(), x.end())))
        for (double& v : x) v = -v;
      best.mode.assign(problem.zeta_rows.size(), 0.0);
      for (int j = 0; j < n; ++j) best.mode[j + 1] = x[j];
    }
  }
  best.zeta_rows = problem.zeta_rows;
  best.iterations = total_steps;
  best.last_quotient = best.lambda_crit;
  best.c_crit = std::sqrt(params.g * params.d / best.lambda_crit);
  if (!(best.lambda_crit > 0.0)) throw ConvergenceError("lambda_crit: nonpositive eigenvalue");
  return best;
}

SupercriticalityCheck supercriticality_check(double lambda, const EigenResult& result) {
  return SupercriticalityCheck{lambda < result.lambda_crit, result.lambda_crit - lambda};
}

}  // namespace stratwave
