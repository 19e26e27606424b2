#pragma once

#include <vector>

#include "stratwave/density.hpp"

namespace stratwave {

// Symmetric tridiagonal quadratic form over the zeta rows with the bed row
// eliminated (unknowns are rows 1..nz).
struct SymTridiag {
  std::vector<double> diag;
  std::vector<double> off;  // off[i] couples unknowns i and i+1

  int size() const { return static_cast<int>(diag.size()); }
  double quad(const std::vector<double>& v) const;
  void axpy(double alpha, const SymTridiag& other);  // *this += alpha * other
};

// Linearization of the flow at the laminar state, reduced per Fourier
// wavenumber to a generalized tridiagonal pencil on the zeta grid.
struct RayleighProblem {
  std::vector<double> zeta_rows;  // -1 = z_0 < ... < z_nz = 0, interface-aligned
  RescaledDensity density;
  double half_period_ratio = 8.0;  // L/d

  static RayleighProblem with_resolution(const RescaledDensity& density,
                                         double half_period_ratio, int intervals);
  void validate() const;
};

struct RayleighForms {
  SymTridiag stiffness;  // int rho (v'^2 + kappa^2 v^2)
  SymTridiag mass;       // -int rho' v^2 + jump point masses + surface term
};

// kappa = k pi d / L for integer wavenumber k.
RayleighForms assemble_rayleigh(const RayleighProblem& problem, int wavenumber);

struct EigenResult {
  double lambda_crit = 0.0;
  double c_crit = 0.0;
  int wavenumber = 0;                // minimizing k
  std::vector<double> mode;          // nodal values on zeta_rows, bed included (0)
  std::vector<double> zeta_rows;
  int iterations = 0;
  double last_quotient = 0.0;
};

// Smallest generalized eigenvalue over wavenumbers k = 0,1,..., searched until
// kappa^2 alone rules out the tail; ties resolved toward smaller k.
EigenResult lambda_crit(const RayleighProblem& problem, const FlowParameters& params);

// Smallest eigenvalue of a single pencil K v = lambda M v (K SPD, M PSD != 0),
// by inertia bisection on the shifted tridiagonal factorization.
double smallest_pencil_eigenvalue(const SymTridiag& K, const SymTridiag& M,
                                  int max_steps = 200, int* steps_used = nullptr);

struct SupercriticalityCheck {
  bool supercritical;
  double margin;  // lambda_crit - lambda
};

SupercriticalityCheck supercriticality_check(double lambda, const EigenResult& result);

}  // namespace stratwave
