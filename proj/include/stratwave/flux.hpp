#pragma once

#include <optional>

namespace stratwave {

// Value, gradient, and Hessian of a scalar flux density at one gradient state.
struct FluxJet {
  double value = 0.0;
  double g1 = 0.0, g2 = 0.0;
  double h11 = 0.0, h12 = 0.0, h22 = 0.0;
};

// f(p1, p2) = (p1^2 + p2^2) / (2 (1 + p2)), defined for p2 > -1.
FluxJet flux_f(double p1, double p2);

struct PenalizationParams {
  double s = 0.25;  // cutoff scale, must lie in (0, 1/sqrt(2))
  void validate() const;
};

// Smooth C^inf cutoff: 1 on [-1, 1], supported in (-3/2, 3/2).
double cutoff_bump(double t);
double cutoff_bump_d1(double t);
double cutoff_bump_d2(double t);

// a(p; s) = Phi(|p|^2 / s) f(p) + (1 - Phi(|p|^2 / s)) |p|^2 / 2.
// Coincides with f exactly for |p|^2 <= s and with |p|^2/2 for |p|^2 >= 3s/2,
// and is defined on the whole plane.
FluxJet penalized_a(double p1, double p2, const PenalizationParams& params);

// Flux density used by the discrete operator: physical f, or the penalized a.
struct FluxModel {
  std::optional<PenalizationParams> penalization;

  FluxJet eval(double p1, double p2) const {
    return penalization ? penalized_a(p1, p2, *penalization) : flux_f(p1, p2);
  }
};

}  // namespace stratwave
