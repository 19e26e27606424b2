#include "stratwave/flux.hpp"

#include <cmath>

#include "stratwave/errors.hpp"

namespace stratwave {

FluxJet flux_f(double p1, double p2) {
  if (!(p2 > -1.0)) throw StagnationError("flux: p2 <= -1 (stagnation)");
  const double q = 1.0 + p2;
  FluxJet jet;
  jet.value = (p1 * p1 + p2 * p2) / (2.0 * q);
  jet.g1 = p1 / q;
  jet.g2 = (2.0 * p2 + p2 * p2 - p1 * p1) / (2.0 * q * q);
  jet.h11 = 1.0 / q;
  jet.h12 = -p1 / (q * q);
  jet.h22 = (1.0 + p1 * p1) / (q * q * q);
  return jet;
}

void PenalizationParams::validate() const {
  if (!(s > 0.0) || !(s < 1.0 / std::sqrt(2.0)))
    throw InvalidArgumentError("penalization: s must lie in (0, 1/sqrt(2))");
}

namespace {

// Smooth step: sigma(0) = 1, sigma(1) = 0, flat to all orders at both ends.
inline double bump_seed(double x) { return x > 0.0 ? std::exp(-1.0 / x) : 0.0; }
inline double bump_seed_d1(double x) {
  return x > 0.0 ? bump_seed(x) / (x * x) : 0.0;
}
inline double bump_seed_d2(double x) {
  return x > 0.0 ? bump_seed(x) * (1.0 - 2.0 * x) / (x * x * x * x) : 0.0;
}

struct StepJet {
  double v, d1, d2;
};

StepJet smooth_step(double u) {
  // sigma(u) = S(1-u) / (S(1-u) + S(u)) with S the exponential seed.
  if (u <= 0.0) return {1.0, 0.0, 0.0};
  if (u >= 1.0) return {0.0, 0.0, 0.0};
  const double A = bump_seed(1.0 - u), B = bump_seed(u);
  const double Ad = -bump_seed_d1(1.0 - u), Bd = bump_seed_d1(u);
  const double Add = bump_seed_d2(1.0 - u), Bdd = bump_seed_d2(u);
  const double D = A + B, Dd = Ad + Bd, Ddd = Add + Bdd;
  const double v = A / D;
  const double d1 = (Ad * D - A * Dd) / (D * D);
  const double d2 = (Add * D - A * Ddd) / (D * D) - 2.0 * Dd * (Ad * D - A * Dd) / (D * D * D);
  return {v, d1, d2};
}

}  // namespace

double cutoff_bump(double t) {
  const double a = std::abs(t);
  if (a <= 1.0) return 1.0;
  if (a >= 1.5) return 0.0;
  return smooth_step(2.0 * (a - 1.0)).v;
}

double cutoff_bump_d1(double t) {
  const double a = std::abs(t);
  if (a <= 1.0 || a >= 1.5) return 0.0;
  return std::copysign(2.0 * smooth_step(2.0 * (a - 1.0)).d1, t);
}

double cutoff_bump_d2(double t) {
  const double a = std::abs(t);
  if (a <= 1.0 || a >= 1.5) return 0.0;
  return 4.0 * smooth_step(2.0 * (a - 1.0)).d2;
}

FluxJet penalized_a(double p1, double p2, const PenalizationParams& params) {
  params.validate();
  const double s = params.s;
  const double r2 = p1 * p1 + p2 * p2;
  const double t = r2 / s;
  if (t <= 1.0) return flux_f(p1, p2);  // branches coincide exactly here
  FluxJet quad;
  quad.value = 0.5 * r2;
  quad.g1 = p1;
  quad.g2 = p2;
  quad.h11 = 1.0;
  quad.h12 = 0.0;
  quad.h22 = 1.0;
  if (t >= 1.5) return quad;

  // Blend region: a = q + Phi * (f - q) with Phi = Phi(|p|^2 / s).
  const FluxJet f = flux_f(p1, p2);
  const StepJet phi = smooth_step(2.0 * (t - 1.0));
  const double P = phi.v;
  const double Pd = 2.0 * phi.d1 / s;        // d Phi / d(r2)
  const double Pdd = 4.0 * phi.d2 / (s * s); // d^2 Phi / d(r2)^2
  const double g = f.value - quad.value;
  const double g1 = f.g1 - p1, g2 = f.g2 - p2;

  FluxJet jet;
  jet.value = quad.value + P * g;
  jet.g1 = p1 + Pd * 2.0 * p1 * g + P * g1;
  jet.g2 = p2 + Pd * 2.0 * p2 * g + P * g2;
  jet.h11 = 1.0 + Pdd * 4.0 * p1 * p1 * g + Pd * (2.0 * g + 4.0 * p1 * g1) +
            P * (f.h11 - 1.0);
  jet.h12 = Pdd * 4.0 * p1 * p2 * g + Pd * (2.0 * p1 * g2 + 2.0 * p2 * g1) + P * f.h12;
  jet.h22 = 1.0 + Pdd * 4.0 * p2 * p2 * g + Pd * (2.0 * g + 4.0 * p2 * g2) +
            P * (f.h22 - 1.0);
  return jet;
}

}  // namespace stratwave
