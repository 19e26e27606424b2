#pragma once

// Shared density builders for the test suites. The random generator produces
// stable profiles by integrating a nonnegative slope density downward from
// rho(0) = 1, so positivity and monotonicity hold by construction.

#include <cmath>
#include <random>
#include <vector>

#include "stratwave/density.hpp"

namespace stratwave::testing {

inline DensityProfile constant_profile() {
  return DensityProfile({-1.0, 0.0}, {Piece{{1.0, 0.0, 0.0, 0.0}}});
}

// rho = 2 on [-1, -1/2], rho = 1 on [-1/2, 0].
inline DensityProfile two_layer_profile() {
  return DensityProfile({-1.0, -0.5, 0.0},
                        {Piece{{2.0, 0.0, 0.0, 0.0}}, Piece{{1.0, 0.0, 0.0, 0.0}}});
}

// rho(p) = 1 - delta p on [-1, 0].
inline DensityProfile linear_profile(double delta = 0.1) {
  return DensityProfile({-1.0, 0.0}, {Piece{{1.0, -delta, 0.0, 0.0}}});
}

// Piecewise cubic, positive, non-increasing, rho(0) = 1, with optional jumps.
inline DensityProfile random_stable_profile(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> layer_count(1, 4);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  const int layers = layer_count(rng);
  std::vector<double> breaks{-1.0};
  if (layers > 1) {
    std::vector<double> interior(layers - 1);
    for (double& b : interior) b = -0.05 - 0.9 * unit(rng);
    std::sort(interior.begin(), interior.end());
    double prev = -1.0;
    bool ok = true;
    for (double& b : interior) {
      b = std::min(std::max(b, prev + 0.04), -0.04);
      ok = ok && b > prev;
      prev = b;
    }
    if (!ok)
      for (std::size_t k = 0; k < interior.size(); ++k)
        interior[k] = -1.0 + static_cast<double>(k + 1) / layers;
    for (double b : interior) breaks.push_back(b);
  }
  breaks.push_back(0.0);

  std::vector<Piece> pieces(layers);
  double value_above = 1.0;  // value at the top of the current piece
  for (int i = layers - 1; i >= 0; --i) {
    const double qa = breaks[i], qb = breaks[i + 1];
    // Slope density m(s) = a (s - s0)^2 + b >= 0, so rho' = -m <= 0.
    const double a = 2.0 * unit(rng);
    const double b = 1.5 * unit(rng);
    const double s0 = qa + (qb - qa) * unit(rng);
    // rho(p) = value_above + M(qb) - M(p), M antiderivative of m.
    auto M0 = a / 3.0;  // cubic coefficient of M
    const double Mqb = M0 * std::pow(qb - s0, 3) + b * qb;
    Piece piece;
    piece.c[0] = value_above + Mqb + M0 * s0 * s0 * s0;
    piece.c[1] = -b - a * s0 * s0;
    piece.c[2] = a * s0;
    piece.c[3] = -M0;
    pieces[i] = piece;
    value_above = piece.eval(qa);
    if (i > 0 && unit(rng) < 0.6) value_above += unit(rng);  // stable jump downward
  }
  return DensityProfile(breaks, pieces);
}

}  // namespace stratwave::testing
