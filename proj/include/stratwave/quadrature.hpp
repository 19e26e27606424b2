#pragma once

#include <functional>
#include <vector>

namespace stratwave {

struct GaussRule {
  std::vector<double> nodes;    // on [-1, 1]
  std::vector<double> weights;  // sum to 2
};

// Gauss-Legendre rule with n points, exact for polynomials of degree 2n-1.
const GaussRule& gauss_legendre(int n);

// Integral of f over [a, b] with an n-point Gauss-Legendre rule.
double integrate(const std::function<double(double)>& f, double a, double b, int n = 16);

}  // namespace stratwave
