#include <doctest.h>

#include <cmath>
#include <random>

#include "common/test_profiles.hpp"
#include "stratwave/spectrum.hpp"

using namespace stratwave;
using testing::constant_profile;
using testing::linear_profile;
using testing::two_layer_profile;

namespace {

const FlowParameters kUnit{1.0, 1.0, 8.0, 0.0};

// Closed-form smallest eigenvalue of the two-degree-of-freedom reduction for a
// piecewise-constant two-layer density at wavenumber zero: piecewise-linear
// trial functions with nodes at the interface and the surface.
double two_layer_closed_form(double rho_lo, double rho_up, double z_interface) {
  const double l1 = z_interface + 1.0;
  const double l2 = -z_interface;
  const double k11 = rho_lo / l1 + rho_up / l2;
  const double k12 = -rho_up / l2;
  const double k22 = rho_up / l2;
  const double m1 = rho_lo - rho_up;
  const double m2 = rho_up;  // rho at the surface
  // det(K - lambda M) = 0 with M = diag(m1, m2).
  const double a = m1 * m2;
  const double b = -(k11 * m2 + k22 * m1);
  const double c = k11 * k22 - k12 * k12;
  return (-b - std::sqrt(b * b - 4.0 * a * c)) / (2.0 * a);
}

}  // namespace

TEST_CASE("rayleigh forms: constant density has a single boundary mass entry") {
  auto scaled = rescale_density(constant_profile(), kUnit);
  RayleighProblem problem = RayleighProblem::with_resolution(scaled, 8.0, 16);
  RayleighForms forms = assemble_rayleigh(problem, 0);
  const int n = forms.mass.size();
  for (int i = 0; i + 1 < n; ++i) {
    CHECK(std::abs(forms.mass.diag[i]) <= 1e-14);
    CHECK(std::abs(forms.mass.off[i]) <= 1e-14);
  }
  CHECK(forms.mass.diag[n - 1] == doctest::Approx(1.0).epsilon(1e-13));

  // kappa^2 term appears for k = 1.
  RayleighForms forms1 = assemble_rayleigh(problem, 1);
  CHECK(forms1.stiffness.diag[0] > forms.stiffness.diag[0]);
}

TEST_CASE("lambda_crit: constant density equals 1 exactly in the discrete space") {
  auto scaled = rescale_density(constant_profile(), kUnit);
  for (int M : {16, 64}) {
    RayleighProblem problem = RayleighProblem::with_resolution(scaled, 8.0, M);
    EigenResult result = lambda_crit(problem, kUnit);
    CHECK(std::abs(result.lambda_crit - 1.0) <= 1e-11);
    CHECK(result.wavenumber == 0);
    CHECK(result.c_crit == doctest::Approx(1.0).epsilon(1e-10));
    // Minimizing mode is the linear profile 1 + zeta (up to normalization).
    const double scale = result.mode.back();
    REQUIRE(scale > 0.0);
    for (std::size_t j = 0; j < result.zeta_rows.size(); ++j)
      CHECK(result.mode[j] / scale ==
            doctest::Approx(1.0 + result.zeta_rows[j]).epsilon(1e-8));
  }
}

TEST_CASE("lambda_crit: grid self-convergence at second order") {
  // Constant density is exact at every resolution.
  auto flat = rescale_density(constant_profile(), kUnit);
  double lam16 = lambda_crit(RayleighProblem::with_resolution(flat, 8.0, 16), kUnit).lambda_crit;
  double lam32 = lambda_crit(RayleighProblem::with_resolution(flat, 8.0, 32), kUnit).lambda_crit;
  CHECK(std::abs(lam32 - lam16) <= 1.0 / (16.0 * 16.0));

  // Smooth stratification: eigenvalue differences shrink by about 4x.
  auto lin = rescale_density(linear_profile(0.4), kUnit);
  double a = lambda_crit(RayleighProblem::with_resolution(lin, 8.0, 16), kUnit).lambda_crit;
  double b = lambda_crit(RayleighProblem::with_resolution(lin, 8.0, 32), kUnit).lambda_crit;
  double c = lambda_crit(RayleighProblem::with_resolution(lin, 8.0, 64), kUnit).lambda_crit;
  CHECK(std::abs(b - c) <= std::abs(a - b) / 3.0);
}

TEST_CASE("lambda_crit: two-layer closed form") {
  auto two = two_layer_profile();
  auto scaled = rescale_density(two, kUnit);
  const double z1 = scaled.breakpoints[1];
  const double oracle = two_layer_closed_form(2.0, 1.0, z1);
  for (int M : {32, 64, 128}) {
    RayleighProblem problem = RayleighProblem::with_resolution(scaled, 8.0, M);
    EigenResult result = lambda_crit(problem, kUnit);
    CHECK(std::abs(result.lambda_crit - oracle) <= 1e-6);
  }
}

TEST_CASE("pencil eigenvalues are nondecreasing in the wavenumber") {
  auto scaled = rescale_density(two_layer_profile(), kUnit);
  RayleighProblem problem = RayleighProblem::with_resolution(scaled, 8.0, 48);
  double prev = -1.0;
  for (int k = 0; k <= 4; ++k) {
    RayleighForms forms = assemble_rayleigh(problem, k);
    const double lam = smallest_pencil_eigenvalue(forms.stiffness, forms.mass);
    CHECK(lam >= prev - 1e-12);
    prev = lam;
  }
}

TEST_CASE("discrete min-max: any admissible trial beats nothing") {
  auto scaled = rescale_density(two_layer_profile(), kUnit);
  RayleighProblem problem = RayleighProblem::with_resolution(scaled, 8.0, 40);
  EigenResult result = lambda_crit(problem, kUnit);
  RayleighForms forms = assemble_rayleigh(problem, 0);
  std::mt19937_64 rng(3u);
  std::normal_distribution<double> gauss;
  for (int trial = 0; trial < 40; ++trial) {
    std::vector<double> v(forms.stiffness.size());
    for (double& x : v) x = gauss(rng);
    const double denom = forms.mass.quad(v);
    if (denom <= 1e-12) continue;
    const double quotient = forms.stiffness.quad(v) / denom;
    CHECK(quotient >= result.lambda_crit - 1e-10);
  }
  // The returned mode attains the minimum and meets its normalization.
  std::vector<double> mode_inner(result.mode.begin() + 1, result.mode.end());
  CHECK(forms.mass.quad(mode_inner) == doctest::Approx(1.0).epsilon(1e-8));
  CHECK(forms.stiffness.quad(mode_inner) ==
        doctest::Approx(result.lambda_crit).epsilon(1e-8));
}

TEST_CASE("splitting a constant layer leaves lambda_crit unchanged") {
  auto base = rescale_density(two_layer_profile(), kUnit);
  DensityProfile split({-1.0, -0.75, -0.5, 0.0},
                       {Piece{{2.0, 0.0, 0.0, 0.0}}, Piece{{2.0, 0.0, 0.0, 0.0}},
                        Piece{{1.0, 0.0, 0.0, 0.0}}});
  auto scaled_split = rescale_density(split, kUnit);
  const double a =
      lambda_crit(RayleighProblem::with_resolution(base, 8.0, 64), kUnit).lambda_crit;
  const double b =
      lambda_crit(RayleighProblem::with_resolution(scaled_split, 8.0, 64), kUnit).lambda_crit;
  CHECK(std::abs(a - b) <= 1e-10);
}

TEST_CASE("supercriticality check") {
  EigenResult eigen;
  eigen.lambda_crit = 1.0;
  auto yes = supercriticality_check(0.5, eigen);
  CHECK(yes.supercritical);
  CHECK(yes.margin == doctest::Approx(0.5));
  auto boundary = supercriticality_check(1.0, eigen);
  CHECK_FALSE(boundary.supercritical);
  CHECK(boundary.margin == doctest::Approx(0.0));
}
