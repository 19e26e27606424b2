#include <doctest.h>

#include <cmath>
#include <functional>

#include "common/mms.hpp"
#include "common/test_profiles.hpp"
#include "stratwave/errors.hpp"
#include "stratwave/experiments.hpp"
#include "stratwave/fields.hpp"

using namespace stratwave;
using testing::constant_profile;
using testing::linear_profile;
using testing::two_layer_profile;

namespace {

const FlowParameters kUnit{1.0, 1.0, 8.0, 0.0};

double simpson(const std::function<double(double)>& f, double a, double b, int n) {
  double sum = f(a) + f(b);
  const double h = (b - a) / n;
  for (int k = 1; k < n; ++k) sum += (k % 2 ? 4.0 : 2.0) * f(a + k * h);
  return sum * h / 3.0;
}

}  // namespace

TEST_CASE("laminar constant density: heights, velocities, stream function, pressure") {
  auto rho = constant_profile();
  WaveField laminar = laminar_wave(rho, kUnit, 16, 12);
  HeightField height = w_to_height(laminar, rho, kUnit);

  for (int j = 0; j < height.np(); ++j)
    for (int i = 0; i < height.nq(); ++i)
      CHECK(height.at(i, j) == doctest::Approx(height.p[j] + 1.0).epsilon(1e-13));

  EulerianFields fields = height_to_velocity(height, rho, kUnit);
  for (const auto& block : fields.layers)
    for (const auto& s : block.samples) {
      CHECK(std::abs(s.u) <= 1e-12);
      CHECK(std::abs(s.v) <= 1e-12);
    }
  for (double e : fields.eta) CHECK(std::abs(e) <= 1e-13);

  // Mass flux equals p0 for every column.
  for (double f : column_mass_flux(fields, rho, kUnit)) CHECK(f == doctest::Approx(-1.0));

  // psi(y) = -y down the column, bed value -p0 = 1.
  StreamfunctionColumn col = reconstruct_streamfunction(height, rho, kUnit, 0.0);
  CHECK(std::abs(col.bed_value - 1.0) <= 1e-8);
  CHECK(col.max_identity_error <= 1e-8);
  for (std::size_t k = 0; k < col.y.size(); ++k)
    CHECK(col.psi[k] == doctest::Approx(-col.y[k]).epsilon(1e-9));

  // Hydrostatic closure: P = -g y = -p.
  BernoulliData bdata(rho, kUnit);
  PressureField pressure = pressure_field(height, rho, kUnit, bdata);
  for (const auto& block : pressure.layers)
    for (int j = block.row_begin; j <= block.row_end; ++j)
      for (int i = 0; i < height.nq(); ++i)
        CHECK(std::abs(block.P[(j - block.row_begin) * height.nq() + i] -
                       (-pressure.p[j])) <= 1e-10);
  CHECK(pressure.surface_error <= 1e-12);
  for (double pb : bed_pressure_trace(pressure)) CHECK(pb == doctest::Approx(1.0));
}

TEST_CASE("round trip w -> h -> w") {
  auto rho = two_layer_profile();
  WaveField laminar = laminar_wave(rho, kUnit, 16, 14);
  // Laminar, manufactured, and perturbed fields all round-trip.
  auto mms = testing::mms_curved(0.05, 8.0);
  WaveField curved = laminar;
  curved.w = testing::sample_nodes(mms, laminar.grid);
  for (WaveField* wave : {&laminar, &curved}) {
    HeightField height = w_to_height(*wave, rho, kUnit);
    WaveField back = height_to_w(height, rho, kUnit);
    double err = 0.0;
    for (std::size_t k = 0; k < wave->w.size(); ++k)
      err = std::max(err, std::abs(back.w[k] - wave->w[k]));
    CHECK(err <= 1e-12);
  }
}

TEST_CASE("height_to_w rejects stagnant columns") {
  auto rho = constant_profile();
  WaveField laminar = laminar_wave(rho, kUnit, 16, 12);
  HeightField height = w_to_height(laminar, rho, kUnit);
  height.at(2, 5) = height.at(2, 4) - 0.01;  // h no longer increasing in p
  CHECK_THROWS_AS(height_to_w(height, rho, kUnit), StagnationError);
}

TEST_CASE("laminar two-layer pressure: hydrostatic, continuous at the interface") {
  auto rho = two_layer_profile();
  WaveField laminar = laminar_wave(rho, kUnit, 16, 16);
  HeightField height = w_to_height(laminar, rho, kUnit);
  BernoulliData bdata(rho, kUnit);
  PressureField pressure = pressure_field(height, rho, kUnit, bdata);

  const double y1 = limiting_height(rho, kUnit, -0.5) - 1.0;  // interface depth
  // Hydrostatic: P = -y above the interface, P = y1 - 2y below it.
  for (const auto& block : pressure.layers)
    for (int j = block.row_begin; j <= block.row_end; ++j)
      for (int i = 0; i < height.nq(); ++i) {
        const double y = height.at(i, j) - 1.0;
        const double expect = y >= y1 - 1e-14 ? -y : y1 - 2.0 * y;
        CHECK(std::abs(block.P[(j - block.row_begin) * height.nq() + i] - expect) <= 1e-10);
      }
  CHECK(pressure.max_interface_jump <= 1e-12);
  CHECK(pressure.surface_error <= 1e-12);
  // Bed pressure equals the full water column weight: y1 + 2 (|y1| ... ) = sqrt(2).
  for (double pb : bed_pressure_trace(pressure))
    CHECK(pb == doctest::Approx(std::sqrt(2.0)).epsilon(1e-12));
}

TEST_CASE("laminar smooth stratification: pressure matches the hydrostatic oracle") {
  auto rho = linear_profile(0.1);
  WaveField laminar = laminar_wave(rho, kUnit, 16, 128);
  HeightField height = w_to_height(laminar, rho, kUnit);
  BernoulliData bdata(rho, kUnit);
  PressureField pressure = pressure_field(height, rho, kUnit, bdata);
  // P(p) = g int_p^0 rho(s) hcheck'(s) ds with hcheck' = 1/(c sqrt(rho)),
  // evaluated by an independent Simpson rule.
  const double c = wave_speed(rho, kUnit);
  auto integrand = [&](double s) { return std::sqrt(rho.value(s, Side::Below)) / c; };
  const auto& block = pressure.layers.front();
  for (int j = block.row_begin; j <= block.row_end; ++j) {
    const double expect = simpson(integrand, pressure.p[j], 0.0, 2000);
    CHECK(std::abs(block.P[(j - block.row_begin) * height.nq()] - expect) <= 1e-6);
  }
}

TEST_CASE("solved wave: surface pressure, symmetry, flux, stream function") {
  auto rho = two_layer_profile();
  auto scaled = rescale_density(rho, kUnit);
  StripGrid grid = StripGrid::build(8.0, 16, 20, scaled.breakpoints);
  BranchResult result = branch_continuation(grid, scaled, kUnit, 0.05);
  REQUIRE(result.report.converged);

  HeightField height = w_to_height(result.wave, rho, kUnit);
  EulerianFields fields = height_to_velocity(height, rho, kUnit);
  // Crest-line symmetry: v = 0 on xi = 0 (column nx/2).
  const int crest = grid.nx / 2;
  for (const auto& block : fields.layers)
    for (int j = block.row_begin; j <= block.row_end; ++j)
      CHECK(std::abs(block.samples[(j - block.row_begin) * grid.nx + crest].v) <= 1e-9);

  for (double f : column_mass_flux(fields, rho, kUnit))
    CHECK(std::abs(f - rho.p0()) <= 1e-9);  // columnwise constant flow: trapezoid exact

  BernoulliData bdata(rho, kUnit);
  PressureField pressure = pressure_field(height, rho, kUnit, bdata);
  CHECK(pressure.surface_error <= 1e-9);
  CHECK(pressure.max_interface_jump <= 1e-8 * pressure.sup_abs);
  // Bed trace is even in q.
  const auto bed = bed_pressure_trace(pressure);
  for (int i = 0; i < grid.nx; ++i)
    CHECK(std::abs(bed[i] - bed[(grid.nx - i) % grid.nx]) <= 1e-9);

  StreamfunctionColumn col = reconstruct_streamfunction(height, rho, kUnit, 0.0);
  CHECK(std::abs(col.bed_value - 1.0) <= 1e-8);
  CHECK(col.max_identity_error <= 1e-8);
}

TEST_CASE("reconstructed stream function satisfies the interior vorticity balance") {
  // psi_yy - g y rho'(-psi) + beta(psi) -> 0 under lattice refinement; the
  // wave is laterally uniform so the x-derivatives vanish.
  auto rho = linear_profile(0.1);
  WaveField laminar = laminar_wave(rho, kUnit, 16, 192);
  HeightField height = w_to_height(laminar, rho, kUnit);
  BernoulliData bdata(rho, kUnit);

  auto residual_sup = [&](int lattice) {
    const double y_bot = -0.95, y_top = height.at(0, height.np() - 1) - 1.0 - 0.05;
    std::vector<double> targets(lattice + 1);
    for (int k = 0; k <= lattice; ++k)
      targets[k] = y_bot + (y_top - y_bot) * k / lattice;
    StreamfunctionColumn col =
        reconstruct_streamfunction(height, rho, kUnit, 0.0, targets);
    // Pick psi at the exact targets.
    std::vector<double> psi(targets.size(), 0.0);
    for (std::size_t k = 0; k < targets.size(); ++k) {
      bool found = false;
      for (std::size_t m = 0; m < col.y.size(); ++m)
        if (std::abs(col.y[m] - targets[k]) <= 1e-12) {
          psi[k] = col.psi[m];
          found = true;
        }
      REQUIRE(found);
    }
    const double dy = (y_top - y_bot) / lattice;
    double worst = 0.0;
    for (int k = 1; k < lattice; ++k) {
      const double psi_yy = (psi[k + 1] - 2.0 * psi[k] + psi[k - 1]) / (dy * dy);
      const double y = targets[k];
      const double res =
          psi_yy - kUnit.g * y * rho.slope(-psi[k], Side::Below) + bdata.beta(-psi[k]);
      worst = std::max(worst, std::abs(res));
    }
    return worst;
  };
  const double coarse = residual_sup(24);
  const double fine = residual_sup(48);
  CHECK(fine <= coarse / 2.5);

  // The same balance stays small for a genuinely solved wave.
  auto scaled = rescale_density(rho, kUnit);
  StripGrid grid = StripGrid::build(8.0, 16, 96, scaled.breakpoints);
  BranchResult result = branch_continuation(grid, scaled, kUnit, 0.04);
  REQUIRE(result.report.converged);
  HeightField solved_height = w_to_height(result.wave, rho, kUnit);
  std::vector<double> targets(25);
  const double y_top = solved_height.at(0, solved_height.np() - 1) - 1.0 - 0.05;
  for (int k = 0; k <= 24; ++k) targets[k] = -0.95 + (y_top + 0.95) * k / 24.0;
  StreamfunctionColumn col =
      reconstruct_streamfunction(solved_height, rho, kUnit, 0.0, targets);
  const double dy = targets[1] - targets[0];
  double worst = 0.0;
  for (int k = 1; k < 24; ++k) {
    double psi_km = 0, psi_k = 0, psi_kp = 0;
    for (std::size_t m = 0; m < col.y.size(); ++m) {
      if (std::abs(col.y[m] - targets[k - 1]) <= 1e-12) psi_km = col.psi[m];
      if (std::abs(col.y[m] - targets[k]) <= 1e-12) psi_k = col.psi[m];
      if (std::abs(col.y[m] - targets[k + 1]) <= 1e-12) psi_kp = col.psi[m];
    }
    const double psi_yy = (psi_kp - 2.0 * psi_k + psi_km) / (dy * dy);
    const double res = psi_yy - kUnit.g * targets[k] * rho.slope(-psi_k, Side::Below) +
                       bdata.beta(-psi_k);
    worst = std::max(worst, std::abs(res));
  }
  CHECK(worst <= 2e-2);
}
