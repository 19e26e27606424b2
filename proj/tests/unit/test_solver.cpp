#include <doctest.h>

#include <cmath>
#include <random>

#include "common/mms.hpp"
#include "common/test_profiles.hpp"
#include "stratwave/errors.hpp"
#include "stratwave/solver.hpp"

using namespace stratwave;
using testing::constant_profile;
using testing::linear_profile;
using testing::mms_curved;
using testing::mms_source;
using testing::random_stable_profile;
using testing::sample_nodes;
using testing::two_layer_profile;

namespace {

const FlowParameters kUnit{1.0, 1.0, 8.0, 0.0};

double sup(const std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

// Exact amplitude and Richardson number of the laterally uniform branch for
// constant density: w = A (1 + zeta) with 2 (L/d) A^2/(1+A) = R^2 and
// lambda = (2 + A) / (2 (1 + A)^2).
struct FlatBranch {
  double A, lambda;
};
FlatBranch flat_branch_oracle(double R, double ell) {
  const double q = R * R / (2.0 * ell);
  const double A = 0.5 * (q + std::sqrt(q * q + 4.0 * q));
  return {A, (2.0 + A) / (2.0 * (1.0 + A) * (1.0 + A))};
}

}  // namespace

TEST_CASE("trivial branch: residual vanishes identically") {
  std::mt19937_64 rng(17u);
  std::uniform_real_distribution<double> lam(0.1, 2.0);
  for (int trial = 0; trial < 20; ++trial) {
    auto rho = random_stable_profile(rng);
    auto scaled = rescale_density(rho, kUnit);
    StripGrid grid = StripGrid::build(8.0, 16, 14, scaled.breakpoints);
    Discretization disc(grid, scaled);
    std::vector<double> w(grid.nodes(), 0.0);
    FluxModel flux;
    CHECK(sup(residual(disc, lam(rng), w, flux)) == 0.0);
    FluxModel penalized;
    penalized.penalization = PenalizationParams{0.25};
    CHECK(sup(residual(disc, lam(rng), w, penalized)) == 0.0);
  }
}

TEST_CASE("residual consistency: manufactured solution, second order") {
  auto scaled = rescale_density(constant_profile(), kUnit);
  auto mms = mms_curved(0.08, 8.0);
  const double lambda = 0.5;
  std::vector<double> errors, spacings;
  for (int lvl = 0; lvl < 3; ++lvl) {
    const int nx = 16 << lvl, nz = 8 << lvl;
    StripGrid grid = StripGrid::build(8.0, nx, nz, scaled.breakpoints);
    Discretization disc(grid, scaled);
    SourceTerm source = mms_source(mms, grid, lambda);
    std::vector<double> w = sample_nodes(mms, grid);
    FluxModel flux;
    errors.push_back(sup(residual(disc, lambda, w, flux, &source)));
    spacings.push_back(1.0 / nz);
  }
  for (std::size_t k = 0; k + 1 < errors.size(); ++k)
    CHECK(errors[k + 1] <= errors[k] / 3.4);
}

TEST_CASE("jacobian matches finite differences of the residual") {
  auto scaled = rescale_density(two_layer_profile(), kUnit);
  StripGrid grid = StripGrid::build(8.0, 16, 12, scaled.breakpoints);
  Discretization disc(grid, scaled);
  std::mt19937_64 rng(29u);
  std::normal_distribution<double> gauss;
  const double lambda = 0.8;

  std::vector<double> w(grid.nodes(), 0.0);
  for (int j = 1; j < grid.rows(); ++j)
    for (int i = 0; i < grid.nx; ++i) w[grid.node(i, j)] = 0.03 * gauss(rng);

  for (FluxModel flux : {FluxModel{}, FluxModel{PenalizationParams{0.25}}}) {
    JacobianTriplets J = jacobian(disc, lambda, w, flux);
    for (int dir = 0; dir < 10; ++dir) {
      std::vector<double> v(grid.nodes(), 0.0);
      for (int j = 1; j < grid.rows(); ++j)
        for (int i = 0; i < grid.nx; ++i) v[grid.node(i, j)] = gauss(rng);
      const double eps = 1e-7;
      std::vector<double> wp = w, wm = w;
      for (std::size_t k = 0; k < w.size(); ++k) {
        wp[k] += eps * v[k];
        wm[k] -= eps * v[k];
      }
      std::vector<double> rp = residual(disc, lambda, wp, flux);
      std::vector<double> rm = residual(disc, lambda, wm, flux);
      // Assemble J v.
      std::vector<double> jv(grid.nx * grid.cells_z(), 0.0);
      for (std::size_t t = 0; t < J.value.size(); ++t) {
        const int ci = J.col[t] % grid.nx, cj = J.col[t] / grid.nx + 1;
        jv[J.row[t]] += J.value[t] * v[grid.node(ci, cj)];
      }
      double scale = 0.0, err = 0.0;
      for (int j = 1; j < grid.rows(); ++j)
        for (int i = 0; i < grid.nx; ++i) {
          const double fd =
              (rp[grid.node(i, j)] - rm[grid.node(i, j)]) / (2.0 * eps);
          const double an = jv[(j - 1) * grid.nx + i];
          scale = std::max(scale, std::abs(fd));
          err = std::max(err, std::abs(fd - an));
        }
      CHECK(err <= 1e-6 * std::max(1.0, scale));
    }
  }
}

TEST_CASE("linearization at rest reproduces the critical pencil") {
  auto scaled = rescale_density(linear_profile(0.3), kUnit);
  std::vector<double> norms;
  for (int nz : {24, 48}) {
    StripGrid grid = StripGrid::build(8.0, 16, nz, scaled.breakpoints);
    Discretization disc(grid, scaled);
    RayleighProblem problem{grid.zeta, scaled, grid.half_period};
    EigenResult eigen = lambda_crit(problem, kUnit);
    // Embed the k = 0 mode as a laterally constant field and apply the exact
    // Jacobian at the rest state via finite increments of the residual.
    std::vector<double> u(grid.nodes(), 0.0);
    for (int j = 0; j < grid.rows(); ++j)
      for (int i = 0; i < grid.nx; ++i) u[grid.node(i, j)] = eigen.mode[j];
    const double eps = 1e-7;
    std::vector<double> up(u), zero(grid.nodes(), 0.0);
    for (double& x : up) x *= eps;
    FluxModel flux;
    std::vector<double> r = residual(disc, eigen.lambda_crit, up, flux);
    norms.push_back(sup(r) / eps);
  }
  CHECK(norms[1] <= norms[0] / 3.0);
}

TEST_CASE("conservation: cell sums telescope to boundary fluxes") {
  auto scaled = rescale_density(two_layer_profile(), kUnit);
  StripGrid grid = StripGrid::build(8.0, 16, 14, scaled.breakpoints);
  Discretization disc(grid, scaled);
  std::mt19937_64 rng(31u);
  std::normal_distribution<double> gauss;
  std::vector<double> w(grid.nodes(), 0.0);
  for (int j = 1; j < grid.rows(); ++j)
    for (int i = 0; i < grid.nx; ++i) w[grid.node(i, j)] = 0.05 * gauss(rng);
  FluxModel flux;
  FluxAudit audit = residual_audit(disc, 0.7, w, flux);
  const double defect = audit.cell_sum - (audit.top_flux - audit.bottom_flux);
  CHECK(std::abs(defect) <= 1e-12 * std::max(1.0, std::abs(audit.bottom_flux)));
}

TEST_CASE("newton: trivial start converges immediately") {
  auto scaled = rescale_density(constant_profile(), kUnit);
  StripGrid grid = StripGrid::build(8.0, 16, 12, scaled.breakpoints);
  Discretization disc(grid, scaled);
  std::vector<double> w(grid.nodes(), 0.0);
  NewtonOptions options;
  SolveReport report = newton_solve(disc, 0.9, w, options);
  CHECK(report.converged);
  CHECK(report.iterations <= 1);
  CHECK(sup(w) == 0.0);
}

TEST_CASE("newton: manufactured problem recovers the target field") {
  auto scaled = rescale_density(constant_profile(), kUnit);
  auto mms = mms_curved(0.08, 8.0);
  const double lambda = 0.5;
  std::mt19937_64 rng(41u);
  std::normal_distribution<double> gauss;
  std::vector<double> errors;
  for (int lvl = 0; lvl < 3; ++lvl) {
    const int nx = 16 << lvl, nz = 8 << lvl;
    StripGrid grid = StripGrid::build(8.0, nx, nz, scaled.breakpoints);
    Discretization disc(grid, scaled);
    SourceTerm source = mms_source(mms, grid, lambda);
    std::vector<double> target = sample_nodes(mms, grid);
    std::vector<double> w = target;
    for (int j = 1; j < grid.rows(); ++j)
      for (int i = 0; i < grid.nx; ++i) w[grid.node(i, j)] += 0.05 * gauss(rng);
    NewtonOptions options;
    options.source = &source;
    SolveReport report = newton_solve(disc, lambda, w, options);
    REQUIRE(report.converged);
    double err = 0.0;
    for (std::size_t k = 0; k < w.size(); ++k)
      err = std::max(err, std::abs(w[k] - target[k]));
    errors.push_back(err);
  }
  CHECK(errors[1] <= errors[0] / 3.0);
  CHECK(errors[2] <= errors[1] / 3.0);
}

TEST_CASE("branch continuation: constant density matches the closed form") {
  auto scaled = rescale_density(constant_profile(), kUnit);
  StripGrid grid = StripGrid::build(8.0, 16, 12, scaled.breakpoints);
  const double R = 0.05;
  BranchResult result = branch_continuation(grid, scaled, kUnit, R);
  REQUIRE(result.report.converged);
  REQUIRE_FALSE(result.report.flagged);
  FlatBranch oracle = flat_branch_oracle(R, 8.0);
  CHECK(std::abs(result.wave.lambda - oracle.lambda) <= 1e-9);
  double werr = 0.0;
  for (int j = 0; j < grid.rows(); ++j)
    for (int i = 0; i < grid.nx; ++i)
      werr = std::max(werr, std::abs(result.wave.w[grid.node(i, j)] -
                                     oracle.A * (1.0 + grid.zeta[j])));
  CHECK(werr <= 1e-9);
  Discretization disc(grid, scaled);
  CHECK(wave_energy(disc, result.wave.w) == doctest::Approx(R * R).epsilon(1e-8));
  CHECK(result.wave.lambda < result.eigen.lambda_crit);

  // Small-amplitude limit: lambda approaches lambda_crit.
  BranchResult tiny = branch_continuation(grid, scaled, kUnit, 1e-3);
  REQUIRE(tiny.report.converged);
  FlatBranch tiny_oracle = flat_branch_oracle(1e-3, 8.0);
  CHECK(std::abs(tiny.wave.lambda - tiny_oracle.lambda) <= 1e-10);
  CHECK(tiny.wave.sup_norm() <= 2.0 * tiny_oracle.A);
  CHECK(std::abs(tiny.wave.lambda - tiny.eigen.lambda_crit) <= 2e-3);
}

TEST_CASE("branch continuation: two-layer wave is piecewise linear in zeta") {
  auto scaled = rescale_density(two_layer_profile(), kUnit);
  StripGrid grid = StripGrid::build(8.0, 16, 16, scaled.breakpoints);
  BranchResult result = branch_continuation(grid, scaled, kUnit, 0.05);
  REQUIRE(result.report.converged);
  CHECK(result.wave.lambda < result.eigen.lambda_crit);
  CHECK(result.wave.sup_norm() > 1e-4);
  // Laterally uniform and affine within each layer.
  for (int j = 0; j < grid.rows(); ++j)
    for (int i = 1; i < grid.nx; ++i)
      CHECK(std::abs(result.wave.at(i, j) - result.wave.at(0, j)) <= 1e-10);
  for (int j = 1; j + 1 < grid.rows(); ++j) {
    const double z = grid.zeta[j];
    if (std::abs(z - scaled.breakpoints[1]) < 1e-12) continue;  // kink allowed
    const double dm = grid.zeta[j] - grid.zeta[j - 1];
    const double dp = grid.zeta[j + 1] - grid.zeta[j];
    const double second = (result.wave.at(0, j + 1) - result.wave.at(0, j)) / dp -
                          (result.wave.at(0, j) - result.wave.at(0, j - 1)) / dm;
    CHECK(std::abs(second) <= 1e-9);
  }
}

TEST_CASE("newton: warm start near a solved state is cheap") {
  auto scaled = rescale_density(constant_profile(), kUnit);
  StripGrid grid = StripGrid::build(8.0, 16, 12, scaled.breakpoints);
  BranchResult base = branch_continuation(grid, scaled, kUnit, 0.05);
  REQUIRE(base.report.converged);
  Discretization disc(grid, scaled);
  std::vector<double> w = base.wave.w;
  NewtonOptions options;
  SolveReport warm = newton_solve(disc, base.wave.lambda * 1.001, w, options);
  CHECK(warm.converged);
  CHECK(warm.iterations <= 5);
}

TEST_CASE("penalization: coincidence at converged small-gradient states") {
  auto scaled = rescale_density(constant_profile(), kUnit);
  StripGrid grid = StripGrid::build(8.0, 16, 12, scaled.breakpoints);
  BranchResult result = branch_continuation(grid, scaled, kUnit, 0.05);
  REQUIRE(result.report.converged);
  Discretization disc(grid, scaled);
  const double s = 0.25;
  REQUIRE(grad_sup_squared(disc, result.wave.w) <= s);
  FluxModel physical;
  FluxModel penalized;
  penalized.penalization = PenalizationParams{s};
  std::vector<double> r1 = residual(disc, result.wave.lambda, result.wave.w, physical);
  std::vector<double> r2 = residual(disc, result.wave.lambda, result.wave.w, penalized);
  double diff = 0.0;
  for (std::size_t k = 0; k < r1.size(); ++k) diff = std::max(diff, std::abs(r1[k] - r2[k]));
  CHECK(diff == 0.0);
}

TEST_CASE("stagnation is detected when penalization is off") {
  auto scaled = rescale_density(constant_profile(), kUnit);
  StripGrid grid = StripGrid::build(8.0, 16, 12, scaled.breakpoints);
  Discretization disc(grid, scaled);
  std::vector<double> w(grid.nodes(), 0.0);
  // Force w_zeta < -1 in the top cell band.
  for (int i = 0; i < grid.nx; ++i) {
    const int j = grid.rows() - 1;
    w[grid.node(i, j)] = -1.5 * (grid.zeta[j] - grid.zeta[j - 1]);
  }
  NewtonOptions options;
  options.penalization.reset();
  CHECK_THROWS_AS(newton_solve(disc, 0.9, w, options), StagnationError);
  // The penalized operator accepts the same state.
  FluxModel penalized;
  penalized.penalization = PenalizationParams{0.25};
  CHECK_NOTHROW(residual(disc, 0.9, w, penalized));
}

TEST_CASE("density continuation: identity target returns the input wave") {
  auto scaled = rescale_density(linear_profile(0.1), kUnit);
  StripGrid grid = StripGrid::build(8.0, 16, 12, scaled.breakpoints);
  BranchResult base = branch_continuation(grid, scaled, kUnit, 0.04);
  REQUIRE(base.report.converged);
  ContinuationResult same =
      density_continuation(base.wave, scaled, scaled, base.wave.lambda, 3);
  REQUIRE(same.report.converged);
  CHECK(same.report.extras.at("rho_delta_sup") == 0.0);
  double diff = 0.0;
  for (std::size_t k = 0; k < base.wave.w.size(); ++k)
    diff = std::max(diff, std::abs(same.wave.w[k] - base.wave.w[k]));
  CHECK(diff <= 1e-12);
}

TEST_CASE("density continuation: layered approximation stays near the reference") {
  auto rho_star = linear_profile(0.1);
  auto scaled_star = rescale_density(rho_star, kUnit);
  auto quant = layer_quantize(rho_star, 2);
  auto scaled_n = rescale_density(quant.profile, kUnit);

  std::vector<double> union_breaks = scaled_star.breakpoints;
  union_breaks.insert(union_breaks.end(), scaled_n.breakpoints.begin(),
                      scaled_n.breakpoints.end());
  StripGrid grid = StripGrid::build(8.0, 16, 24, union_breaks);
  BranchResult base = branch_continuation(grid, scaled_star, kUnit, 0.05);
  REQUIRE(base.report.converged);
  ContinuationResult cont =
      density_continuation(base.wave, scaled_star, scaled_n, base.wave.lambda, 4);
  REQUIRE(cont.report.converged);
  const double ratio = cont.report.extras.at("lipschitz_ratio");
  CHECK(ratio > 0.0);
  CHECK(ratio < 10.0);  // bounded; the study pins the actual profile
}

TEST_CASE("diagnostics: rest state passes, asymmetry is caught") {
  auto scaled = rescale_density(constant_profile(), kUnit);
  StripGrid grid = StripGrid::build(8.0, 16, 12, scaled.breakpoints);
  Discretization disc(grid, scaled);
  EigenResult eigen;
  eigen.lambda_crit = 1.0;

  WaveField rest;
  rest.grid = grid;
  rest.w.assign(grid.nodes(), 0.0);
  rest.lambda = 0.9;
  DiagnosticsReport ok = diagnostics(disc, rest, eigen);
  CHECK(ok.all_asserted_passed());

  WaveField skew = rest;
  skew.at(3, grid.rows() - 1) = 1e-3;  // breaks evenness about xi = 0
  DiagnosticsReport bad = diagnostics(disc, skew, eigen);
  CHECK_FALSE(bad.all_asserted_passed());
  CHECK_FALSE(bad.find("evenness")->passed);
}

TEST_CASE("grid construction: alignment and spacing guardrails") {
  auto scaled = rescale_density(two_layer_profile(), kUnit);
  StripGrid grid = StripGrid::build(8.0, 16, 20, scaled.breakpoints);
  bool found = false;
  for (double z : grid.zeta)
    if (std::abs(z - scaled.breakpoints[1]) <= 1e-12) found = true;
  CHECK(found);
  for (int j = 0; j + 2 < grid.rows(); ++j) {
    const double a = grid.zeta[j + 1] - grid.zeta[j];
    const double b = grid.zeta[j + 2] - grid.zeta[j + 1];
    CHECK(a <= 4.0 * b + 1e-12);
    CHECK(b <= 4.0 * a + 1e-12);
  }
  CHECK_THROWS_AS(StripGrid::build(8.0, 15, 20, scaled.breakpoints), InvalidArgumentError);
  // Grid missing an interface row is rejected by the discretization.
  StripGrid smooth = StripGrid::build(8.0, 16, 20, {-1.0, 0.0});
  CHECK_THROWS_AS(Discretization(smooth, scaled), InvalidArgumentError);
}
