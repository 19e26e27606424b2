#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "stratwave/bernoulli.hpp"
#include "stratwave/density.hpp"
#include "stratwave/fields.hpp"
#include "stratwave/solver.hpp"

namespace stratwave {

struct ExperimentConfig {
  FlowParameters params;
  std::optional<DensityProfile> density;
  std::optional<DensityProfile> density_star;
  double amplitude_R = 0.05;
  std::vector<int> layer_sweep = {2, 4, 8, 16, 32};
  int nx = 32;
  int nz = 160;
  int crit_M = 64;
  int continuation_steps = 5;
  double penalization_s = 0.25;
  std::uint64_t seed = 0;

  // `base_dir` anchors relative file references; referenced files must exist.
  static ExperimentConfig from_json(const nlohmann::json& doc, const std::string& base_dir);
  const DensityProfile& require_density() const;
};

struct ConvergenceRow {
  int layers = 0;
  bool ok = false;
  std::string flag;
  double rho_err = 0.0;
  double w_err = 0.0;
  double h_err = 0.0;
  double c_err = 0.0;
  double c_identity_err = 0.0;  // |(c_N - c*) - exact integral formula|
  double pb_err = 0.0;
  double lipschitz_ratio = 0.0;
};

struct ConvergenceRecord {
  double lambda = 0.0;
  double lambda_crit = 0.0;
  double reference_speed = 0.0;
  double reference_amplitude = 0.0;
  std::vector<ConvergenceRow> rows;
  double slope_w = 0.0, slope_h = 0.0, slope_pb = 0.0;  // log-log vs rho_err

  std::string csv() const;
  nlohmann::json summary() const;
};

// Reference solve (branch continuation), then per layer count: quantize the
// density, re-solve at fixed lambda by density homotopy, transform fields, and
// record the sup-norm deviations. Failed rows are flagged and the sweep
// continues.
ConvergenceRecord run_convergence_study(const ExperimentConfig& config);

struct CritStudy {
  EigenResult finest;
  std::vector<int> resolutions;
  std::vector<double> lambdas;
  double lambda_extrapolated = 0.0;  // Richardson, second order in the spacing
};

CritStudy critical_speed_study(const DensityProfile& rho, const FlowParameters& params, int M);

struct TransformChecks {
  double w_roundtrip_err = 0.0;
  double psi_bed_err = 0.0;
  double psi_identity_err = 0.0;
  double mass_flux_err = 0.0;
  double surface_pressure_err = 0.0;
  double interface_jump_rel = 0.0;
  nlohmann::json summary() const;
};

// Formulation round trips on one wave: w <-> h, stream-function reconstruction
// down each sampled column, per-column mass flux, and the pressure traces.
TransformChecks run_transform_checks(const WaveField& wave, const DensityProfile& rho,
                                     const FlowParameters& params);

// Laminar wave (w = 0) on a fresh grid, for transform checks without a solve.
WaveField laminar_wave(const DensityProfile& rho, const FlowParameters& params, int nx, int nz);

}  // namespace stratwave
