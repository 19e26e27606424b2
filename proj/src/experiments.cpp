#include "stratwave/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "stratwave/errors.hpp"
#include "stratwave/io.hpp"

namespace stratwave {

namespace {

DensityProfile parse_density_entry(const nlohmann::json& entry, const std::string& base_dir) {
  if (entry.contains("file")) {
    std::filesystem::path path = entry["file"].get<std::string>();
    if (path.is_relative()) path = std::filesystem::path(base_dir) / path;
    std::ifstream in(path);
    if (!in) throw IoError("referenced density file does not exist: " + path.string());
    return density_from_json(nlohmann::json::parse(in));
  }
  return density_from_json(entry);
}

}  // namespace

ExperimentConfig ExperimentConfig::from_json(const nlohmann::json& doc,
                                             const std::string& base_dir) {
  ExperimentConfig config;
  if (doc.contains("params")) config.params = params_from_json(doc["params"]);
  if (doc.contains("density")) config.density = parse_density_entry(doc["density"], base_dir);
  if (doc.contains("density_star"))
    config.density_star = parse_density_entry(doc["density_star"], base_dir);
  config.amplitude_R = doc.value("amplitude_R", 0.05);
  if (doc.contains("layer_sweep")) {
    config.layer_sweep = doc["layer_sweep"].get<std::vector<int>>();
    for (std::size_t k = 0; k + 1 < config.layer_sweep.size(); ++k)
      if (config.layer_sweep[k] >= config.layer_sweep[k + 1])
        throw InvalidArgumentError("config: layer_sweep must be strictly increasing");
    if (!config.layer_sweep.empty() && config.layer_sweep.front() < 1)
      throw InvalidArgumentError("config: layer counts must be positive");
  }
  if (doc.contains("grid")) {
    config.nx = doc["grid"].value("nx", config.nx);
    config.nz = doc["grid"].value("nz", config.nz);
  }
  config.crit_M = doc.value("crit_M", config.crit_M);
  config.continuation_steps = doc.value("continuation_steps", config.continuation_steps);
  config.penalization_s = doc.value("penalization_s", config.penalization_s);
  config.seed = doc.value("seed", static_cast<std::uint64_t>(0));
  return config;
}

const DensityProfile& ExperimentConfig::require_density() const {
  if (!density) throw InvalidArgumentError("config: a density profile is required");
  return *density;
}

namespace {

// Linear-in-zeta interpolation of a wave column onto new rows.
std::vector<double> interp_to_rows(const WaveField& wave, const std::vector<double>& rows) {
  const StripGrid& grid = wave.grid;
  std::vector<double> out(rows.size() * grid.nx, 0.0);
  for (std::size_t j = 0; j < rows.size(); ++j) {
    const double z = rows[j];
    int k = static_cast<int>(std::upper_bound(grid.zeta.begin(), grid.zeta.end(), z) -
                             grid.zeta.begin()) -
            1;
    k = std::clamp(k, 0, grid.rows() - 2);
    const double t = (z - grid.zeta[k]) / (grid.zeta[k + 1] - grid.zeta[k]);
    for (int i = 0; i < grid.nx; ++i)
      out[j * grid.nx + i] =
          (1.0 - t) * wave.w[grid.node(i, k)] + t * wave.w[grid.node(i, k + 1)];
  }
  return out;
}

// Height h(q_i, p) from a wave by composing the zeta map with linear-in-zeta
// interpolation of w; used to compare fields living on different row sets.
double sample_height(const WaveField& wave, const ZetaMap& map, int i, double p) {
  const double z = map.zeta(p);
  const StripGrid& grid = wave.grid;
  int k = static_cast<int>(std::upper_bound(grid.zeta.begin(), grid.zeta.end(), z) -
                           grid.zeta.begin()) -
          1;
  k = std::clamp(k, 0, grid.rows() - 2);
  const double t = (z - grid.zeta[k]) / (grid.zeta[k + 1] - grid.zeta[k]);
  const double w =
      (1.0 - t) * wave.w[grid.node(i, k)] + t * wave.w[grid.node(i, k + 1)];
  const double d = map.parameters().d;
  return d * (w + z) + d;
}

double fit_slope(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() < 2) return 0.0;
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    sx += x[k];
    sy += y[k];
    sxx += x[k] * x[k];
    sxy += x[k] * y[k];
  }
  const double n = static_cast<double>(x.size());
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

}  // namespace

std::string ConvergenceRecord::csv() const {
  std::ostringstream out;
  out << "N,rho_err,w_err,h_err,c_err,pb_err,lipschitz_ratio,status\n";
  for (const auto& row : rows) {
    out << row.layers << ',' << format_double(row.rho_err) << ',' << format_double(row.w_err)
        << ',' << format_double(row.h_err) << ',' << format_double(row.c_err) << ','
        << format_double(row.pb_err) << ',' << format_double(row.lipschitz_ratio) << ','
        << (row.ok ? "ok" : ("failed:" + row.flag)) << '\n';
  }
  return out.str();
}

nlohmann::json ConvergenceRecord::summary() const {
  nlohmann::json rows_json = nlohmann::json::array();
  for (const auto& row : rows) {
    rows_json.push_back({{"N", row.layers},
                         {"ok", row.ok},
                         {"flag", row.flag},
                         {"rho_err", row.rho_err},
                         {"w_err", row.w_err},
                         {"h_err", row.h_err},
                         {"c_err", row.c_err},
                         {"c_identity_err", row.c_identity_err},
                         {"pb_err", row.pb_err},
                         {"lipschitz_ratio", row.lipschitz_ratio}});
  }
  return nlohmann::json{{"lambda", lambda},
                        {"lambda_crit", lambda_crit},
                        {"reference_speed", reference_speed},
                        {"reference_amplitude", reference_amplitude},
                        {"rows", rows_json},
                        {"slopes", {{"w", slope_w}, {"h", slope_h}, {"pb", slope_pb}}}};
}

ConvergenceRecord run_convergence_study(const ExperimentConfig& config) {
  const DensityProfile& rho_star = config.require_density();
  const FlowParameters& params = config.params;
  params.validate();

  const RescaledDensity scaled_star = rescale_density(rho_star, params);
  const ZetaMap map_star(rho_star, params);
  const double c_star = map_star.speed();
  const BernoulliData bdata_star(rho_star, params);

  NewtonOptions newton;
  newton.penalization = PenalizationParams{config.penalization_s};
  BranchOptions branch_opts;
  branch_opts.newton = newton;

  StripGrid ref_grid = StripGrid::build(params.half_period_ratio(), config.nx, config.nz,
                                        scaled_star.breakpoints);
  BranchResult reference =
      branch_continuation(ref_grid, scaled_star, params, config.amplitude_R, branch_opts);
  if (!reference.report.converged || reference.report.flagged)
    throw ConvergenceError("convergence study: reference solve failed: " +
                           reference.report.flag_reason);
  const double lambda = reference.wave.lambda;

  ConvergenceRecord record;
  record.lambda = lambda;
  record.lambda_crit = reference.eigen.lambda_crit;
  record.reference_speed = c_star;
  record.reference_amplitude = config.amplitude_R;

  const int pressure_samples = 1024;
  for (int N : config.layer_sweep) {
    ConvergenceRow row;
    row.layers = N;
    try {
      QuantizeResult quant = layer_quantize(rho_star, N);
      const RescaledDensity scaled_n = rescale_density(quant.profile, params);
      const ZetaMap map_n(quant.profile, params);

      // Shared grid: union of both interface row sets.
      std::vector<double> union_breaks = scaled_star.breakpoints;
      union_breaks.insert(union_breaks.end(), scaled_n.breakpoints.begin(),
                          scaled_n.breakpoints.end());
      StripGrid grid =
          StripGrid::build(params.half_period_ratio(), config.nx, config.nz, union_breaks);

      // Reference wave re-solved on the shared grid.
      WaveField ref_on_grid;
      ref_on_grid.grid = grid;
      ref_on_grid.lambda = lambda;
      ref_on_grid.density_id = scaled_star.id;
      ref_on_grid.w = interp_to_rows(reference.wave, grid.zeta);
      Discretization disc_star(grid, scaled_star);
      SolveReport ref_report = newton_solve(disc_star, lambda, ref_on_grid.w, newton);
      if (!ref_report.converged)
        throw ConvergenceError("reference re-solve failed on the shared grid");

      ContinuationResult cont = density_continuation(
          ref_on_grid, scaled_star, scaled_n, lambda, config.continuation_steps, newton);
      if (!cont.report.converged || cont.report.flagged)
        throw ConvergenceError(cont.report.flag_reason.empty() ? "density continuation failed"
                                                               : cont.report.flag_reason);

      row.rho_err = quant.sup_error;
      row.w_err = cont.report.extras.at("w_delta_sup");
      row.lipschitz_ratio = row.rho_err > 0.0 ? row.w_err / row.rho_err : 0.0;

      const double c_n = wave_speed(quant.profile, params);
      row.c_err = std::abs(c_n - c_star);
      row.c_identity_err =
          std::abs((c_n - c_star) - wave_speed_delta(quant.profile, rho_star, params));

      // Height deviation on a dense common (q, p) lattice.
      double h_err = 0.0;
      for (int i = 0; i < grid.nx; ++i) {
        for (int k = 1; k < pressure_samples; ++k) {
          const double p = rho_star.p0() * (1.0 - static_cast<double>(k) / pressure_samples);
          h_err = std::max(h_err, std::abs(sample_height(cont.wave, map_n, i, p) -
                                           sample_height(ref_on_grid, map_star, i, p)));
        }
      }
      row.h_err = h_err;

      // Bed pressure traces share the q columns.
      const BernoulliData bdata_n(quant.profile, params);
      PressureField p_star =
          pressure_field(w_to_height(ref_on_grid, rho_star, params), rho_star, params,
                         bdata_star);
      PressureField p_n =
          pressure_field(w_to_height(cont.wave, quant.profile, params), quant.profile, params,
                         bdata_n);
      double pb_err = 0.0;
      for (int i = 0; i < grid.nx; ++i)
        pb_err = std::max(pb_err, std::abs(p_n.bed[i] - p_star.bed[i]));
      row.pb_err = pb_err;
      row.ok = true;
    } catch (const Error& err) {
      row.ok = false;
      row.flag = err.what();
    }
    record.rows.push_back(row);
  }

  std::vector<double> lx, lw, lh, lp;
  for (const auto& row : record.rows) {
    if (!row.ok || row.rho_err <= 0.0) continue;
    lx.push_back(std::log(row.rho_err));
    if (row.w_err > 0.0) lw.push_back(std::log(row.w_err));
    if (row.h_err > 0.0) lh.push_back(std::log(row.h_err));
    if (row.pb_err > 0.0) lp.push_back(std::log(row.pb_err));
  }
  if (lw.size() == lx.size()) record.slope_w = fit_slope(lx, lw);
  if (lh.size() == lx.size()) record.slope_h = fit_slope(lx, lh);
  if (lp.size() == lx.size()) record.slope_pb = fit_slope(lx, lp);
  return record;
}

CritStudy critical_speed_study(const DensityProfile& rho, const FlowParameters& params, int M) {
  if (M < 8) throw InvalidArgumentError("critical_speed_study: M must be at least 8");
  const RescaledDensity scaled = rescale_density(rho, params);
  CritStudy study;
  for (int factor : {1, 2, 4}) {
    RayleighProblem problem =
        RayleighProblem::with_resolution(scaled, params.half_period_ratio(), M * factor);
    EigenResult result = lambda_crit(problem, params);
    study.resolutions.push_back(M * factor);
    study.lambdas.push_back(result.lambda_crit);
    if (factor == 4) study.finest = std::move(result);
  }
  study.lambda_extrapolated =
      study.lambdas[2] + (study.lambdas[2] - study.lambdas[1]) / 3.0;
  return study;
}

nlohmann::json TransformChecks::summary() const {
  return nlohmann::json{{"w_roundtrip_err", w_roundtrip_err},
                        {"psi_bed_err", psi_bed_err},
                        {"psi_identity_err", psi_identity_err},
                        {"mass_flux_err", mass_flux_err},
                        {"surface_pressure_err", surface_pressure_err},
                        {"interface_jump_rel", interface_jump_rel}};
}

TransformChecks run_transform_checks(const WaveField& wave, const DensityProfile& rho,
                                     const FlowParameters& params) {
  TransformChecks checks;
  const HeightField height = w_to_height(wave, rho, params);
  const WaveField back = height_to_w(height, rho, params);
  for (std::size_t k = 0; k < wave.w.size(); ++k)
    checks.w_roundtrip_err = std::max(checks.w_roundtrip_err,
                                      std::abs(back.w[k] - wave.w[k]));

  const EulerianFields fields = height_to_velocity(height, rho, params);
  const std::vector<double> flux = column_mass_flux(fields, rho, params);
  for (double f : flux)
    checks.mass_flux_err = std::max(checks.mass_flux_err, std::abs(f - rho.p0()));

  // Stream-function reconstruction down a handful of columns.
  const int nq = height.nq();
  for (int i : {0, nq / 4, nq / 2, (3 * nq) / 4}) {
    const StreamfunctionColumn col =
        reconstruct_streamfunction(height, rho, params, height.q[i]);
    checks.psi_bed_err = std::max(checks.psi_bed_err, std::abs(col.bed_value - (-rho.p0())));
    checks.psi_identity_err = std::max(checks.psi_identity_err, col.max_identity_error);
  }

  const BernoulliData bdata(rho, params);
  const PressureField pressure = pressure_field(height, rho, params, bdata);
  checks.surface_pressure_err = pressure.surface_error;
  checks.interface_jump_rel =
      pressure.sup_abs > 0.0 ? pressure.max_interface_jump / pressure.sup_abs : 0.0;
  return checks;
}

WaveField laminar_wave(const DensityProfile& rho, const FlowParameters& params, int nx, int nz) {
  const RescaledDensity scaled = rescale_density(rho, params);
  WaveField wave;
  wave.grid = StripGrid::build(params.half_period_ratio(), nx, nz, scaled.breakpoints);
  wave.w.assign(wave.grid.nodes(), 0.0);
  wave.lambda = BernoulliData(rho, params).richardson();
  wave.density_id = scaled.id;
  return wave;
}

}  // namespace stratwave
