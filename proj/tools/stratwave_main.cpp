// stratwave: steady stratified traveling waves in streamline coordinates.
//
// Subcommands: speed, crit, solve, approx-layers, converge, pressure,
// transform. Each reads a JSON config, writes CSV/JSON outputs under --out,
// exits 0 on success and nonzero with a JSON error summary otherwise. Partial
// outputs are removed when a command fails.

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "stratwave/errors.hpp"
#include "stratwave/experiments.hpp"
#include "stratwave/io.hpp"

namespace sw = stratwave;
using nlohmann::json;

namespace {

struct CommonArgs {
  std::string config_path;
  std::string out_dir = "out";
  std::string grid_spec;
  std::string wave_path;
  std::int64_t seed = -1;
};

sw::ExperimentConfig load_config(const CommonArgs& args) {
  if (args.config_path.empty()) throw sw::InvalidArgumentError("--config is required");
  std::ifstream in(args.config_path);
  if (!in) throw sw::IoError("cannot open config: " + args.config_path);
  json doc = json::parse(in);
  const std::string base =
      std::filesystem::path(args.config_path).parent_path().string();
  sw::ExperimentConfig config = sw::ExperimentConfig::from_json(doc, base.empty() ? "." : base);
  if (!args.grid_spec.empty()) {
    int nx = 0, nz = 0;
    if (std::sscanf(args.grid_spec.c_str(), "%dx%d", &nx, &nz) != 2 || nx <= 0 || nz <= 0)
      throw sw::InvalidArgumentError("--grid expects NXxNZ, e.g. 256x128");
    config.nx = nx;
    config.nz = nz;
  }
  if (args.seed >= 0) config.seed = static_cast<std::uint64_t>(args.seed);
  return config;
}

std::string out_path(const CommonArgs& args, const std::string& name) {
  std::filesystem::create_directories(args.out_dir);
  return (std::filesystem::path(args.out_dir) / name).string();
}

int run_speed(const CommonArgs& args) {
  sw::ExperimentConfig config = load_config(args);
  const double c = sw::wave_speed(config.require_density(), config.params);
  json summary{{"c", c}};
  std::cout << "c = " << sw::format_double(c) << "\n";
  if (config.density_star) {
    const double delta =
        sw::wave_speed_delta(config.require_density(), *config.density_star, config.params);
    summary["delta_c"] = delta;
    summary["c_star"] = sw::wave_speed(*config.density_star, config.params);
    std::cout << "delta_c = " << sw::format_double(delta) << "\n";
  }
  sw::OutputGuard guard;
  const std::string path = out_path(args, "speed_summary.json");
  guard.track(path);
  sw::write_text_file(path, summary.dump(2) + "\n");
  guard.commit();
  return 0;
}

int run_crit(const CommonArgs& args) {
  sw::ExperimentConfig config = load_config(args);
  sw::CritStudy study =
      sw::critical_speed_study(config.require_density(), config.params, config.crit_M);
  const double lambda = study.lambda_extrapolated;
  const double c_crit = std::sqrt(config.params.g * config.params.d / lambda);
  std::cout << "lambda_crit = " << sw::format_double(lambda)
            << " (extrapolated over M = " << study.resolutions[0] << ","
            << study.resolutions[1] << "," << study.resolutions[2] << ")\n"
            << "c_crit = " << sw::format_double(c_crit) << "\n"
            << "wavenumber k = " << study.finest.wavenumber << "\n";
  sw::OutputGuard guard;
  const std::string mode_path = out_path(args, "mode.csv");
  const std::string summary_path = out_path(args, "crit_summary.json");
  guard.track(mode_path);
  guard.track(summary_path);
  sw::write_mode_csv(study.finest, mode_path);
  json summary{{"lambda_crit", lambda},
               {"c_crit", c_crit},
               {"wavenumber", study.finest.wavenumber},
               {"resolutions", study.resolutions},
               {"lambdas", study.lambdas}};
  sw::write_text_file(summary_path, summary.dump(2) + "\n");
  guard.commit();
  return 0;
}

int run_solve(const CommonArgs& args) {
  sw::ExperimentConfig config = load_config(args);
  const sw::DensityProfile& rho = config.require_density();
  const sw::RescaledDensity scaled = sw::rescale_density(rho, config.params);
  sw::StripGrid grid = sw::StripGrid::build(config.params.half_period_ratio(), config.nx,
                                            config.nz, scaled.breakpoints);
  sw::BranchOptions options;
  options.newton.penalization = sw::PenalizationParams{config.penalization_s};
  const auto t0 = std::chrono::steady_clock::now();
  sw::BranchResult result =
      sw::branch_continuation(grid, scaled, config.params, config.amplitude_R, options);
  const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                      std::chrono::steady_clock::now() - t0)
                      .count();
  if (!result.report.converged || result.report.flagged)
    throw sw::ConvergenceError("solve failed: " + result.report.flag_reason);

  sw::Discretization disc(grid, scaled);
  sw::DiagnosticsReport diag = sw::diagnostics(disc, result.wave, result.eigen);

  sw::OutputGuard guard;
  const std::string wave_path = out_path(args, "wave.csv");
  const std::string meta_path = out_path(args, "wave.meta.json");
  const std::string summary_path = out_path(args, "solve_summary.json");
  guard.track(wave_path);
  guard.track(meta_path);
  guard.track(summary_path);
  sw::save_wave(result.wave, rho, config.params, wave_path, meta_path);
  json summary{{"lambda", result.wave.lambda},
               {"lambda_crit", result.eigen.lambda_crit},
               {"wavenumber", result.eigen.wavenumber},
               {"amplitude_R", config.amplitude_R},
               {"sup_w", result.wave.sup_norm()},
               {"extras", result.report.extras},
               {"diagnostics", sw::diagnostics_to_json(diag)},
               {"timings_ms", {{"solve", ms}}}};
  sw::write_text_file(summary_path, summary.dump(2) + "\n");
  guard.commit();
  std::cout << "lambda = " << sw::format_double(result.wave.lambda)
            << ", sup w = " << sw::format_double(result.wave.sup_norm())
            << (diag.all_asserted_passed() ? ", diagnostics ok" : ", DIAGNOSTICS FAILED")
            << "\n";
  return diag.all_asserted_passed() ? 0 : 2;
}

int run_approx_layers(const CommonArgs& args) {
  sw::ExperimentConfig config = load_config(args);
  const sw::DensityProfile& rho = config.require_density();
  sw::OutputGuard guard;
  json report = json::array();
  std::vector<std::pair<std::string, std::string>> files;
  for (int N : config.layer_sweep) {
    sw::QuantizeResult quant = sw::layer_quantize(rho, N);
    const std::string path = out_path(args, "rho_" + std::to_string(N) + ".json");
    guard.track(path);
    sw::write_text_file(path, sw::density_to_json(quant.profile).dump(2) + "\n");
    report.push_back({{"N", N}, {"sup_error", quant.sup_error}, {"file", path}});
    std::cout << "N = " << N << ": sup error " << sw::format_double(quant.sup_error) << "\n";
  }
  const std::string summary_path = out_path(args, "approx_layers_summary.json");
  guard.track(summary_path);
  sw::write_text_file(summary_path, report.dump(2) + "\n");
  guard.commit();
  return 0;
}

int run_converge(const CommonArgs& args) {
  sw::ExperimentConfig config = load_config(args);
  const auto t0 = std::chrono::steady_clock::now();
  sw::ConvergenceRecord record = sw::run_convergence_study(config);
  const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                      std::chrono::steady_clock::now() - t0)
                      .count();
  sw::OutputGuard guard;
  const std::string csv_path = out_path(args, "converge.csv");
  const std::string summary_path = out_path(args, "converge_summary.json");
  guard.track(csv_path);
  guard.track(summary_path);
  sw::write_text_file(csv_path, record.csv());
  json summary = record.summary();
  summary["timings_ms"] = {{"study", ms}};
  sw::write_text_file(summary_path, summary.dump(2) + "\n");
  guard.commit();
  std::cout << record.csv();
  for (const auto& row : record.rows)
    if (!row.ok) return 2;
  return 0;
}

int run_pressure(const CommonArgs& args) {
  if (args.wave_path.empty())
    throw sw::InvalidArgumentError("pressure: --wave <wave.csv from solve> is required");
  std::string meta_path = args.wave_path;
  const std::string suffix = ".csv";
  if (meta_path.size() > suffix.size() &&
      meta_path.compare(meta_path.size() - suffix.size(), suffix.size(), suffix) == 0)
    meta_path = meta_path.substr(0, meta_path.size() - suffix.size());
  meta_path += ".meta.json";
  sw::LoadedWave loaded = sw::load_wave(args.wave_path, meta_path);

  const sw::HeightField height = sw::w_to_height(loaded.wave, loaded.density, loaded.params);
  const sw::EulerianFields fields =
      sw::height_to_velocity(height, loaded.density, loaded.params);
  const sw::BernoulliData bdata(loaded.density, loaded.params);
  const sw::PressureField pressure =
      sw::pressure_field(height, loaded.density, loaded.params, bdata);

  sw::OutputGuard guard;
  const std::string height_path = out_path(args, "height.csv");
  const std::string euler_path = out_path(args, "eulerian.csv");
  const std::string surface_path = out_path(args, "surface.csv");
  const std::string pressure_path = out_path(args, "pressure.csv");
  const std::string bed_path = out_path(args, "bed_trace.csv");
  const std::string summary_path = out_path(args, "pressure_summary.json");
  for (const auto& path :
       {height_path, euler_path, surface_path, pressure_path, bed_path, summary_path})
    guard.track(path);
  sw::write_height_csv(height, height_path);
  sw::write_eulerian_csv(fields, euler_path);
  sw::write_surface_csv(fields, surface_path);
  sw::write_pressure_csv(pressure, pressure_path);
  sw::write_bed_trace_csv(pressure, bed_path);
  json summary{{"surface_error", pressure.surface_error},
               {"max_interface_jump", pressure.max_interface_jump},
               {"sup_abs", pressure.sup_abs},
               {"lambda", loaded.wave.lambda}};
  sw::write_text_file(summary_path, summary.dump(2) + "\n");
  guard.commit();
  std::cout << "surface pressure error = " << sw::format_double(pressure.surface_error)
            << ", interface jump = " << sw::format_double(pressure.max_interface_jump) << "\n";
  return 0;
}

int run_transform(const CommonArgs& args) {
  sw::TransformChecks checks;
  double p0 = 0.0;
  if (!args.wave_path.empty()) {
    std::string meta_path = args.wave_path;
    const std::string suffix = ".csv";
    if (meta_path.size() > suffix.size() &&
        meta_path.compare(meta_path.size() - suffix.size(), suffix.size(), suffix) == 0)
      meta_path = meta_path.substr(0, meta_path.size() - suffix.size());
    meta_path += ".meta.json";
    sw::LoadedWave loaded = sw::load_wave(args.wave_path, meta_path);
    checks = sw::run_transform_checks(loaded.wave, loaded.density, loaded.params);
    p0 = loaded.density.p0();
  } else {
    sw::ExperimentConfig config = load_config(args);
    sw::WaveField laminar =
        sw::laminar_wave(config.require_density(), config.params, config.nx, config.nz);
    checks = sw::run_transform_checks(laminar, config.require_density(), config.params);
    p0 = config.require_density().p0();
  }
  sw::OutputGuard guard;
  const std::string summary_path = out_path(args, "transform_summary.json");
  guard.track(summary_path);
  json summary = checks.summary();
  summary["p0"] = p0;
  sw::write_text_file(summary_path, summary.dump(2) + "\n");
  guard.commit();
  std::cout << summary.dump(2) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"steady stratified traveling waves in streamline coordinates"};
  app.require_subcommand(1);
  CommonArgs args;

  auto add_common = [&](CLI::App* cmd, bool wants_wave = false) {
    cmd->add_option("--config", args.config_path, "JSON configuration file");
    cmd->add_option("--out", args.out_dir, "output directory");
    cmd->add_option("--grid", args.grid_spec, "grid as NXxNZ, e.g. 256x128");
    cmd->add_option("--seed", args.seed, "random seed override");
    if (wants_wave)
      cmd->add_option("--wave", args.wave_path, "wave.csv produced by the solve subcommand");
    return cmd;
  };

  CLI::App* speed = add_common(app.add_subcommand("speed", "wave speed c and delta c"));
  CLI::App* crit =
      add_common(app.add_subcommand("crit", "critical Richardson number and mode"));
  CLI::App* solve =
      add_common(app.add_subcommand("solve", "branch continuation to an amplitude"));
  CLI::App* approx = add_common(
      app.add_subcommand("approx-layers", "piecewise-constant density approximations"));
  CLI::App* converge =
      add_common(app.add_subcommand("converge", "layered-density convergence study"));
  CLI::App* pressure = add_common(
      app.add_subcommand("pressure", "pressure and velocity fields of a stored wave"), true);
  CLI::App* transform =
      add_common(app.add_subcommand("transform", "formulation round-trip checks"), true);

  CLI11_PARSE(app, argc, argv);

  try {
    if (speed->parsed()) return run_speed(args);
    if (crit->parsed()) return run_crit(args);
    if (solve->parsed()) return run_solve(args);
    if (approx->parsed()) return run_approx_layers(args);
    if (converge->parsed()) return run_converge(args);
    if (pressure->parsed()) return run_pressure(args);
    if (transform->parsed()) return run_transform(args);
  } catch (const std::exception& err) {
    nlohmann::json error{{"error", {{"type", "failure"}, {"message", err.what()}}}};
    std::cout << error.dump() << "\n";
    return 1;
  }
  return 0;
}
