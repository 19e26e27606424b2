#pragma once

#include <string>
#include <vector>

#include "stratwave/density.hpp"
#include "stratwave/fields.hpp"
#include "stratwave/solver.hpp"

// Forward declaration keeps nlohmann out of most translation units.
#include <json.hpp>

namespace stratwave {

// Density documents use keys p0, breakpoints, pieces (coefficient arrays,
// constant first); this layout is part of the CLI contract.
nlohmann::json density_to_json(const DensityProfile& rho);
DensityProfile density_from_json(const nlohmann::json& doc);

nlohmann::json params_to_json(const FlowParameters& params);
FlowParameters params_from_json(const nlohmann::json& doc);

// Wave persistence: a CSV (xi, zeta, w) next to a JSON header carrying lambda,
// the density document, grid dimensions, and the penalization setting. Reload
// round-trips node values exactly (full 17-digit printing).
void save_wave(const WaveField& wave, const DensityProfile& rho, const FlowParameters& params,
               const std::string& csv_path, const std::string& meta_path);

struct LoadedWave {
  WaveField wave;
  DensityProfile density;
  FlowParameters params;
};
LoadedWave load_wave(const std::string& csv_path, const std::string& meta_path);

// CSV emitters for the physical-space fields.
void write_height_csv(const HeightField& height, const std::string& path);
void write_eulerian_csv(const EulerianFields& fields, const std::string& path);
void write_surface_csv(const EulerianFields& fields, const std::string& path);
void write_pressure_csv(const PressureField& pressure, const std::string& path);
void write_bed_trace_csv(const PressureField& pressure, const std::string& path);
void write_mode_csv(const EigenResult& eigen, const std::string& path);

void write_text_file(const std::string& path, const std::string& content);
nlohmann::json diagnostics_to_json(const DiagnosticsReport& report);

// Removes the listed files; used to drop partial outputs when a command fails.
class OutputGuard {
 public:
  ~OutputGuard();
  void track(const std::string& path);
  void commit() { committed_ = true; }

 private:
  std::vector<std::string> paths_;
  bool committed_ = false;
};

std::string format_double(double v);  // shortest exact round-trip formatting

}  // namespace stratwave
