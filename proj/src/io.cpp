#include "stratwave/io.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "stratwave/errors.hpp"

namespace stratwave {

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

nlohmann::json density_to_json(const DensityProfile& rho) {
  nlohmann::json doc;
  doc["p0"] = rho.p0();
  doc["breakpoints"] = rho.breakpoints();
  nlohmann::json pieces = nlohmann::json::array();
  for (const Piece& piece : rho.pieces()) {
    // Trim trailing zero coefficients but keep at least the constant.
    int degree = 3;
    while (degree > 0 && piece.c[degree] == 0.0) --degree;
    nlohmann::json coeffs = nlohmann::json::array();
    for (int k = 0; k <= degree; ++k) coeffs.push_back(piece.c[k]);
    pieces.push_back(coeffs);
  }
  doc["pieces"] = pieces;
  return doc;
}

DensityProfile density_from_json(const nlohmann::json& doc) {
  if (!doc.contains("p0") || !doc.contains("breakpoints") || !doc.contains("pieces"))
    throw IoError("density document needs keys p0, breakpoints, pieces");
  std::vector<double> breaks = doc["breakpoints"].get<std::vector<double>>();
  const double p0 = doc["p0"].get<double>();
  if (breaks.empty() || std::abs(breaks.front() - p0) > 1e-14)
    throw IoError("density document: first breakpoint must equal p0");
  std::vector<Piece> pieces;
  for (const auto& coeffs : doc["pieces"]) {
    if (!coeffs.is_array() || coeffs.empty() || coeffs.size() > 4)
      throw IoError("density document: each piece needs 1..4 coefficients, constant first");
    Piece piece;
    for (std::size_t k = 0; k < coeffs.size(); ++k) piece.c[k] = coeffs[k].get<double>();
    pieces.push_back(piece);
  }
  return DensityProfile(breaks, pieces);
}

nlohmann::json params_to_json(const FlowParameters& params) {
  return nlohmann::json{
      {"d", params.d}, {"g", params.g}, {"L", params.L}, {"P_atm", params.P_atm}};
}

FlowParameters params_from_json(const nlohmann::json& doc) {
  FlowParameters params;
  params.d = doc.value("d", 1.0);
  params.g = doc.value("g", 1.0);
  params.L = doc.value("L", 8.0);
  params.P_atm = doc.value("P_atm", 0.0);
  params.validate();
  return params;
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + path);
  out << content;
  if (!out) throw IoError("write failed: " + path);
}

void save_wave(const WaveField& wave, const DensityProfile& rho, const FlowParameters& params,
               const std::string& csv_path, const std::string& meta_path) {
  std::ostringstream csv;
  csv << "xi,zeta,w\n";
  const StripGrid& grid = wave.grid;
  for (int j = 0; j < grid.rows(); ++j)
    for (int i = 0; i < grid.nx; ++i)
      csv << format_double(grid.xi(i)) << ',' << format_double(grid.zeta[j]) << ','
          << format_double(wave.w[grid.node(i, j)]) << '\n';
  write_text_file(csv_path, csv.str());

  nlohmann::json meta;
  meta["lambda"] = wave.lambda;
  meta["density_id"] = wave.density_id;
  meta["density"] = density_to_json(rho);
  meta["params"] = params_to_json(params);
  meta["grid"] = {{"nx", grid.nx},
                  {"half_period", grid.half_period},
                  {"zeta_rows", grid.zeta}};
  if (wave.penalization_s)
    meta["penalization_s"] = *wave.penalization_s;
  else
    meta["penalization_s"] = "off";
  write_text_file(meta_path, meta.dump(2) + "\n");
}

LoadedWave load_wave(const std::string& csv_path, const std::string& meta_path) {
  std::ifstream meta_in(meta_path);
  if (!meta_in) throw IoError("cannot open wave header: " + meta_path);
  nlohmann::json meta = nlohmann::json::parse(meta_in);

  LoadedWave out{WaveField{}, density_from_json(meta.at("density")),
                 params_from_json(meta.at("params"))};
  out.wave.lambda = meta.at("lambda").get<double>();
  out.wave.density_id = meta.at("density_id").get<std::string>();
  if (meta.at("penalization_s").is_number())
    out.wave.penalization_s = meta["penalization_s"].get<double>();
  out.wave.grid.nx = meta.at("grid").at("nx").get<int>();
  out.wave.grid.half_period = meta.at("grid").at("half_period").get<double>();
  out.wave.grid.zeta = meta.at("grid").at("zeta_rows").get<std::vector<double>>();

  std::ifstream csv(csv_path);
  if (!csv) throw IoError("cannot open wave data: " + csv_path);
  std::string line;
  if (!std::getline(csv, line) || line != "xi,zeta,w")
    throw IoError("wave data: expected header xi,zeta,w");
  out.wave.w.assign(out.wave.grid.nodes(), 0.0);
  int count = 0;
  while (std::getline(csv, line)) {
    if (line.empty()) continue;
    double xi, zeta, w;
    if (std::sscanf(line.c_str(), "%lf,%lf,%lf", &xi, &zeta, &w) != 3)
      throw IoError("wave data: malformed row '" + line + "'");
    const int j = count / out.wave.grid.nx;
    const int i = count % out.wave.grid.nx;
    if (j >= out.wave.grid.rows()) throw IoError("wave data: too many rows");
    out.wave.w[out.wave.grid.node(i, j)] = w;
    ++count;
  }
  if (count != out.wave.grid.nodes()) throw IoError("wave data: row count mismatch");
  return out;
}

void write_height_csv(const HeightField& height, const std::string& path) {
  std::ostringstream csv;
  csv << "q,p,h\n";
  for (int j = 0; j < height.np(); ++j)
    for (int i = 0; i < height.nq(); ++i)
      csv << format_double(height.q[i]) << ',' << format_double(height.p[j]) << ','
          << format_double(height.at(i, j)) << '\n';
  write_text_file(path, csv.str());
}

void write_eulerian_csv(const EulerianFields& fields, const std::string& path) {
  std::ostringstream csv;
  csv << "x,y,u,v,psi\n";
  for (const auto& block : fields.layers)
    for (const auto& s : block.samples)
      csv << format_double(s.x) << ',' << format_double(s.y) << ',' << format_double(s.u) << ','
          << format_double(s.v) << ',' << format_double(s.psi) << '\n';
  write_text_file(path, csv.str());
}

void write_surface_csv(const EulerianFields& fields, const std::string& path) {
  std::ostringstream csv;
  csv << "x,eta\n";
  for (std::size_t i = 0; i < fields.x.size(); ++i)
    csv << format_double(fields.x[i]) << ',' << format_double(fields.eta[i]) << '\n';
  write_text_file(path, csv.str());
}

void write_pressure_csv(const PressureField& pressure, const std::string& path) {
  std::ostringstream csv;
  csv << "q,p,P\n";
  const int nq = static_cast<int>(pressure.q.size());
  for (const auto& block : pressure.layers)
    for (int j = block.row_begin; j <= block.row_end; ++j)
      for (int i = 0; i < nq; ++i)
        csv << format_double(pressure.q[i]) << ',' << format_double(pressure.p[j]) << ','
            << format_double(block.P[(j - block.row_begin) * nq + i]) << '\n';
  write_text_file(path, csv.str());
}

void write_bed_trace_csv(const PressureField& pressure, const std::string& path) {
  std::ostringstream csv;
  csv << "q,P_b\n";
  for (std::size_t i = 0; i < pressure.q.size(); ++i)
    csv << format_double(pressure.q[i]) << ',' << format_double(pressure.bed[i]) << '\n';
  write_text_file(path, csv.str());
}

void write_mode_csv(const EigenResult& eigen, const std::string& path) {
  std::ostringstream csv;
  csv << "zeta,mode_value\n";
  for (std::size_t j = 0; j < eigen.zeta_rows.size(); ++j)
    csv << format_double(eigen.zeta_rows[j]) << ',' << format_double(eigen.mode[j]) << '\n';
  write_text_file(path, csv.str());
}

nlohmann::json diagnostics_to_json(const DiagnosticsReport& report) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& check : report.checks) {
    arr.push_back({{"name", check.name},
                   {"asserted", check.asserted},
                   {"passed", check.passed},
                   {"value", check.value},
                   {"threshold", check.threshold},
                   {"detail", check.detail}});
  }
  return arr;
}

OutputGuard::~OutputGuard() {
  if (committed_) return;
  for (const auto& path : paths_) {
    std::error_code ec;
    std::filesystem::remove(path, ec);
  }
}

void OutputGuard::track(const std::string& path) { paths_.push_back(path); }

}  // namespace stratwave
