#pragma once

#include <array>
#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace stratwave {

// One-sided evaluation selector at layer interfaces. Below = denser side
// (smaller p or zeta), Above = lighter side.
enum class Side { Below, Above };

// Polynomial of degree <= 3, constant-first coefficients.
struct Piece {
  std::array<double, 4> c{0.0, 0.0, 0.0, 0.0};

  double eval(double p) const { return c[0] + p * (c[1] + p * (c[2] + p * c[3])); }
  double deriv(double p) const { return c[1] + p * (2.0 * c[2] + p * 3.0 * c[3]); }
};

struct FlowParameters {
  double d = 1.0;      // ocean depth
  double g = 1.0;      // gravitational acceleration
  double L = 8.0;      // half period
  double P_atm = 0.0;  // surface reference pressure

  double half_period_ratio() const { return L / d; }
  void validate() const;
};

// Stable streamline density: positive, non-increasing on [p0, 0], rho(0) = 1,
// piecewise polynomial between the layer breakpoints p0 = q_0 < ... < q_N = 0.
class DensityProfile {
 public:
  DensityProfile(std::vector<double> breakpoints, std::vector<Piece> pieces);

  // Positive stable profile without the surface normalization rho(0) = 1;
  // admissible for the speed and height maps, but not for the wave theory.
  static DensityProfile unnormalized(std::vector<double> breakpoints,
                                     std::vector<Piece> pieces);

  double p0() const { return breaks_.front(); }
  const std::vector<double>& breakpoints() const { return breaks_; }
  const std::vector<Piece>& pieces() const { return pieces_; }
  int layer_count() const { return static_cast<int>(pieces_.size()); }

  double value(double p, Side side = Side::Below) const;
  // d(rho)/dp inside a layer; one-sided at the breakpoints.
  double slope(double p, Side side = Side::Below) const;

  bool is_breakpoint(double p, double tol = 1e-12) const;
  int piece_index(double p, Side side) const;

  // Short content hash used to tag downstream artifacts.
  std::string id() const;

 private:
  struct UnnormalizedTag {};
  DensityProfile(std::vector<double> breakpoints, std::vector<Piece> pieces, UnnormalizedTag);
  void validate(bool require_surface_normalization);

  std::vector<double> breaks_;
  std::vector<Piece> pieces_;
};

// Laminar height map of a profile: hcheck(p) = int_{p0}^p ds / (c sqrt(rho)),
// zeta(p) = hcheck(p)/d - 1, and the numerically inverted p(zeta).
class ZetaMap {
 public:
  ZetaMap(const DensityProfile& rho, const FlowParameters& params);

  double speed() const { return c_; }
  double hcheck(double p) const;
  double zeta(double p) const;
  double p_of_zeta(double z) const;
  // Breakpoints mapped into zeta, same indexing as the profile's.
  const std::vector<double>& zeta_breakpoints() const { return zeta_breaks_; }

  const DensityProfile& profile() const { return rho_; }
  const FlowParameters& parameters() const { return params_; }

 private:
  DensityProfile rho_;
  FlowParameters params_;
  double c_ = 0.0;
  std::vector<double> hcheck_breaks_;
  std::vector<double> zeta_breaks_;
};

// Density as a function of the rescaled streamline coordinate zeta on [-1, 0].
// Supports affine blends of two profiles, which is why evaluation is stored as
// closures rather than a concrete piecewise form.
struct RescaledDensity {
  std::vector<double> breakpoints;  // in zeta, includes -1 and 0
  std::string id;
  std::function<double(double, Side)> value;
  std::function<double(double, Side)> slope;  // d(rho)/d(zeta), one-sided

  double operator()(double z) const { return value(z, Side::Below); }
  double at_bed() const { return value(-1.0, Side::Above); }
  double at_surface() const { return value(0.0, Side::Below); }
  double jump_at(double z) const { return value(z, Side::Below) - value(z, Side::Above); }
};

// c = (1/d) int_{p0}^0 rho^{-1/2} ds, per-piece Gauss-Legendre.
double wave_speed(const DensityProfile& rho, const FlowParameters& params);

// (1/d) int_{p0}^0 (rho_star - rho) / (rho sqrt(rho_star) + rho_star sqrt(rho)) ds,
// algebraically identical to wave_speed(rho) - wave_speed(rho_star).
double wave_speed_delta(const DensityProfile& rho, const DensityProfile& rho_star,
                        const FlowParameters& params);

double limiting_height(const DensityProfile& rho, const FlowParameters& params, double p);
double zeta_of_p(const DensityProfile& rho, const FlowParameters& params, double p);
double p_of_zeta(const DensityProfile& rho, const FlowParameters& params, double z);

RescaledDensity rescale_density(const DensityProfile& rho, const FlowParameters& params);
RescaledDensity blend_densities(const RescaledDensity& a, const RescaledDensity& b, double t);

struct QuantizeResult {
  DensityProfile profile;
  double sup_error;  // || rho_N - rho_star ||_inf by dense sampling
};

// N-layer piecewise-constant approximation: equal-width layers in p, midpoint
// values, monotone clamp, top layer pinned to rho_star(0).
QuantizeResult layer_quantize(const DensityProfile& rho_star, int layers);

}  // namespace stratwave
