#include "stratwave/density.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <sstream>

#include "stratwave/errors.hpp"
#include "stratwave/quadrature.hpp"

namespace stratwave {

namespace {

constexpr int kSpeedQuadOrder = 16;
constexpr int kMonotoneSamples = 64;
constexpr double kMonotoneSlack = 1e-11;

std::string hash_tag(const std::string& text) {
  // FNV-1a, hex-truncated; only used to label artifacts.
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return std::string(buf, 12);
}

}  // namespace

void FlowParameters::validate() const {
  if (!(d > 0.0) || !(g > 0.0) || !(L > 0.0))
    throw InvalidArgumentError("flow parameters: d, g, L must be positive");
  if (L / d < 4.0)
    throw InvalidArgumentError("flow parameters: require L/d >= 4 so the wave has room to decay");
}

DensityProfile::DensityProfile(std::vector<double> breakpoints, std::vector<Piece> pieces)
    : breaks_(std::move(breakpoints)), pieces_(std::move(pieces)) {
  validate(true);
}

DensityProfile::DensityProfile(std::vector<double> breakpoints, std::vector<Piece> pieces,
                               UnnormalizedTag)
    : breaks_(std::move(breakpoints)), pieces_(std::move(pieces)) {
  validate(false);
}

DensityProfile DensityProfile::unnormalized(std::vector<double> breakpoints,
                                            std::vector<Piece> pieces) {
  return DensityProfile(std::move(breakpoints), std::move(pieces), UnnormalizedTag{});
}

void DensityProfile::validate(bool require_surface_normalization) {
  if (breaks_.size() < 2 || pieces_.size() + 1 != breaks_.size())
    throw InvalidProfileError("density: need N+1 breakpoints for N pieces");
  if (std::abs(breaks_.back()) > 1e-12)
    throw InvalidProfileError("density: last breakpoint must be 0");
  breaks_.back() = 0.0;
  if (!(breaks_.front() < 0.0)) throw InvalidProfileError("density: p0 must be negative");
  for (std::size_t i = 0; i + 1 < breaks_.size(); ++i)
    if (!(breaks_[i] < breaks_[i + 1]))
      throw InvalidProfileError("density: breakpoints must be strictly increasing");

  for (std::size_t i = 0; i < pieces_.size(); ++i) {
    const Piece& piece = pieces_[i];
    const double a = breaks_[i], b = breaks_[i + 1];
    for (int k = 0; k <= kMonotoneSamples; ++k) {
      const double p = a + (b - a) * k / kMonotoneSamples;
      const double v = piece.eval(p);
      if (!(v > 1e-12))
        throw InvalidProfileError("density: piece " + std::to_string(i) +
                                  " is not strictly positive");
      if (piece.deriv(p) > kMonotoneSlack * std::max(1.0, std::abs(v)))
        throw InvalidProfileError("density: piece " + std::to_string(i) +
                                  " is increasing in p (unstable stratification)");
    }
    // Endpoint derivative sign check, in addition to the sample sweep.
    if (piece.deriv(a) > kMonotoneSlack || piece.deriv(b) > kMonotoneSlack)
      throw InvalidProfileError("density: piece " + std::to_string(i) +
                                " has positive slope at an endpoint");
  }
  for (std::size_t i = 1; i + 1 < breaks_.size(); ++i) {
    if (pieces_[i - 1].eval(breaks_[i]) + 1e-12 < pieces_[i].eval(breaks_[i]))
      throw InvalidProfileError("density: jump at breakpoint " + std::to_string(i) +
                                " increases upward (unstable stratification)");
  }
  if (require_surface_normalization && std::abs(pieces_.back().eval(0.0) - 1.0) > 1e-9)
    throw InvalidProfileError("density: rho(0) must equal 1");
}

int DensityProfile::piece_index(double p, Side side) const {
  const double lo = breaks_.front(), hi = breaks_.back();
  if (p < lo - 1e-12 || p > hi + 1e-12)
    throw InvalidArgumentError("density: p outside [p0, 0]");
  p = std::clamp(p, lo, hi);
  auto it = std::upper_bound(breaks_.begin(), breaks_.end(), p);
  int idx = static_cast<int>(it - breaks_.begin()) - 1;
  idx = std::clamp(idx, 0, layer_count() - 1);
  // Snap onto a breakpoint and resolve by side.
  for (std::size_t i = 1; i + 1 < breaks_.size(); ++i) {
    if (std::abs(p - breaks_[i]) <= 1e-12) {
      return side == Side::Below ? static_cast<int>(i) - 1 : static_cast<int>(i);
    }
  }
  return idx;
}

double DensityProfile::value(double p, Side side) const {
  return pieces_[piece_index(p, side)].eval(std::clamp(p, breaks_.front(), breaks_.back()));
}

double DensityProfile::slope(double p, Side side) const {
  return pieces_[piece_index(p, side)].deriv(std::clamp(p, breaks_.front(), breaks_.back()));
}

bool DensityProfile::is_breakpoint(double p, double tol) const {
  for (std::size_t i = 1; i + 1 < breaks_.size(); ++i)
    if (std::abs(p - breaks_[i]) <= tol) return true;
  return false;
}

std::string DensityProfile::id() const {
  std::ostringstream os;
  char buf[32];
  for (double b : breaks_) {
    std::snprintf(buf, sizeof(buf), "%.17g,", b);
    os << buf;
  }
  for (const Piece& piece : pieces_)
    for (double coeff : piece.c) {
      std::snprintf(buf, sizeof(buf), "%.17g,", coeff);
      os << buf;
    }
  return "rho-" + hash_tag(os.str());
}

double wave_speed(const DensityProfile& rho, const FlowParameters& params) {
  params.validate();
  double total = 0.0;
  const auto& breaks = rho.breakpoints();
  for (int i = 0; i < rho.layer_count(); ++i) {
    const Piece& piece = rho.pieces()[i];
    total += integrate([&](double s) { return 1.0 / std::sqrt(piece.eval(s)); }, breaks[i],
                       breaks[i + 1], kSpeedQuadOrder);
  }
  const double c = total / params.d;
  if (!(c > 0.0)) throw InvalidProfileError("wave_speed: non-positive speed");
  return c;
}

double wave_speed_delta(const DensityProfile& rho, const DensityProfile& rho_star,
                        const FlowParameters& params) {
  params.validate();
  if (std::abs(rho.p0() - rho_star.p0()) > 1e-14)
    throw InvalidArgumentError("wave_speed_delta: profiles must share p0");
  // Quadrature on the union of both breakpoint sets keeps the integrand smooth
  // on every subinterval.
  std::vector<double> knots = rho.breakpoints();
  knots.insert(knots.end(), rho_star.breakpoints().begin(), rho_star.breakpoints().end());
  std::sort(knots.begin(), knots.end());
  knots.erase(std::unique(knots.begin(), knots.end(),
                          [](double a, double b) { return std::abs(a - b) < 1e-14; }),
              knots.end());
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < knots.size(); ++i) {
    auto f = [&](double s) {
      const double r = rho.value(s, Side::Above);
      const double rs = rho_star.value(s, Side::Above);
      return (rs - r) / (r * std::sqrt(rs) + rs * std::sqrt(r));
    };
    total += integrate(f, knots[i] + 0.0, knots[i + 1], kSpeedQuadOrder);
  }
  return total / params.d;
}

ZetaMap::ZetaMap(const DensityProfile& rho, const FlowParameters& params)
    : rho_(rho), params_(params) {
  c_ = wave_speed(rho, params);
  const auto& breaks = rho_.breakpoints();
  hcheck_breaks_.assign(breaks.size(), 0.0);
  for (int i = 0; i < rho_.layer_count(); ++i) {
    const Piece& piece = rho_.pieces()[i];
    const double seg = integrate([&](double s) { return 1.0 / (c_ * std::sqrt(piece.eval(s))); },
                                 breaks[i], breaks[i + 1], kSpeedQuadOrder);
    hcheck_breaks_[i + 1] = hcheck_breaks_[i] + seg;
  }
  zeta_breaks_.resize(breaks.size());
  for (std::size_t i = 0; i < breaks.size(); ++i)
    zeta_breaks_[i] = hcheck_breaks_[i] / params_.d - 1.0;
  zeta_breaks_.front() = -1.0;
  zeta_breaks_.back() = 0.0;  // hcheck(0) = d up to quadrature consistency
}

double ZetaMap::hcheck(double p) const {
  const auto& breaks = rho_.breakpoints();
  if (p < breaks.front() - 1e-12 || p > 1e-12)
    throw InvalidArgumentError("hcheck: p outside [p0, 0]");
  p = std::clamp(p, breaks.front(), 0.0);
  const int i = rho_.piece_index(p, Side::Below);
  const Piece& piece = rho_.pieces()[i];
  return hcheck_breaks_[i] +
         integrate([&](double s) { return 1.0 / (c_ * std::sqrt(piece.eval(s))); }, breaks[i], p,
                   kSpeedQuadOrder);
}

double ZetaMap::zeta(double p) const { return hcheck(p) / params_.d - 1.0; }

double ZetaMap::p_of_zeta(double z) const {
  if (z < -1.0 - 1e-12 || z > 1e-12) throw InvalidArgumentError("p_of_zeta: zeta outside [-1, 0]");
  z = std::clamp(z, -1.0, 0.0);
  const auto& breaks = rho_.breakpoints();
  // Locate the layer, then bracketed Newton on zeta(p) - z.
  int i = 0;
  while (i + 1 < static_cast<int>(zeta_breaks_.size()) - 1 && z > zeta_breaks_[i + 1]) ++i;
  if (std::abs(z - zeta_breaks_[i]) < 1e-15) return breaks[i];
  if (std::abs(z - zeta_breaks_[i + 1]) < 1e-15) return breaks[i + 1];
  double lo = breaks[i], hi = breaks[i + 1];
  double p = lo + (hi - lo) * (z - zeta_breaks_[i]) / (zeta_breaks_[i + 1] - zeta_breaks_[i]);
  for (int iter = 0; iter < 100; ++iter) {
    const double err = zeta(p) - z;
    if (std::abs(err) < 1e-13) return p;
    if (err > 0.0)
      hi = p;
    else
      lo = p;
    const double dzdp = 1.0 / (c_ * params_.d * std::sqrt(rho_.value(p, Side::Below)));
    double next = p - err / dzdp;
    if (!(next > lo) || !(next < hi)) next = 0.5 * (lo + hi);
    p = next;
  }
  throw ConvergenceError("p_of_zeta: inversion did not reach 1e-13");
}

double limiting_height(const DensityProfile& rho, const FlowParameters& params, double p) {
  return ZetaMap(rho, params).hcheck(p);
}

double zeta_of_p(const DensityProfile& rho, const FlowParameters& params, double p) {
  return ZetaMap(rho, params).zeta(p);
}

double p_of_zeta(const DensityProfile& rho, const FlowParameters& params, double z) {
  return ZetaMap(rho, params).p_of_zeta(z);
}

RescaledDensity rescale_density(const DensityProfile& rho, const FlowParameters& params) {
  auto map = std::make_shared<ZetaMap>(rho, params);
  RescaledDensity out;
  out.breakpoints = map->zeta_breakpoints();
  out.id = rho.id();
  const double cd = map->speed() * params.d;
  out.value = [map](double z, Side side) {
    return map->profile().value(map->p_of_zeta(z), side);
  };
  // d(rho°)/d(zeta) = rho'(p) * dp/dzeta with dp/dzeta = c d sqrt(rho).
  out.slope = [map, cd](double z, Side side) {
    const double p = map->p_of_zeta(z);
    const double r = map->profile().value(p, side);
    return map->profile().slope(p, side) * cd * std::sqrt(r);
  };
  return out;
}

RescaledDensity blend_densities(const RescaledDensity& a, const RescaledDensity& b, double t) {
  RescaledDensity out;
  out.breakpoints = a.breakpoints;
  out.breakpoints.insert(out.breakpoints.end(), b.breakpoints.begin(), b.breakpoints.end());
  std::sort(out.breakpoints.begin(), out.breakpoints.end());
  out.breakpoints.erase(std::unique(out.breakpoints.begin(), out.breakpoints.end(),
                                    [](double x, double y) { return std::abs(x - y) < 1e-13; }),
                        out.breakpoints.end());
  out.id = a.id + "+" + b.id;
  auto va = a.value, vb = b.value, sa = a.slope, sb = b.slope;
  out.value = [va, vb, t](double z, Side side) {
    return (1.0 - t) * va(z, side) + t * vb(z, side);
  };
  out.slope = [sa, sb, t](double z, Side side) {
    return (1.0 - t) * sa(z, side) + t * sb(z, side);
  };
  return out;
}

QuantizeResult layer_quantize(const DensityProfile& rho_star, int layers) {
  if (layers < 1) throw InvalidArgumentError("layer_quantize: need at least one layer");
  const double p0 = rho_star.p0();
  const double width = -p0 / layers;

  std::vector<double> breaks(layers + 1);
  for (int i = 0; i <= layers; ++i) breaks[i] = p0 + width * i;
  breaks.back() = 0.0;

  std::vector<double> constants(layers);
  for (int i = 0; i < layers; ++i)
    constants[i] = rho_star.value(0.5 * (breaks[i] + breaks[i + 1]), Side::Below);
  // Monotone clamp upward, then pin the surface layer to rho_star(0).
  for (int i = 1; i < layers; ++i) constants[i] = std::min(constants[i], constants[i - 1]);
  constants[layers - 1] = rho_star.value(0.0, Side::Below);
  for (int i = layers - 2; i >= 0; --i) constants[i] = std::max(constants[i], constants[i + 1]);

  std::vector<Piece> pieces(layers);
  for (int i = 0; i < layers; ++i) pieces[i].c = {constants[i], 0.0, 0.0, 0.0};
  QuantizeResult result{DensityProfile(breaks, pieces), 0.0};

  const int samples = 4096;
  double err = 0.0;
  for (int k = 0; k <= samples; ++k) {
    const double p = p0 + (0.0 - p0) * k / samples;
    err = std::max(err, std::abs(result.profile.value(p, Side::Below) -
                                 rho_star.value(p, Side::Below)));
    err = std::max(err, std::abs(result.profile.value(p, Side::Above) -
                                 rho_star.value(p, Side::Above)));
  }
  // Both one-sided limits at the quantized breakpoints.
  for (int i = 1; i < layers; ++i) {
    for (Side side : {Side::Below, Side::Above})
      err = std::max(err, std::abs(result.profile.value(breaks[i], side) -
                                   rho_star.value(breaks[i], side)));
  }
  result.sup_error = err;
  return result;
}

}  // namespace stratwave
