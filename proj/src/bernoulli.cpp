#include "stratwave/bernoulli.hpp"

#include <cmath>

#include "stratwave/errors.hpp"
#include "stratwave/quadrature.hpp"

namespace stratwave {

BernoulliData::BernoulliData(const DensityProfile& rho, const FlowParameters& params)
    : map_(std::make_shared<ZetaMap>(rho, params)) {
  c_ = map_->speed();
  const double g = params.g, d = params.d;
  lambda_ = g * d / (c_ * c_);

  const double rho_surface = rho.value(0.0, Side::Below);
  Q_ = rho_surface * c_ * c_ + 2.0 * g * rho_surface * d;

  const auto& breaks = rho.breakpoints();
  const int layers = rho.layer_count();
  q_jumps_.resize(layers > 0 ? layers - 1 : 0);
  for (int i = 0; i + 1 < layers; ++i) {
    const double q = breaks[i + 1];
    const double jump = rho.value(q, Side::Below) - rho.value(q, Side::Above);
    q_jumps_[i] = jump * (c_ * c_ + 2.0 * g * map_->hcheck(q));
  }
  layer_constants_.assign(layers, 0.0);
  layer_constants_[layers - 1] = 0.5 * Q_;
  for (int i = layers - 2; i >= 0; --i)
    layer_constants_[i] = layer_constants_[i + 1] + 0.5 * q_jumps_[i];

  // Cumulative B at breakpoints, integrating downward from B(0) = 0.
  b_breaks_.assign(breaks.size(), 0.0);
  for (int i = layers - 1; i >= 0; --i) {
    const Piece& piece = rho.pieces()[i];
    auto integrand = [&](double s) {
      return piece.deriv(s) * (0.5 * c_ * c_ + g * (map_->hcheck(s) - d));
    };
    const double seg = integrate(integrand, breaks[i], breaks[i + 1], 16);
    b_breaks_[i] = b_breaks_[i + 1] - seg;
  }
}

double BernoulliData::beta(double p) const {
  const DensityProfile& rho = profile();
  if (rho.is_breakpoint(p))
    throw InvalidArgumentError("beta: interface point, Bernoulli function undefined there");
  const double g = parameters().g, d = parameters().d;
  return rho.slope(p, Side::Below) * (0.5 * c_ * c_ + g * (map_->hcheck(p) - d));
}

double BernoulliData::B(double p) const {
  const DensityProfile& rho = profile();
  const auto& breaks = rho.breakpoints();
  if (p < breaks.front() - 1e-12 || p > 1e-12)
    throw InvalidArgumentError("B: p outside [p0, 0]");
  p = std::clamp(p, breaks.front(), 0.0);
  const int i = rho.piece_index(p, Side::Above);
  const Piece& piece = rho.pieces()[i];
  const double g = parameters().g, d = parameters().d;
  auto integrand = [&](double s) {
    return piece.deriv(s) * (0.5 * c_ * c_ + g * (map_->hcheck(s) - d));
  };
  return b_breaks_[i + 1] - integrate(integrand, p, breaks[i + 1], 16);
}

double BernoulliData::pressure_B(double p, Side side) const {
  const DensityProfile& rho = profile();
  const double g = parameters().g, d = parameters().d;
  return B(p) + g * d * (rho.value(p, side) - rho.value(0.0, Side::Below));
}

double bernoulli_function(const DensityProfile& rho, const FlowParameters& params, double p) {
  return BernoulliData(rho, params).beta(p);
}

double bernoulli_integral(const DensityProfile& rho, const FlowParameters& params, double p) {
  return BernoulliData(rho, params).B(p);
}

HeadConstants head_constants(const DensityProfile& rho, const FlowParameters& params) {
  BernoulliData data(rho, params);
  return HeadConstants{data.Q(), data.Q_jumps(), data.layer_constants()};
}

}  // namespace stratwave
