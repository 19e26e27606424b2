#pragma once

#include <memory>
#include <vector>

#include "stratwave/density.hpp"

namespace stratwave {

// Bernoulli data of the localized wave class: the Bernoulli function beta, its
// per-layer antiderivative B with B(0) = 0, the surface head Q, the interface
// head jumps Q_i, and the cumulative additive pressure constant of each layer.
//
// Values are immutable after construction and safe to share across threads.
class BernoulliData {
 public:
  BernoulliData(const DensityProfile& rho, const FlowParameters& params);

  double speed() const { return c_; }
  double richardson() const { return lambda_; }
  double Q() const { return Q_; }
  // One entry per interior interface, ordered bottom to top; entry i belongs
  // to the interface between layers i and i+1.
  const std::vector<double>& Q_jumps() const { return q_jumps_; }
  // One entry per layer, bottom to top. Top layer holds Q/2; crossing
  // interface i downward adds Q_i/2 so the pressure stays continuous.
  const std::vector<double>& layer_constants() const { return layer_constants_; }

  // beta evaluated on streamline p; undefined at interfaces.
  double beta(double p) const;
  // B(p) = int_0^p beta(-s) ds, jump contributions excluded.
  double B(double p) const;
  // Antiderivative entering the semi-Lagrangian pressure formula. Differs
  // from B by g d (rho(p) - rho(0)); the difference is what keeps the laminar
  // pressure hydrostatic for smoothly varying density.
  double pressure_B(double p, Side side = Side::Below) const;

  const DensityProfile& profile() const { return map_->profile(); }
  const FlowParameters& parameters() const { return map_->parameters(); }
  const ZetaMap& zeta_map() const { return *map_; }

 private:
  std::shared_ptr<const ZetaMap> map_;
  double c_ = 0.0;
  double lambda_ = 0.0;
  double Q_ = 0.0;
  std::vector<double> q_jumps_;
  std::vector<double> layer_constants_;
  std::vector<double> b_breaks_;  // B at the profile breakpoints
};

double bernoulli_function(const DensityProfile& rho, const FlowParameters& params, double p);
double bernoulli_integral(const DensityProfile& rho, const FlowParameters& params, double p);

struct HeadConstants {
  double Q;
  std::vector<double> q_jumps;
  std::vector<double> layer_constants;
};

HeadConstants head_constants(const DensityProfile& rho, const FlowParameters& params);

}  // namespace stratwave
