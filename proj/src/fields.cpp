#include "stratwave/fields.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "stratwave/errors.hpp"

namespace stratwave {

namespace {

// Derivative of the quadratic through three in-layer rows, evaluated at row j.
// Falls back to a one-sided difference for two-row layers.
double row_derivative(const std::vector<double>& coord, const std::vector<double>& f,
                      int begin, int end, int j) {
  if (end - begin < 1) throw InvalidArgumentError("row_derivative: degenerate layer");
  if (end - begin == 1) {
    return (f[end] - f[begin]) / (coord[end] - coord[begin]);
  }
  int a = j - 1, b = j, c = j + 1;
  if (a < begin) {
    a = begin;
    b = begin + 1;
    c = begin + 2;
  } else if (c > end) {
    a = end - 2;
    b = end - 1;
    c = end;
  }
  const double xa = coord[a], xb = coord[b], xc = coord[c];
  const double x = coord[j];
  const double da = ((x - xb) + (x - xc)) / ((xa - xb) * (xa - xc));
  const double db = ((x - xa) + (x - xc)) / ((xb - xa) * (xb - xc));
  const double dc = ((x - xa) + (x - xb)) / ((xc - xa) * (xc - xb));
  return da * f[a] + db * f[b] + dc * f[c];
}

}  // namespace

std::vector<std::pair<int, int>> HeightField::layer_rows() const {
  std::vector<std::pair<int, int>> out;
  int begin = 0;
  for (int r : interface_rows) {
    out.emplace_back(begin, r);
    begin = r;
  }
  out.emplace_back(begin, np() - 1);
  return out;
}

HeightField w_to_height(const WaveField& wave, const DensityProfile& rho,
                        const FlowParameters& params) {
  params.validate();
  const StripGrid& grid = wave.grid;
  ZetaMap map(rho, params);
  HeightField out;
  out.depth = params.d;
  out.q.resize(grid.nx);
  for (int i = 0; i < grid.nx; ++i) out.q[i] = params.d * grid.xi(i);
  out.p.resize(grid.rows());
  for (int j = 0; j < grid.rows(); ++j) out.p[j] = map.p_of_zeta(grid.zeta[j]);
  out.p.front() = rho.p0();
  out.p.back() = 0.0;
  out.h.resize(wave.w.size());
  for (int j = 0; j < grid.rows(); ++j)
    for (int i = 0; i < grid.nx; ++i)
      out.h[j * grid.nx + i] = params.d * (wave.w[grid.node(i, j)] + grid.zeta[j]) + params.d;
  for (int j = 1; j + 1 < grid.rows(); ++j)
    if (rho.is_breakpoint(out.p[j])) out.interface_rows.push_back(j);
  return out;
}

WaveField height_to_w(const HeightField& height, const DensityProfile& rho,
                      const FlowParameters& params) {
  params.validate();
  const int nq = height.nq(), np = height.np();
  for (int i = 0; i < nq; ++i)
    for (int j = 0; j + 1 < np; ++j)
      if (!(height.at(i, j + 1) > height.at(i, j)))
        throw StagnationError("height_to_w: h_p <= 0 at column " + std::to_string(i));
  ZetaMap map(rho, params);
  WaveField wave;
  wave.grid.nx = nq;
  wave.grid.half_period = params.L / params.d;
  wave.grid.zeta.resize(np);
  for (int j = 0; j < np; ++j) wave.grid.zeta[j] = map.zeta(height.p[j]);
  wave.grid.zeta.front() = -1.0;
  wave.grid.zeta.back() = 0.0;
  wave.density_id = rho.id();
  wave.w.resize(height.h.size());
  for (int j = 0; j < np; ++j)
    for (int i = 0; i < nq; ++i)
      wave.w[j * nq + i] =
          (height.at(i, j) - params.d) / params.d - wave.grid.zeta[j];
  return wave;
}

EulerianFields height_to_velocity(const HeightField& height, const DensityProfile& rho,
                                  const FlowParameters& params) {
  params.validate();
  const int nq = height.nq(), np = height.np();
  const double c = wave_speed(rho, params);
  const double dq = height.q.size() > 1 ? height.q[1] - height.q[0] : 1.0;

  EulerianFields out;
  out.speed = c;
  out.x = height.q;
  out.eta.resize(nq);
  for (int i = 0; i < nq; ++i) out.eta[i] = height.at(i, np - 1) - params.d;

  const auto layers = height.layer_rows();
  std::vector<double> hcol(np);
  for (std::size_t L = 0; L < layers.size(); ++L) {
    const auto [ra, rb] = layers[L];
    EulerianFields::LayerBlock block;
    block.layer = static_cast<int>(L);
    block.row_begin = ra;
    block.row_end = rb;
    block.samples.resize((rb - ra + 1) * nq);
    for (int i = 0; i < nq; ++i) {
      for (int j = 0; j < np; ++j) hcol[j] = height.at(i, j);
      for (int j = ra; j <= rb; ++j) {
        const double hp = row_derivative(height.p, hcol, ra, rb, j);
        if (!(hp > 0.0))
          throw StagnationError("height_to_velocity: h_p <= 0 on layer " + std::to_string(L));
        const int im = (i + nq - 1) % nq, ip = (i + 1) % nq;
        const double hq = (height.at(ip, j) - height.at(im, j)) / (2.0 * dq);
        const Side side = (j == ra && L > 0) ? Side::Above : Side::Below;
        const double r = rho.value(height.p[j], side);
        EulerianFields::Sample& s = block.samples[(j - ra) * nq + i];
        s.x = height.q[i];
        s.y = height.at(i, j) - params.d;
        s.u = c - 1.0 / (std::sqrt(r) * hp);
        s.v = -hq / hp;
        s.psi = -height.p[j];
        s.rho = r;
      }
    }
    out.layers.push_back(std::move(block));
  }
  return out;
}

std::vector<double> column_mass_flux(const EulerianFields& fields, const DensityProfile& rho,
                                     const FlowParameters& params) {
  (void)rho;
  const int nq = static_cast<int>(fields.x.size());
  std::vector<double> flux(nq, 0.0);
  const double c = fields.speed;
  (void)params;
  for (const auto& block : fields.layers) {
    const int rows = block.row_end - block.row_begin + 1;
    for (int i = 0; i < nq; ++i) {
      for (int j = 0; j + 1 < rows; ++j) {
        const auto& a = block.samples[j * nq + i];
        const auto& b = block.samples[(j + 1) * nq + i];
        const double fa = std::sqrt(a.rho) * (a.u - c);
        const double fb = std::sqrt(b.rho) * (b.u - c);
        flux[i] += 0.5 * (fa + fb) * (b.y - a.y);
      }
    }
  }
  return flux;
}

namespace {

// Monotone cubic Hermite interpolant of one column of heights over one layer.
struct LayerInterp {
  std::vector<double> p, h, m;  // nodes, values, slopes

  double eval(double pp) const {
    const int k = cell(pp);
    const double dl = p[k + 1] - p[k];
    const double t = (pp - p[k]) / dl;
    const double t2 = t * t, t3 = t2 * t;
    return (2 * t3 - 3 * t2 + 1) * h[k] + (t3 - 2 * t2 + t) * dl * m[k] +
           (-2 * t3 + 3 * t2) * h[k + 1] + (t3 - t2) * dl * m[k + 1];
  }
  double deriv(double pp) const {
    const int k = cell(pp);
    const double dl = p[k + 1] - p[k];
    const double t = (pp - p[k]) / dl;
    return ((6 * t * t - 6 * t) * (h[k] - h[k + 1])) / dl +
           (3 * t * t - 4 * t + 1) * m[k] + (3 * t * t - 2 * t) * m[k + 1];
  }

 private:
  int cell(double pp) const {
    int k = static_cast<int>(std::upper_bound(p.begin(), p.end(), pp) - p.begin()) - 1;
    return std::clamp(k, 0, static_cast<int>(p.size()) - 2);
  }
};

LayerInterp make_layer_interp(const HeightField& height, int col, int ra, int rb) {
  LayerInterp li;
  const int n = rb - ra + 1;
  li.p.resize(n);
  li.h.resize(n);
  li.m.assign(n, 0.0);
  for (int j = 0; j < n; ++j) {
    li.p[j] = height.p[ra + j];
    li.h[j] = height.at(col, ra + j);
  }
  std::vector<double> d(n - 1);
  for (int j = 0; j + 1 < n; ++j) d[j] = (li.h[j + 1] - li.h[j]) / (li.p[j + 1] - li.p[j]);
  if (n == 2) {
    li.m[0] = li.m[1] = d[0];
    return li;
  }
  li.m[0] = d[0];
  li.m[n - 1] = d[n - 2];
  for (int j = 1; j + 1 < n; ++j) li.m[j] = 0.5 * (d[j - 1] + d[j]);
  // Fritsch-Carlson limiter keeps the interpolant monotone.
  for (int j = 0; j + 1 < n; ++j) {
    if (d[j] == 0.0) {
      li.m[j] = li.m[j + 1] = 0.0;
      continue;
    }
    const double a = li.m[j] / d[j], b = li.m[j + 1] / d[j];
    const double norm2 = a * a + b * b;
    if (norm2 > 9.0) {
      const double tau = 3.0 / std::sqrt(norm2);
      li.m[j] = tau * a * d[j];
      li.m[j + 1] = tau * b * d[j];
    }
  }
  return li;
}

}  // namespace

StreamfunctionColumn reconstruct_streamfunction(const HeightField& height,
                                                const DensityProfile& rho,
                                                const FlowParameters& params, double x0,
                                                const std::vector<double>& y_targets) {
  params.validate();
  const int nq = height.nq();
  StreamfunctionColumn out;
  out.x0 = x0;

  // Column heights, linearly interpolated between the two bracketing columns.
  const double period = 2.0 * params.L;
  double qx = x0 - height.q.front();
  qx -= period * std::floor(qx / period);
  const double dq = nq > 1 ? height.q[1] - height.q[0] : period;
  const int i0 = std::min(static_cast<int>(qx / dq), nq - 1);
  const int i1 = (i0 + 1) % nq;
  const double t = qx / dq - i0;
  HeightField col;
  col.depth = height.depth;
  col.q = {x0};
  col.p = height.p;
  col.interface_rows = height.interface_rows;
  col.h.resize(height.np());
  for (int j = 0; j < height.np(); ++j)
    col.h[j] = (1.0 - t) * height.at(i0, j) + t * height.at(i1, j);

  const auto layers = col.layer_rows();
  std::vector<double> targets = y_targets;
  std::sort(targets.begin(), targets.end(), std::greater<double>());

  double y = col.h[height.np() - 1] - params.d;  // surface
  double psi = 0.0;
  out.y.push_back(y);
  out.psi.push_back(psi);
  std::size_t target_idx = 0;
  while (target_idx < targets.size() && targets[target_idx] >= y) ++target_idx;

  const double tol = 1e-11;
  for (int L = static_cast<int>(layers.size()) - 1; L >= 0; --L) {
    const auto [ra, rb] = layers[L];
    const LayerInterp interp = make_layer_interp(col, 0, ra, rb);
    const double y_exit = col.h[ra] - params.d;  // bottom of this layer
    auto rhs = [&](double psi_val) {
      const double p = std::clamp(-psi_val, col.p[ra], col.p[rb]);
      const double hp = interp.deriv(p);
      if (!(hp > 0.0)) {
        char buf[64];
        std::snprintf(buf, sizeof(buf), "%.6g", y);
        throw ConvergenceError(std::string("streamfunction: h_p <= 0 near depth y = ") + buf);
      }
      return -1.0 / hp;
    };
    auto rk4 = [&](double yy, double pp, double hstep) {
      const double k1 = rhs(pp);
      const double k2 = rhs(pp + 0.5 * hstep * k1);
      const double k3 = rhs(pp + 0.5 * hstep * k2);
      const double k4 = rhs(pp + hstep * k3);
      (void)yy;
      return pp + hstep / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    };

    double hstep = -(y - y_exit) / 16.0;
    if (hstep == 0.0) continue;
    int guard = 0;
    while (y > y_exit + 1e-15) {
      if (++guard > 1000000) {
        char buf[64];
        std::snprintf(buf, sizeof(buf), "%.6g", y);
        throw ConvergenceError(std::string("streamfunction: step failure at depth y = ") + buf);
      }
      double h_try = std::max(hstep, y_exit - y);  // steps are negative
      if (target_idx < targets.size() && targets[target_idx] > y + h_try &&
          targets[target_idx] < y)
        h_try = targets[target_idx] - y;
      const double full = rk4(y, psi, h_try);
      const double half1 = rk4(y, psi, 0.5 * h_try);
      const double half2 = rk4(y + 0.5 * h_try, half1, 0.5 * h_try);
      const double err = std::abs(full - half2) / 15.0;
      const double scale = tol * (1.0 + std::abs(half2));
      if (err <= scale) {
        y += h_try;
        psi = half2 + (half2 - full) / 15.0;  // local extrapolation
        out.y.push_back(y);
        out.psi.push_back(psi);
        const double p = std::clamp(-psi, col.p[ra], col.p[rb]);
        out.max_identity_error =
            std::max(out.max_identity_error, std::abs(y - (interp.eval(p) - params.d)));
        ++out.steps;
        if (target_idx < targets.size() && std::abs(y - targets[target_idx]) < 1e-14)
          ++target_idx;
        if (err > 1e-300)
          hstep = std::clamp(0.9 * h_try * std::pow(scale / err, 0.2), 4.0 * h_try,
                             0.25 * h_try);
      } else {
        hstep = 0.5 * h_try;
      }
    }
    y = y_exit;  // land exactly on the interface
  }
  out.bed_value = psi;
  return out;
}

PressureField pressure_field(const HeightField& height, const DensityProfile& rho,
                             const FlowParameters& params, const BernoulliData& bdata) {
  params.validate();
  const int nq = height.nq(), np = height.np();
  const double g = params.g;
  const double dq = nq > 1 ? height.q[1] - height.q[0] : 1.0;
  const auto layers = height.layer_rows();
  if (static_cast<int>(layers.size()) != rho.layer_count())
    throw InvalidArgumentError("pressure_field: height field layers do not match the density");

  PressureField out;
  out.q = height.q;
  out.p = height.p;
  std::vector<double> hcol(np);
  for (std::size_t L = 0; L < layers.size(); ++L) {
    const auto [ra, rb] = layers[L];
    PressureField::LayerBlock block;
    block.layer = static_cast<int>(L);
    block.row_begin = ra;
    block.row_end = rb;
    block.P.resize((rb - ra + 1) * nq);
    const double constant = bdata.layer_constants()[L] + params.P_atm;
    for (int i = 0; i < nq; ++i) {
      for (int j = 0; j < np; ++j) hcol[j] = height.at(i, j);
      for (int j = ra; j <= rb; ++j) {
        const double hp = row_derivative(height.p, hcol, ra, rb, j);
        if (!(hp > 0.0)) throw StagnationError("pressure_field: h_p <= 0");
        const int im = (i + nq - 1) % nq, ip = (i + 1) % nq;
        const double hq = (height.at(ip, j) - height.at(im, j)) / (2.0 * dq);
        const Side side = j == ra ? Side::Above : Side::Below;
        const double r = rho.value(height.p[j], side);
        block.P[(j - ra) * nq + i] = constant - (1.0 + hq * hq) / (2.0 * hp * hp) -
                                     g * r * height.at(i, j) +
                                     bdata.pressure_B(height.p[j], side);
      }
    }
    out.layers.push_back(std::move(block));
  }

  out.bed.resize(nq);
  for (int i = 0; i < nq; ++i) out.bed[i] = out.layers.front().P[i];
  for (const auto& block : out.layers)
    for (double v : block.P) out.sup_abs = std::max(out.sup_abs, std::abs(v));
  const auto& top = out.layers.back();
  for (int i = 0; i < nq; ++i)
    out.surface_error =
        std::max(out.surface_error,
                 std::abs(top.P[(top.row_end - top.row_begin) * nq + i] - params.P_atm));
  for (std::size_t L = 0; L + 1 < out.layers.size(); ++L) {
    const auto& lower = out.layers[L];
    const auto& upper = out.layers[L + 1];
    for (int i = 0; i < nq; ++i) {
      const double below = lower.P[(lower.row_end - lower.row_begin) * nq + i];
      const double above = upper.P[i];
      out.max_interface_jump = std::max(out.max_interface_jump, std::abs(below - above));
    }
  }
  return out;
}

std::vector<double> bed_pressure_trace(const PressureField& pressure) { return pressure.bed; }

}  // namespace stratwave
