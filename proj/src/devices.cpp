#include "lddl/devices.hpp"

#include <cmath>

#include "lddl/error.hpp"

namespace lddl {

int device_bus(const Device& d) noexcept {
  return std::visit([](const auto& dev) { return dev.bus; }, d);
}

SgRates sg_derivatives(const SynchronousGenerator& gen, const SgState& s,
                       double p_e, double omega0) noexcept {
  SgRates r;
  r.d_delta = s.omega - omega0;
  r.d_omega =
      (gen.damping * (omega0 - s.omega) + gen.mech_power - p_e) / gen.inertia;
  return r;
}

GfmRates gfm_derivatives(const GfmInverter& inv, const GfmState& s, double p,
                         double q, double v, double p_ai,
                         double omega0) noexcept {
  GfmRates r;
  r.d_delta = s.omega - omega0;
  r.d_omega =
      (omega0 - s.omega + inv.m_p * (inv.p_set - s.p_l - p)) / inv.tau;
  r.d_v_err = (inv.v_set - v - s.v_err + inv.m_q * (inv.q_set - q)) / inv.tau;
  // E integrates the PI voltage loop driven by the fresh V^e rate.
  r.d_e = inv.k_pv * r.d_v_err + inv.k_iv * s.v_err;
  r.d_p_l = (p_ai - s.p_l) / inv.t_l;
  return r;
}

double equivalent_inertia(double m_p, double tau) {
  if (!(tau > 0.0) || !std::isfinite(tau)) {
    throw DomainError("equivalent_inertia: time constant must be positive");
  }
  return m_p / tau;
}

DevicePower source_power(double e, double delta, double v, double theta,
                         double x) noexcept {
  const double angle = delta - theta;
  return {e * v * std::sin(angle) / x, (e * v * std::cos(angle) - v * v) / x};
}

}  // namespace lddl
