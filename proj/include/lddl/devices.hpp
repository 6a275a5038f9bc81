#pragma once

#include <variant>

#include "lddl/workload.hpp"

namespace lddl {

/// Classical synchronous machine: constant EMF behind transient reactance,
/// swing dynamics in (delta, omega). Omega in rad/s, powers in p.u.
struct SynchronousGenerator {
  int bus = 0;
  double inertia = 0.1;       // M
  double damping = 0.05;      // D, p.u. power per rad/s
  double mech_power = 0.0;    // P
  double reactance = 0.3;     // x'd between internal EMF and terminal bus
  double v_set = 1.0;         // terminal voltage used for initialization
  double emf = 1.0;           // E', back-solved by equilibrium initialization
};

/// Droop grid-forming inverter fronting an LDDL through a first-order filter.
struct GfmInverter {
  int bus = 0;
  double m_p = 18.85;         // P-omega droop, rad/s per p.u.
  double m_q = 0.05;          // Q-V droop
  double tau = 0.05;          // power-loop low-pass time constant, s
  double k_pv = 0.5;
  double k_iv = 5.0;
  double p_set = 0.0;
  double q_set = 0.0;
  double v_set = 1.0;
  double t_l = 0.1;           // LDDL interface filter, s
  double reactance = 0.05;    // coupling reactance to terminal bus
};

using Device = std::variant<SynchronousGenerator, GfmInverter>;

/// Data-center demand attached behind the GFM inverter at `bus`. The demand
/// seen by the filter is gain * (mean + fluctuation_scale * (P - mean)).
struct LddlAttachment {
  int bus = 0;
  LoadProfile profile;
  double fluctuation_scale = 1.0;
  double gain = 1.0;
};

int device_bus(const Device& d) noexcept;

struct SgState {
  double delta = 0.0;
  double omega = 0.0;
};

struct SgRates {
  double d_delta = 0.0;
  double d_omega = 0.0;
};

struct GfmState {
  double delta = 0.0;
  double omega = 0.0;
  double v_err = 0.0;  // V^e, voltage-loop auxiliary state
  double e = 1.0;      // internal voltage magnitude
  double p_l = 0.0;    // filtered LDDL consumption
};

struct GfmRates {
  double d_delta = 0.0;
  double d_omega = 0.0;
  double d_v_err = 0.0;
  double d_e = 0.0;
  double d_p_l = 0.0;
};

/// Swing equation. `p_e` is the electrical output of the machine.
SgRates sg_derivatives(const SynchronousGenerator& gen, const SgState& s,
                       double p_e, double omega0) noexcept;

/// Droop GFM with LDDL filter. `p`, `q` are the inverter's net electrical
/// injection at its terminal, `v` the terminal voltage magnitude and `p_ai`
/// the instantaneous data-center demand.
GfmRates gfm_derivatives(const GfmInverter& inv, const GfmState& s, double p,
                         double q, double v, double p_ai,
                         double omega0) noexcept;

/// m_p / tau. Throws DomainError unless tau > 0.
double equivalent_inertia(double m_p, double tau);

/// Complex power delivered by an internal source e∠delta through reactance x
/// into a bus at v∠theta.
struct DevicePower {
  double p = 0.0;
  double q = 0.0;
};
DevicePower source_power(double e, double delta, double v, double theta,
                         double x) noexcept;

}  // namespace lddl
