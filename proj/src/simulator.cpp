#include "lddl/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <complex>

namespace lddl {

void validate(const Scenario& sc) {
  if (!(sc.dt > 0.0) || !std::isfinite(sc.dt)) {
    throw ConfigError("dt", "must be positive");
  }
  if (!(sc.horizon > 0.0) || !std::isfinite(sc.horizon)) {
    throw ConfigError("horizon", "must be positive");
  }
  const double ratio = sc.output_dt / sc.dt;
  if (!(ratio >= 1.0 - 1e-9) ||
      std::abs(ratio - std::round(ratio)) > 1e-6 * ratio) {
    throw ConfigError("output_dt", "must be a positive multiple of dt");
  }
  for (std::size_t i = 0; i < sc.lddl.size(); ++i) {
    const LddlAttachment& a = sc.lddl[i];
    const std::string field = "lddl[" + std::to_string(i) + "]";
    if (!(a.fluctuation_scale > 0.0)) {
      throw ConfigError(field + ".fluctuation_scale", "must be positive");
    }
    if (!(a.gain > 0.0)) throw ConfigError(field + ".gain", "must be positive");
    try {
      validate(a.profile);
    } catch (const IngestError& e) {
      throw ConfigError(field + ".profile", e.what());
    }
    const auto& t = a.profile.t;
    const double last_gap = t.size() > 1 ? t.back() - t[t.size() - 2] : 0.0;
    if (t.front() > 1e-12 || t.back() + last_gap < sc.horizon - 1e-9) {
      throw ConfigError(field + ".profile", "does not cover the horizon");
    }
  }
}

std::vector<LoadProfile> effective_profiles(const Scenario& sc) {
  std::vector<LoadProfile> out;
  out.reserve(sc.lddl.size());
  for (const LddlAttachment& a : sc.lddl) {
    LoadProfile p = transform_profile(to_per_unit(a.profile, sc.model.base_mva),
                                      a.fluctuation_scale);
    for (double& v : p.value) v *= a.gain;
    out.push_back(std::move(p));
  }
  return out;
}

namespace {

std::vector<int> lddl_bus_ids(const Scenario& sc) {
  std::vector<int> ids;
  for (const auto& a : sc.lddl) ids.push_back(a.bus);
  return ids;
}

std::size_t default_reference(const GridModel& m) {
  std::optional<std::size_t> best;
  std::optional<std::size_t> any_device;
  for (const Device& d : m.devices) {
    const std::size_t bi = m.bus_index(device_bus(d));
    const int id = m.buses[bi].id;
    if (std::holds_alternative<SynchronousGenerator>(d)) {
      if (!best || id < m.buses[*best].id) best = bi;
    }
    if (!any_device || id < m.buses[*any_device].id) any_device = bi;
  }
  if (best) return *best;
  if (any_device) return *any_device;
  throw ModelError("model has no devices to act as angle reference");
}

// Plain Newton on g(x, p) = 0 for p with a fresh Jacobian each iteration.
Eigen::VectorXd newton_algebraic(const DaeSystem& sys, const Eigen::VectorXd& x,
                                 const Eigen::VectorXd& u,
                                 const Eigen::VectorXd& v, Eigen::VectorXd p,
                                 double tol, int max_iter) {
  for (int it = 0;; ++it) {
    const Eigen::VectorXd r = sys.g(x, p, u, v);
    const double norm = r.lpNorm<Eigen::Infinity>();
    if (norm < tol) return p;
    if (it >= max_iter || !std::isfinite(norm)) {
      throw ConvergenceError("algebraic solve did not converge (residual " +
                             std::to_string(norm) + ")");
    }
    p -= sys.g_jacobian(x, p).partialPivLu().solve(r);
  }
}

}  // namespace

Equilibrium equilibrium_at(const GridModel& model,
                           std::span<const int> lddl_buses,
                           std::span<const double> loads,
                           std::optional<int> reference_bus,
                           const PowerFlowOptions& pf_opts) {
  if (loads.size() != lddl_buses.size()) {
    throw ModelError("one demand value per LDDL required");
  }
  const DaeSystem probe(model, {lddl_buses.begin(), lddl_buses.end()});
  const std::size_t n = model.buses.size();
  const std::size_t ref =
      reference_bus ? model.bus_index(*reference_bus) : default_reference(model);
  if (!model.device_at(ref)) {
    throw ModelError("reference bus " + std::to_string(model.buses[ref].id) +
                     " carries no device");
  }

  auto demand_of = [&](std::size_t device) {
    for (std::size_t l = 0; l < probe.num_loads(); ++l) {
      if (probe.lddl_device(l) == device) return loads[l];
    }
    return 0.0;
  };

  std::vector<BusInjection> inj(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Bus& b = model.buses[i];
    inj[i].p = -b.load_p;
    inj[i].q = -b.load_q;
    if (const auto k = model.device_at(i)) {
      const Device& d = model.devices[*k];
      inj[i].type = i == ref ? BusType::reference : BusType::pv;
      if (const auto* g = std::get_if<SynchronousGenerator>(&d)) {
        inj[i].p += g->mech_power;
        inj[i].v = g->v_set;
      } else {
        const auto& inv = std::get<GfmInverter>(d);
        inj[i].p += inv.p_set - demand_of(*k);
        inj[i].v = inv.v_set;
      }
    }
  }
  const PowerFlowSolution pf = solve_power_flow(model, inj, std::nullopt, pf_opts);
  const BusPowers net = network_injections(model, pf.v, pf.theta);

  // Back-solve internal sources from the terminal solution.
  GridModel adjusted = model;
  Eigen::VectorXd x(static_cast<Eigen::Index>(probe.num_states()));
  const double w0 = model.omega0();
  for (std::size_t k = 0; k < model.devices.size(); ++k) {
    const std::size_t bi = probe.device_bus_index(k);
    const Bus& b = model.buses[bi];
    const std::complex<double> s(net.p[bi] + b.load_p, net.q[bi] + b.load_q);
    const std::complex<double> vt = std::polar(pf.v[bi], pf.theta[bi]);
    const double xr =
        std::visit([](const auto& d) { return d.reactance; }, model.devices[k]);
    const std::complex<double> e =
        vt + std::complex<double>(0.0, xr) * std::conj(s / vt);
    const auto o = static_cast<Eigen::Index>(probe.state_offset(k));
    x(o) = std::arg(e);
    x(o + 1) = w0;
    if (auto* g = std::get_if<SynchronousGenerator>(&adjusted.devices[k])) {
      g->emf = std::abs(e);
    } else {
      x(o + 2) = 0.0;
      x(o + 3) = std::abs(e);
      x(o + 4) = demand_of(k);
    }
  }

  // Tighten the network solution for the back-solved sources, then pin the
  // setpoints to the exact device powers so every derivative vanishes.
  const std::vector<int> lddl(lddl_buses.begin(), lddl_buses.end());
  const DaeSystem with_emf(adjusted, lddl);
  Eigen::VectorXd p(static_cast<Eigen::Index>(2 * n));
  for (std::size_t i = 0; i < n; ++i) {
    p(static_cast<Eigen::Index>(i)) = pf.theta[i];
    p(static_cast<Eigen::Index>(n + i)) = pf.v[i];
  }
  Eigen::VectorXd v(static_cast<Eigen::Index>(loads.size()));
  for (std::size_t l = 0; l < loads.size(); ++l) {
    v(static_cast<Eigen::Index>(l)) = loads[l];
  }
  p = newton_algebraic(with_emf, x, with_emf.inputs(), v, p, 1e-13, 20);

  for (std::size_t k = 0; k < model.devices.size(); ++k) {
    const DevicePower pw = with_emf.device_power(k, x, p);
    if (auto* g = std::get_if<SynchronousGenerator>(&adjusted.devices[k])) {
      g->mech_power = pw.p;
    } else {
      auto& inv = std::get<GfmInverter>(adjusted.devices[k]);
      const std::size_t bi = with_emf.device_bus_index(k);
      inv.p_set = pw.p + demand_of(k);
      inv.q_set = pw.q;
      inv.v_set = p(static_cast<Eigen::Index>(n + bi));
    }
  }

  Equilibrium eq{DaeSystem(adjusted, lddl), SystemState{0.0, x, p}, pf, v};
  const Eigen::VectorXd dx = eq.system.f(x, eq.system.inputs(), p, v);
  const double worst = dx.lpNorm<Eigen::Infinity>();
  if (!(worst < 1e-9)) {
    throw ConvergenceError("equilibrium derivative mismatch " +
                           std::to_string(worst));
  }
  return eq;
}

Equilibrium initialize_equilibrium(const Scenario& sc) {
  validate(sc);
  const auto profiles = effective_profiles(sc);
  std::vector<double> loads;
  for (const auto& p : profiles) loads.push_back(p.at(0.0));
  const auto ids = lddl_bus_ids(sc);
  return equilibrium_at(sc.model, ids, loads, sc.reference_bus);
}

Simulator::Simulator(DaeSystem system, std::vector<LoadProfile> demand,
                     StepOptions options)
    : sys_(std::move(system)), demand_(std::move(demand)), opt_(options) {
  if (demand_.size() != sys_.num_loads()) {
    throw ModelError("one demand profile per LDDL required");
  }
  u_ = sys_.inputs();
}

Eigen::VectorXd Simulator::loads_at(double t) const {
  // Sample times are k*dt; tolerate rounding against CSV timestamps.
  const double probe = t + 1e-9 * std::max(1.0, std::abs(t));
  Eigen::VectorXd v(static_cast<Eigen::Index>(demand_.size()));
  for (std::size_t l = 0; l < demand_.size(); ++l) {
    v(static_cast<Eigen::Index>(l)) = demand_[l].at(probe);
  }
  return v;
}

Eigen::VectorXd Simulator::solve_algebraic(const Eigen::VectorXd& x,
                                           const Eigen::VectorXd& v,
                                           const Eigen::VectorXd& guess) {
  // Chord iterations on a cached factorization; refactor when contraction
  // stalls.
  Eigen::VectorXd p = guess;
  double prev = std::numeric_limits<double>::infinity();
  for (int it = 0; it <= opt_.max_newton_iterations; ++it) {
    const Eigen::VectorXd r = sys_.g(x, p, u_, v);
    const double norm = r.lpNorm<Eigen::Infinity>();
    if (!std::isfinite(norm)) break;
    if (norm < opt_.algebraic_tolerance) return p;
    if (!have_lu_ || norm > 0.25 * prev) {
      lu_.compute(sys_.g_jacobian(x, p));
      have_lu_ = true;
    }
    prev = norm;
    p -= lu_.solve(r);
  }
  have_lu_ = false;
  throw ConvergenceError("algebraic network solve diverged");
}

Eigen::VectorXd Simulator::rate(const Eigen::VectorXd& x,
                                const Eigen::VectorXd& v, Eigen::VectorXd& p) {
  p = solve_algebraic(x, v, p);
  return sys_.f(x, u_, p, v);
}

SystemState Simulator::step(const SystemState& s, double dt) {
  const Eigen::VectorXd v = loads_at(s.t);
  Eigen::VectorXd p = s.p;
  try {
    Eigen::VectorXd x1;
    if (opt_.integrator == Integrator::rk4) {
      const Eigen::VectorXd k1 = rate(s.x, v, p);
      const Eigen::VectorXd k2 = rate(s.x + 0.5 * dt * k1, v, p);
      const Eigen::VectorXd k3 = rate(s.x + 0.5 * dt * k2, v, p);
      const Eigen::VectorXd k4 = rate(s.x + dt * k3, v, p);
      x1 = s.x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    } else {
      const Eigen::VectorXd k1 = rate(s.x, v, p);
      const Eigen::VectorXd k2 = rate(s.x + dt * k1, v, p);
      x1 = s.x + (0.5 * dt) * (k1 + k2);
    }
    if (!x1.allFinite()) throw ConvergenceError("non-finite state");
    p = solve_algebraic(x1, v, p);
    return SystemState{s.t + dt, std::move(x1), std::move(p)};
  } catch (const ConvergenceError& e) {
    throw StepFailure(std::string("step failed at t=") + std::to_string(s.t) +
                          ": " + e.what(),
                      s);
  }
}

SimulationResult run_scenario(const Scenario& sc,
                              const DivergenceLimits& limits) {
  Equilibrium eq = initialize_equilibrium(sc);
  const DaeSystem& sys = eq.system;
  Simulator sim(eq.system, effective_profiles(sc),
                StepOptions{sc.integrator, 1e-11, 25});

  const std::size_t nb = sys.num_buses();
  const auto steps = static_cast<std::size_t>(std::llround(sc.horizon / sc.dt));
  const auto decim =
      static_cast<std::size_t>(std::llround(sc.output_dt / sc.dt));
  const double w0 = sys.model().omega0();

  SimulationResult res;
  res.omega0 = w0;
  for (const Bus& b : sys.model().buses) res.bus_ids.push_back(b.id);
  res.bus_omega.resize(nb);
  res.bus_theta.resize(nb);
  res.bus_v.resize(nb);
  for (const int b : sys.lddl_buses()) res.lddl_buses.push_back(b);
  res.lddl_p.resize(sys.num_loads());
  res.lddl_q.resize(sys.num_loads());
  res.lddl_demand.resize(sys.num_loads());

  std::vector<std::optional<std::size_t>> device_of(nb);
  for (std::size_t i = 0; i < nb; ++i) device_of[i] = sys.model().device_at(i);

  auto record = [&](const SystemState& s, const Eigen::VectorXd& prev_p,
                    double h) {
    res.time.push_back(s.t);
    for (std::size_t i = 0; i < nb; ++i) {
      double w = w0;
      if (device_of[i]) {
        w = s.x(static_cast<Eigen::Index>(sys.state_offset(*device_of[i]) + 1));
      } else if (h > 0.0) {
        w = w0 + (s.theta(i) - prev_p(static_cast<Eigen::Index>(i))) / h;
      }
      res.bus_omega[i].push_back(w);
      res.bus_theta[i].push_back(s.theta(i));
      res.bus_v[i].push_back(s.v(i));
    }
    for (std::size_t l = 0; l < sys.num_loads(); ++l) {
      const std::size_t k = sys.lddl_device(l);
      const DevicePower pw = sys.device_power(k, s.x, s.p);
      res.lddl_p[l].push_back(pw.p);
      res.lddl_q[l].push_back(pw.q);
      res.lddl_demand[l].push_back(
          s.x(static_cast<Eigen::Index>(sys.state_offset(k) + 4)));
    }
  };

  auto check = [&](const SystemState& s) -> std::string {
    if (!s.x.allFinite() || !s.p.allFinite()) return "non-finite state";
    for (std::size_t k = 0; k < sys.model().devices.size(); ++k) {
      const double w = s.x(static_cast<Eigen::Index>(sys.state_offset(k) + 1));
      if (std::abs(w - w0) > limits.max_freq_deviation) {
        return "frequency deviation limit exceeded";
      }
    }
    for (std::size_t i = 0; i < nb; ++i) {
      if (s.v(i) < limits.v_min || s.v(i) > limits.v_max) {
        return "voltage outside limits";
      }
    }
    return {};
  };

  SystemState state = eq.state;
  record(state, state.p, 0.0);
  for (std::size_t k = 0; k < steps; ++k) {
    SystemState next;
    try {
      next = sim.step(state, sc.dt);
    } catch (const StepFailure& e) {
      res.diverged = true;
      res.divergence_time = static_cast<double>(k + 1) * sc.dt;
      res.divergence_reason = "algebraic solve failed";
      if (res.time.back() != state.t) record(state, state.p, 0.0);
      return res;
    }
    next.t = static_cast<double>(k + 1) * sc.dt;
    const std::string why = check(next);
    if (!why.empty()) {
      res.diverged = true;
      res.divergence_time = next.t;
      res.divergence_reason = why;
      if (next.x.allFinite() && next.p.allFinite()) {
        record(next, state.p, sc.dt);
      }
      return res;
    }
    if ((k + 1) % decim == 0) record(next, state.p, sc.dt);
    state = std::move(next);
  }
  return res;
}

std::vector<double> compute_rocof(std::span<const double> freq_hz, double dt,
                                  std::size_t window) {
  if (window < 1) throw DomainError("rocof window must be at least 1 sample");
  if (!(dt > 0.0)) throw DomainError("rocof dt must be positive");
  if (freq_hz.size() <= window) {
    throw DomainError("frequency series shorter than the rocof window");
  }
  std::vector<double> out(freq_hz.size());
  out[0] = (freq_hz[1] - freq_hz[0]) / dt;
  for (std::size_t k = 1; k < freq_hz.size(); ++k) {
    const std::size_t span = std::min(k, window);
    out[k] = (freq_hz[k] - freq_hz[k - span]) / (static_cast<double>(span) * dt);
  }
  return out;
}

}  // namespace lddl
