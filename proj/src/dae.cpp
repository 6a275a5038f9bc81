#include "lddl/dae.hpp"

#include <algorithm>
#include <cmath>

#include "lddl/error.hpp"

namespace lddl {

const char* to_string(StateKind k) noexcept {
  switch (k) {
    case StateKind::delta: return "Delta";
    case StateKind::omega: return "Omega";
    case StateKind::v_err: return "Ve";
    case StateKind::e: return "E";
    case StateKind::p_l: return "PL";
  }
  return "?";
}

DaeSystem::DaeSystem(GridModel model, std::vector<int> lddl_buses)
    : model_(std::move(model)), lddl_buses_(std::move(lddl_buses)) {
  if (const auto violations = validate_model(model_); !violations.empty()) {
    throw ModelError(violations.front().entity + ": " +
                     violations.front().rule);
  }
  y_ = build_admittance(model_);

  const std::size_t nd = model_.devices.size();
  dev_lddl_.assign(nd, -1);
  for (std::size_t k = 0; k < nd; ++k) {
    dev_bus_.push_back(model_.bus_index(device_bus(model_.devices[k])));
  }
  for (std::size_t l = 0; l < lddl_buses_.size(); ++l) {
    const std::size_t bi = model_.bus_index(lddl_buses_[l]);
    const auto dev = model_.device_at(bi);
    if (!dev || !std::holds_alternative<GfmInverter>(model_.devices[*dev])) {
      throw ModelError("LDDL at bus " + std::to_string(lddl_buses_[l]) +
                       " needs a GFM inverter at that bus");
    }
    if (dev_lddl_[*dev] >= 0) {
      throw ModelError("two LDDLs attached at bus " +
                       std::to_string(lddl_buses_[l]));
    }
    dev_lddl_[*dev] = static_cast<std::ptrdiff_t>(l);
    lddl_dev_.push_back(*dev);
  }

  for (std::size_t k = 0; k < nd; ++k) {
    offset_.push_back(labels_.size());
    const int bus = device_bus(model_.devices[k]);
    const bool inv = std::holds_alternative<GfmInverter>(model_.devices[k]);
    const bool dc = dev_lddl_[k] >= 0;
    labels_.push_back({k, bus, StateKind::delta, inv, dc});
    labels_.push_back({k, bus, StateKind::omega, inv, dc});
    if (inv) {
      labels_.push_back({k, bus, StateKind::v_err, inv, dc});
      labels_.push_back({k, bus, StateKind::e, inv, dc});
      labels_.push_back({k, bus, StateKind::p_l, inv, dc});
    }
  }
}

Eigen::VectorXd DaeSystem::inputs() const {
  Eigen::VectorXd u(static_cast<Eigen::Index>(num_inputs()));
  for (std::size_t k = 0; k < model_.devices.size(); ++k) {
    const auto i = static_cast<Eigen::Index>(k);
    std::visit(
        [&](const auto& d) {
          if constexpr (std::is_same_v<std::decay_t<decltype(d)>,
                                       SynchronousGenerator>) {
            u(i) = d.mech_power;
          } else {
            u(i) = d.p_set;
          }
        },
        model_.devices[k]);
  }
  return u;
}

void DaeSystem::set_inputs(const Eigen::VectorXd& u) {
  for (std::size_t k = 0; k < model_.devices.size(); ++k) {
    const double val = u(static_cast<Eigen::Index>(k));
    std::visit(
        [&](auto& d) {
          if constexpr (std::is_same_v<std::decay_t<decltype(d)>,
                                       SynchronousGenerator>) {
            d.mech_power = val;
          } else {
            d.p_set = val;
          }
        },
        model_.devices[k]);
  }
}

double DaeSystem::emf(std::size_t device, const Eigen::VectorXd& x) const {
  if (const auto* g = std::get_if<SynchronousGenerator>(&model_.devices[device])) {
    return g->emf;
  }
  return x(static_cast<Eigen::Index>(offset_[device] + 3));
}

double DaeSystem::angle(std::size_t device, const Eigen::VectorXd& x) const {
  return x(static_cast<Eigen::Index>(offset_[device]));
}

namespace {

double reactance(const Device& d) {
  return std::visit([](const auto& dev) { return dev.reactance; }, d);
}

}  // namespace

DevicePower DaeSystem::device_power(std::size_t device,
                                    const Eigen::VectorXd& x,
                                    const Eigen::VectorXd& p) const {
  const auto b = static_cast<Eigen::Index>(dev_bus_[device]);
  const auto n = static_cast<Eigen::Index>(num_buses());
  return source_power(emf(device, x), angle(device, x), p(n + b), p(b),
                      reactance(model_.devices[device]));
}

Eigen::VectorXd DaeSystem::f(const Eigen::VectorXd& x, const Eigen::VectorXd& u,
                             const Eigen::VectorXd& p,
                             const Eigen::VectorXd& v) const {
  Eigen::VectorXd dx(x.size());
  const double w0 = model_.omega0();
  const auto n = static_cast<Eigen::Index>(num_buses());
  for (std::size_t k = 0; k < model_.devices.size(); ++k) {
    const auto o = static_cast<Eigen::Index>(offset_[k]);
    const DevicePower pw = device_power(k, x, p);
    const double setpoint = u(static_cast<Eigen::Index>(k));
    if (const auto* gen = std::get_if<SynchronousGenerator>(&model_.devices[k])) {
      SynchronousGenerator g = *gen;
      g.mech_power = setpoint;
      const SgRates r = sg_derivatives(g, {x(o), x(o + 1)}, pw.p, w0);
      dx(o) = r.d_delta;
      dx(o + 1) = r.d_omega;
    } else {
      GfmInverter inv = std::get<GfmInverter>(model_.devices[k]);
      inv.p_set = setpoint;
      const double demand =
          dev_lddl_[k] >= 0 ? v(static_cast<Eigen::Index>(dev_lddl_[k])) : 0.0;
      const GfmState s{x(o), x(o + 1), x(o + 2), x(o + 3), x(o + 4)};
      const double vt = p(n + static_cast<Eigen::Index>(dev_bus_[k]));
      const GfmRates r = gfm_derivatives(inv, s, pw.p, pw.q, vt, demand, w0);
      dx(o) = r.d_delta;
      dx(o + 1) = r.d_omega;
      dx(o + 2) = r.d_v_err;
      dx(o + 3) = r.d_e;
      dx(o + 4) = r.d_p_l;
    }
  }
  return dx;
}

Eigen::VectorXd DaeSystem::g(const Eigen::VectorXd& x, const Eigen::VectorXd& p,
                             const Eigen::VectorXd& /*u*/,
                             const Eigen::VectorXd& /*v*/) const {
  const auto n = static_cast<Eigen::Index>(num_buses());
  const std::span<const double> theta(p.data(), static_cast<std::size_t>(n));
  const std::span<const double> vm(p.data() + n, static_cast<std::size_t>(n));
  const BusPowers net = network_injections(y_, vm, theta);
  Eigen::VectorXd res(2 * n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Bus& b = model_.buses[static_cast<std::size_t>(i)];
    res(i) = -b.load_p - net.p[static_cast<std::size_t>(i)];
    res(n + i) = -b.load_q - net.q[static_cast<std::size_t>(i)];
  }
  for (std::size_t k = 0; k < model_.devices.size(); ++k) {
    const auto b = static_cast<Eigen::Index>(dev_bus_[k]);
    const DevicePower pw = device_power(k, x, p);
    res(b) += pw.p;
    res(n + b) += pw.q;
  }
  return res;
}

Eigen::MatrixXd DaeSystem::g_jacobian(const Eigen::VectorXd& x,
                                      const Eigen::VectorXd& p) const {
  const auto n = static_cast<Eigen::Index>(num_buses());
  const std::span<const double> theta(p.data(), static_cast<std::size_t>(n));
  const std::span<const double> vm(p.data() + n, static_cast<std::size_t>(n));
  Eigen::MatrixXd jac = -network_jacobian(y_, vm, theta);
  for (std::size_t k = 0; k < model_.devices.size(); ++k) {
    const auto b = static_cast<Eigen::Index>(dev_bus_[k]);
    const double e = emf(k, x);
    const double a = angle(k, x) - p(b);
    const double vt = p(n + b);
    const double xr = reactance(model_.devices[k]);
    const double s = std::sin(a);
    const double c = std::cos(a);
    jac(b, b) += -e * vt * c / xr;
    jac(b, n + b) += e * s / xr;
    jac(n + b, b) += e * vt * s / xr;
    jac(n + b, n + b) += (e * c - 2.0 * vt) / xr;
  }
  return jac;
}

}  // namespace lddl
