#include "lddl/network.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <queue>
#include <set>
#include <unordered_map>
#include <utility>

#include "lddl/error.hpp"

namespace lddl {

double GridModel::omega0() const noexcept {
  return 2.0 * std::numbers::pi * nominal_hz;
}

std::size_t GridModel::bus_index(int id) const {
  for (std::size_t i = 0; i < buses.size(); ++i) {
    if (buses[i].id == id) return i;
  }
  throw ModelError("unknown bus id " + std::to_string(id));
}

BusKind GridModel::kind(std::size_t bus_idx) const {
  return device_at(bus_idx) ? BusKind::device_attached : BusKind::passive;
}

std::optional<std::size_t> GridModel::device_at(std::size_t bus_idx) const {
  const int id = buses.at(bus_idx).id;
  for (std::size_t k = 0; k < devices.size(); ++k) {
    if (device_bus(devices[k]) == id) return k;
  }
  return std::nullopt;
}

double SusceptanceMatrix::at(std::size_t i, std::size_t j) const noexcept {
  for (std::size_t k = row_ptr[i]; k < row_ptr[i + 1]; ++k) {
    if (col[k] == j) return val[k];
  }
  return 0.0;
}

Eigen::MatrixXd SusceptanceMatrix::dense() const {
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = row_ptr[i]; k < row_ptr[i + 1]; ++k) {
      m(i, col[k]) = val[k];
    }
  }
  return m;
}

SusceptanceMatrix build_admittance(const GridModel& model) {
  const std::size_t n = model.buses.size();
  std::unordered_map<int, std::size_t> index;
  for (std::size_t i = 0; i < n; ++i) index.emplace(model.buses[i].id, i);

  // One entry per unordered pair; exact duplicates collapse, conflicts throw.
  std::map<std::pair<std::size_t, std::size_t>, double> branch;
  for (const Line& l : model.lines) {
    auto a = index.find(l.from);
    auto b = index.find(l.to);
    if (a == index.end() || b == index.end()) {
      throw ModelError("line " + std::to_string(l.from) + "-" +
                       std::to_string(l.to) + " references an absent bus");
    }
    if (a->second == b->second) {
      throw ModelError("line " + std::to_string(l.from) + " is a self loop");
    }
    auto key = std::minmax(a->second, b->second);
    auto [it, inserted] = branch.emplace(key, l.b);
    if (!inserted && it->second != l.b) {
      throw ModelError("conflicting duplicate line between buses " +
                       std::to_string(l.from) + " and " + std::to_string(l.to));
    }
  }

  std::vector<std::map<std::size_t, double>> rows(n);
  SusceptanceMatrix y;
  y.n = n;
  y.shunt_g.resize(n);
  y.shunt_b.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    y.shunt_g[i] = model.buses[i].shunt_g;
    y.shunt_b[i] = model.buses[i].shunt_b;
    rows[i][i] = model.buses[i].shunt_b;
  }
  for (const auto& [pair, b] : branch) {
    rows[pair.first][pair.first] += b;
    rows[pair.second][pair.second] += b;
    rows[pair.first][pair.second] -= b;
    rows[pair.second][pair.first] -= b;
  }
  y.row_ptr.reserve(n + 1);
  y.row_ptr.push_back(0);
  for (const auto& row : rows) {
    for (const auto& [c, v] : row) {
      y.col.push_back(c);
      y.val.push_back(v);
    }
    y.row_ptr.push_back(y.col.size());
  }
  return y;
}

namespace {

void check_dims(const SusceptanceMatrix& y, std::span<const double> v,
                std::span<const double> theta) {
  if (v.size() != y.n || theta.size() != y.n) {
    throw ModelError("voltage vectors do not match bus count");
  }
}

}  // namespace

BusPowers network_injections(const SusceptanceMatrix& y,
                             std::span<const double> v,
                             std::span<const double> theta) {
  check_dims(y, v, theta);
  BusPowers out{std::vector<double>(y.n), std::vector<double>(y.n)};
  for (std::size_t i = 0; i < y.n; ++i) {
    double p = y.shunt_g[i] * v[i] * v[i];
    double q = -y.shunt_b[i] * v[i] * v[i];
    for (std::size_t k = y.row_ptr[i]; k < y.row_ptr[i + 1]; ++k) {
      const std::size_t j = y.col[k];
      if (j == i) continue;
      const double b = -y.val[k];
      const double d = theta[i] - theta[j];
      p += b * v[i] * v[j] * std::sin(d);
      q += b * (v[i] * v[i] - v[i] * v[j] * std::cos(d));
    }
    out.p[i] = p;
    out.q[i] = q;
  }
  return out;
}

BusPowers network_injections(const GridModel& model, std::span<const double> v,
                             std::span<const double> theta) {
  return network_injections(build_admittance(model), v, theta);
}

Eigen::MatrixXd network_jacobian(const SusceptanceMatrix& y,
                                 std::span<const double> v,
                                 std::span<const double> theta) {
  check_dims(y, v, theta);
  const auto n = static_cast<Eigen::Index>(y.n);
  Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(2 * n, 2 * n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto iu = static_cast<std::size_t>(i);
    jac(i, n + i) = 2.0 * y.shunt_g[iu] * v[iu];
    jac(n + i, n + i) = -2.0 * y.shunt_b[iu] * v[iu];
    for (std::size_t k = y.row_ptr[iu]; k < y.row_ptr[iu + 1]; ++k) {
      const std::size_t ju = y.col[k];
      if (ju == iu) continue;
      const auto j = static_cast<Eigen::Index>(ju);
      const double b = -y.val[k];
      const double d = theta[iu] - theta[ju];
      const double s = std::sin(d);
      const double c = std::cos(d);
      const double vv = v[iu] * v[ju];
      jac(i, i) += b * vv * c;
      jac(i, j) = -b * vv * c;
      jac(i, n + i) += b * v[ju] * s;
      jac(i, n + j) = b * v[iu] * s;
      jac(n + i, i) += b * vv * s;
      jac(n + i, j) = -b * vv * s;
      jac(n + i, n + i) += b * (2.0 * v[iu] - v[ju] * c);
      jac(n + i, n + j) = -b * v[iu] * c;
    }
  }
  return jac;
}

PowerFlowSolution solve_power_flow(
    const GridModel& model, std::span<const BusInjection> injections,
    const std::optional<PowerFlowSolution>& initial_guess,
    const PowerFlowOptions& options) {
  const std::size_t n = model.buses.size();
  if (injections.size() != n) {
    throw ModelError("power flow: injection count does not match bus count");
  }
  const auto refs = std::count_if(
      injections.begin(), injections.end(),
      [](const BusInjection& b) { return b.type == BusType::reference; });
  if (refs != 1) {
    throw ModelError("power flow: exactly one reference bus required");
  }
  const SusceptanceMatrix y = build_admittance(model);

  PowerFlowSolution sol;
  if (initial_guess) {
    if (initial_guess->v.size() != n || initial_guess->theta.size() != n) {
      throw ModelError("power flow: initial guess has wrong dimension");
    }
    sol.v = initial_guess->v;
    sol.theta = initial_guess->theta;
  } else {
    sol.v.assign(n, 1.0);
    sol.theta.assign(n, 0.0);
  }

  // Unknown ordering: theta of non-reference buses, then V of PQ buses.
  std::vector<Eigen::Index> theta_vars;
  std::vector<Eigen::Index> v_vars;
  std::size_t ref = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const BusInjection& inj = injections[i];
    if (inj.type == BusType::reference) {
      ref = i;
    } else {
      theta_vars.push_back(static_cast<Eigen::Index>(i));
    }
    if (inj.type == BusType::pq) {
      v_vars.push_back(static_cast<Eigen::Index>(i));
    } else {
      if (!(inj.v > 0.0)) {
        throw ModelError("power flow: voltage setpoint must be positive");
      }
      sol.v[i] = inj.v;
    }
  }
  sol.theta[ref] = 0.0;

  const auto nt = static_cast<Eigen::Index>(theta_vars.size());
  const auto nv = static_cast<Eigen::Index>(v_vars.size());
  const auto nb = static_cast<Eigen::Index>(n);
  Eigen::VectorXd mismatch(nt + nv);

  auto evaluate = [&] {
    const BusPowers net = network_injections(y, sol.v, sol.theta);
    for (Eigen::Index k = 0; k < nt; ++k) {
      const auto i = static_cast<std::size_t>(theta_vars[k]);
      mismatch(k) = injections[i].p - net.p[i];
    }
    for (Eigen::Index k = 0; k < nv; ++k) {
      const auto i = static_cast<std::size_t>(v_vars[k]);
      mismatch(nt + k) = injections[i].q - net.q[i];
    }
    return mismatch.size() ? mismatch.lpNorm<Eigen::Infinity>() : 0.0;
  };

  double residual = evaluate();
  int iter = 0;
  while (!(residual < options.tolerance)) {
    if (iter >= options.max_iterations || !std::isfinite(residual)) {
      throw InfeasibleError("power flow did not converge (residual " +
                                std::to_string(residual) + ")",
                            residual, iter);
    }
    const Eigen::MatrixXd full = network_jacobian(y, sol.v, sol.theta);
    Eigen::MatrixXd jac(nt + nv, nt + nv);
    for (Eigen::Index r = 0; r < nt + nv; ++r) {
      const Eigen::Index fr = r < nt ? theta_vars[r] : nb + v_vars[r - nt];
      for (Eigen::Index c = 0; c < nt + nv; ++c) {
        const Eigen::Index fc = c < nt ? theta_vars[c] : nb + v_vars[c - nt];
        jac(r, c) = full(fr, fc);
      }
    }
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(jac);
    const Eigen::VectorXd dx = lu.solve(mismatch);
    if (!dx.allFinite()) {
      throw InfeasibleError("power flow Jacobian is singular", residual, iter);
    }
    for (Eigen::Index k = 0; k < nt; ++k) {
      sol.theta[static_cast<std::size_t>(theta_vars[k])] += dx(k);
    }
    for (Eigen::Index k = 0; k < nv; ++k) {
      sol.v[static_cast<std::size_t>(v_vars[k])] += dx(nt + k);
    }
    ++iter;
    if (std::any_of(sol.v.begin(), sol.v.end(),
                    [](double x) { return !(x > 0.0); })) {
      throw InfeasibleError("power flow drove a voltage non-positive",
                            residual, iter);
    }
    residual = evaluate();
  }
  sol.residual_norm = residual;
  sol.iterations = iter;
  return sol;
}

std::vector<Violation> validate_model(const GridModel& model) {
  std::vector<Violation> out;
  auto add = [&out](std::string entity, std::string rule) {
    out.push_back({std::move(entity), std::move(rule)});
  };

  if (!(model.base_mva > 0.0)) add("model", "base_mva must be positive");
  if (!(model.nominal_hz > 0.0)) add("model", "nominal_hz must be positive");
  if (model.buses.empty()) add("model", "at least one bus required");

  std::unordered_map<int, std::size_t> index;
  for (std::size_t i = 0; i < model.buses.size(); ++i) {
    const Bus& b = model.buses[i];
    const std::string name = "bus " + std::to_string(b.id);
    if (!index.emplace(b.id, i).second) add(name, "duplicate bus id");
    if (!std::isfinite(b.shunt_g) || !std::isfinite(b.shunt_b)) {
      add(name, "shunt values must be finite");
    }
    if (!std::isfinite(b.load_p) || !std::isfinite(b.load_q)) {
      add(name, "load values must be finite");
    }
  }

  std::vector<std::vector<std::size_t>> adj(model.buses.size());
  std::map<std::pair<int, int>, double> seen;
  for (const Line& l : model.lines) {
    const std::string name =
        "line " + std::to_string(l.from) + "-" + std::to_string(l.to);
    auto a = index.find(l.from);
    auto b = index.find(l.to);
    if (a == index.end() || b == index.end()) {
      add(name, "endpoint references an absent bus");
      continue;
    }
    if (l.from == l.to) {
      add(name, "from and to must differ");
      continue;
    }
    if (!(l.b > 0.0) || !std::isfinite(l.b)) {
      add(name, "susceptance must be positive and finite");
    }
    auto key = std::minmax(l.from, l.to);
    auto [it, inserted] = seen.emplace(key, l.b);
    if (!inserted && it->second != l.b) {
      add(name, "conflicting duplicate line");
    }
    adj[a->second].push_back(b->second);
    adj[b->second].push_back(a->second);
  }

  if (!model.buses.empty()) {
    std::vector<bool> reached(model.buses.size(), false);
    std::queue<std::size_t> frontier;
    frontier.push(0);
    reached[0] = true;
    while (!frontier.empty()) {
      const std::size_t i = frontier.front();
      frontier.pop();
      for (std::size_t j : adj[i]) {
        if (!reached[j]) {
          reached[j] = true;
          frontier.push(j);
        }
      }
    }
    for (std::size_t i = 0; i < reached.size(); ++i) {
      if (!reached[i]) {
        add("bus " + std::to_string(model.buses[i].id),
            "not connected to bus " + std::to_string(model.buses[0].id));
      }
    }
  }

  std::set<int> device_buses;
  for (std::size_t k = 0; k < model.devices.size(); ++k) {
    const Device& d = model.devices[k];
    const int bus = device_bus(d);
    const std::string name = "device " + std::to_string(k);
    if (!index.contains(bus)) {
      add(name, "bus " + std::to_string(bus) + " does not exist");
    }
    if (!device_buses.insert(bus).second) {
      add(name, "more than one device at bus " + std::to_string(bus));
    }
    if (const auto* g = std::get_if<SynchronousGenerator>(&d)) {
      if (!(g->inertia > 0.0)) add(name, "inertia M must be positive");
      if (!(g->damping >= 0.0)) add(name, "damping D must be non-negative");
      if (!(g->reactance > 0.0)) add(name, "reactance must be positive");
      if (!(g->v_set > 0.0)) add(name, "v_set must be positive");
    } else if (const auto* inv = std::get_if<GfmInverter>(&d)) {
      if (!(inv->tau > 0.0)) add(name, "tau must be positive");
      if (!(inv->t_l > 0.0)) add(name, "T_L must be positive");
      if (!(inv->m_p > 0.0)) add(name, "m_p must be positive");
      if (!(inv->reactance > 0.0)) add(name, "reactance must be positive");
      if (!(inv->v_set > 0.0)) add(name, "v_set must be positive");
    }
  }
  return out;
}

}  // namespace lddl
