#include "lddl/smallsignal.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>

#include <Eigen/Eigenvalues>

#include "lddl/csv.hpp"
#include "lddl/error.hpp"

namespace lddl {

Eigen::MatrixXd central_difference_jacobian(
    const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& fn,
    const Eigen::VectorXd& z, double rel_step, Stencil stencil) {
  if (!(rel_step > 0.0)) throw DomainError("finite-difference step must be positive");
  const Eigen::VectorXd f0 = fn(z);
  Eigen::MatrixXd jac(f0.size(), z.size());
  Eigen::VectorXd zp = z;
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    const double h = rel_step * std::max(1.0, std::abs(z(i)));
    auto at = [&](double offset) {
      zp(i) = z(i) + offset;
      Eigen::VectorXd r = fn(zp);
      zp(i) = z(i);
      return r;
    };
    if (stencil == Stencil::second_order) {
      jac.col(i) = (at(h) - at(-h)) / (2.0 * h);
    } else {
      jac.col(i) =
          (8.0 * (at(h) - at(-h)) - (at(2.0 * h) - at(-2.0 * h))) / (12.0 * h);
    }
  }
  return jac;
}

LinearizedSystem linearize(const DaeSystem& sys, const Eigen::VectorXd& x,
                           const Eigen::VectorXd& p, const Eigen::VectorXd& v,
                           const FdOptions& opt) {
  const Eigen::VectorXd u = sys.inputs();
  const double res = std::max(sys.f(x, u, p, v).lpNorm<Eigen::Infinity>(),
                              sys.g(x, p, u, v).lpNorm<Eigen::Infinity>());
  if (!(res <= opt.equilibrium_tolerance)) {
    throw PreconditionError("operating point is not an equilibrium", res);
  }

  LinearizedSystem lin;
  lin.x = x;
  lin.p = p;
  lin.u = u;
  lin.v = v;
  const double h = opt.rel_step;
  const Stencil st = opt.stencil;
  using V = Eigen::VectorXd;
  lin.a11 = central_difference_jacobian(
      [&](const V& z) { return sys.f(z, u, p, v); }, x, h, st);
  lin.a12 = central_difference_jacobian(
      [&](const V& z) { return sys.f(x, z, p, v); }, u, h, st);
  lin.a13 = central_difference_jacobian(
      [&](const V& z) { return sys.f(x, u, z, v); }, p, h, st);
  lin.a14 = central_difference_jacobian(
      [&](const V& z) { return sys.f(x, u, p, z); }, v, h, st);
  lin.a21 = central_difference_jacobian(
      [&](const V& z) { return sys.g(z, p, u, v); }, x, h, st);
  lin.a22 = central_difference_jacobian(
      [&](const V& z) { return sys.g(x, p, z, v); }, u, h, st);
  lin.a23 = central_difference_jacobian(
      [&](const V& z) { return sys.g(x, z, u, v); }, p, h, st);
  lin.a24 = central_difference_jacobian(
      [&](const V& z) { return sys.g(x, p, u, z); }, v, h, st);
  return lin;
}

LinearizedSystem linearize(const Equilibrium& eq, const FdOptions& opt) {
  return linearize(eq.system, eq.state.x, eq.state.p, eq.loads, opt);
}

namespace {

Eigen::PartialPivLU<Eigen::MatrixXd> factor_algebraic(const Eigen::MatrixXd& a23) {
  if (a23.rows() != a23.cols()) throw DomainError("a23 must be square");
  Eigen::PartialPivLU<Eigen::MatrixXd> lu(a23);
  const double rc = lu.rcond();
  if (!(rc > 1e3 * std::numeric_limits<double>::epsilon())) {
    throw SingularityError("algebraic Jacobian is singular (rcond " +
                           std::to_string(rc) + ")");
  }
  return lu;
}

}  // namespace

Eigen::MatrixXd reduce_state_matrix(const Eigen::MatrixXd& a11,
                                    const Eigen::MatrixXd& a13,
                                    const Eigen::MatrixXd& a21,
                                    const Eigen::MatrixXd& a23) {
  if (a11.rows() != a11.cols() || a13.rows() != a11.rows() ||
      a21.cols() != a11.cols() || a23.rows() != a21.rows() ||
      a13.cols() != a23.cols()) {
    throw DomainError("inconsistent block dimensions");
  }
  if (a23.size() == 0) return a11;
  const auto lu = factor_algebraic(a23);
  return a11 - a13 * lu.solve(a21);
}

Eigen::MatrixXd reduce_state_matrix(const LinearizedSystem& lin) {
  return reduce_state_matrix(lin.a11, lin.a13, lin.a21, lin.a23);
}

ReducedInputs reduce_input_matrices(const LinearizedSystem& lin) {
  const auto lu = factor_algebraic(lin.a23);
  return {lin.a12 - lin.a13 * lu.solve(lin.a22),
          lin.a14 - lin.a13 * lu.solve(lin.a24)};
}

namespace {

Eigen::EigenSolver<Eigen::MatrixXd> decompose(const Eigen::MatrixXd& a,
                                              bool vectors) {
  if (a.rows() != a.cols()) throw DomainError("matrix must be square");
  if (!a.allFinite()) throw DomainError("matrix has non-finite entries");
  Eigen::EigenSolver<Eigen::MatrixXd> es(a, vectors);
  if (es.info() != Eigen::Success) {
    throw ConvergenceError("eigensolver did not converge");
  }
  return es;
}

}  // namespace

ModalReport modal_analysis(const Eigen::MatrixXd& a,
                           const StabilityThresholds& th) {
  const auto es = decompose(a, false);
  const Eigen::VectorXcd ev = es.eigenvalues();
  ModalReport rep;
  double max_re = -std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < ev.size(); ++i) {
    ModeReport m;
    m.lambda = ev(i);
    m.frequency_hz = std::abs(m.lambda.imag()) / (2.0 * std::numbers::pi);
    const double mag = std::abs(m.lambda);
    m.zero_mode = mag < th.zero_tolerance;
    if (!m.zero_mode) {
      m.damping = std::clamp(-m.lambda.real() / mag, -1.0, 1.0);
      max_re = std::max(max_re, m.lambda.real());
      if (!rep.least_damped || m.damping < rep.zeta_min) {
        rep.least_damped = static_cast<std::size_t>(i);
        rep.zeta_min = m.damping;
      }
    }
    rep.modes.push_back(m);
  }
  rep.abscissa = rep.least_damped ? -max_re : 0.0;
  rep.critical = rep.abscissa <= th.m_min ||
                 (rep.least_damped && rep.zeta_min <= th.zeta_min);
  return rep;
}

Participation participation_factors(const Eigen::MatrixXd& a) {
  const auto es = decompose(a, true);
  const Eigen::MatrixXcd phi = es.eigenvectors();
  Eigen::PartialPivLU<Eigen::MatrixXcd> lu(phi);
  const double rc = lu.rcond();
  if (!(rc > 1e-10)) {
    const Eigen::MatrixXcd r =
        a.cast<cplx>() * phi - phi * es.eigenvalues().asDiagonal();
    throw ConditioningError("eigenvector matrix is near-singular (rcond " +
                                std::to_string(rc) + ")",
                            r.norm());
  }
  const Eigen::MatrixXcd psi = lu.inverse();  // rows: left eigenvectors
  const Eigen::Index n = a.rows();
  Participation out;
  out.eigenvalues = es.eigenvalues();
  out.factors.resize(n, n);
  for (Eigen::Index k = 0; k < n; ++k) {
    double sum = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double pf = std::abs(phi(i, k) * psi(k, i));
      out.factors(i, k) = pf;
      sum += pf;
    }
    out.factors.col(k) /= sum;
  }
  return out;
}

cplx eigenvalue_perturbation(const Eigen::MatrixXd& a,
                             const Eigen::MatrixXd& da, std::size_t mode) {
  if (da.rows() != a.rows() || da.cols() != a.cols()) {
    throw DomainError("perturbation dimension mismatch");
  }
  const auto es = decompose(a, true);
  const Eigen::VectorXcd ev = es.eigenvalues();
  const auto k = static_cast<Eigen::Index>(mode);
  if (k >= ev.size()) throw DomainError("mode index out of range");
  const double scale = std::max(1.0, std::abs(ev(k)));
  for (Eigen::Index j = 0; j < ev.size(); ++j) {
    if (j != k && std::abs(ev(j) - ev(k)) < 1e-8 * scale) {
      throw DegeneracyError("target eigenvalue is repeated");
    }
  }
  const Eigen::MatrixXcd phi = es.eigenvectors();
  const Eigen::VectorXcd right = phi.col(k);
  const Eigen::RowVectorXcd left = phi.partialPivLu().inverse().row(k);
  return (left * da.cast<cplx>() * right)(0) / (left * right)(0);
}

double hausdorff_distance(std::span<const cplx> a, std::span<const cplx> b) {
  if (a.empty() || b.empty()) throw DomainError("spectrum is empty");
  auto directed = [](std::span<const cplx> from, std::span<const cplx> to) {
    double worst = 0.0;
    for (const cplx x : from) {
      double best = std::numeric_limits<double>::infinity();
      for (const cplx y : to) best = std::min(best, std::abs(x - y));
      worst = std::max(worst, best);
    }
    return worst;
  };
  return std::max(directed(a, b), directed(b, a));
}

SafeSplit classify_safe_set(std::span<const cplx> spectrum,
                            const std::function<bool(cplx)>& criterion) {
  SafeSplit s;
  for (const cplx l : spectrum) {
    (criterion(l) ? s.safe : s.violating).push_back(l);
  }
  return s;
}

namespace {

Equilibrium equilibrium_for(const GridModel& model,
                            std::span<const int> lddl_buses,
                            std::span<const double> nominal, double r,
                            const SweepOptions& opt,
                            std::vector<double>* loads_out = nullptr) {
  if (nominal.size() != lddl_buses.size()) {
    throw DomainError("one nominal load per LDDL bus required");
  }
  std::vector<double> loads(nominal.begin(), nominal.end());
  for (double& l : loads) l *= 1.0 + r;
  if (loads_out) *loads_out = loads;
  return equilibrium_at(model, lddl_buses, loads, opt.reference_bus);
}

std::vector<ParticipationRow> top_rows(const DaeSystem& sys,
                                       const Participation& part,
                                       std::size_t mode, std::size_t count) {
  const auto labels = sys.labels();
  std::vector<std::size_t> order(labels.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  const auto col = static_cast<Eigen::Index>(mode);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
    return part.factors(static_cast<Eigen::Index>(x), col) >
           part.factors(static_cast<Eigen::Index>(y), col);
  });
  std::vector<ParticipationRow> rows;
  for (std::size_t i = 0; i < std::min(count, order.size()); ++i) {
    const StateLabel& l = labels[order[i]];
    rows.push_back({l.data_center ? "LDDL" : (l.inverter ? "GFM" : "SG"),
                    to_string(l.kind), l.bus,
                    part.factors(static_cast<Eigen::Index>(order[i]), col)});
  }
  return rows;
}

std::vector<cplx> spectrum_of(const ModalReport& rep) {
  std::vector<cplx> s;
  for (const auto& m : rep.modes) s.push_back(m.lambda);
  return s;
}

}  // namespace

Eigen::MatrixXd reduced_matrix_at(const GridModel& model,
                                  std::span<const int> lddl_buses,
                                  std::span<const double> nominal, double r,
                                  const SweepOptions& opt) {
  const Equilibrium eq = equilibrium_for(model, lddl_buses, nominal, r, opt);
  return reduce_state_matrix(linearize(eq, opt.fd));
}

SnapshotSweep snapshot_sweep(const GridModel& model,
                             std::span<const int> lddl_buses,
                             std::span<const double> nominal,
                             std::span<const double> ramp,
                             const SweepOptions& opt) {
  SnapshotSweep sweep;
  for (const double r : ramp) {
    SnapshotRecord rec;
    rec.multiplier = r;
    try {
      const Equilibrium eq =
          equilibrium_for(model, lddl_buses, nominal, r, opt, &rec.loads);
      const Eigen::MatrixXd a = reduce_state_matrix(linearize(eq, opt.fd));
      rec.modal = modal_analysis(a, opt.thresholds);
      if (rec.modal.least_damped) {
        const Participation part = participation_factors(a);
        rec.top_participants = top_rows(eq.system, part, *rec.modal.least_damped,
                                        opt.top_participants);
      }
      // The angle-reference mode sits on the stability boundary by
      // construction and is not a stability violation.
      const double zt = opt.thresholds.zero_tolerance;
      const auto spec = spectrum_of(rec.modal);
      rec.split = classify_safe_set(
          spec, [zt](cplx l) { return l.real() < 0.0 || std::abs(l) < zt; });
      rec.ok = true;
    } catch (const Error& e) {
      rec.error = e.what();
    }
    if (!sweep.points.empty() && rec.ok && sweep.points.back().ok) {
      rec.hausdorff_to_previous = hausdorff_distance(
          spectrum_of(sweep.points.back().modal), spectrum_of(rec.modal));
    }
    if (rec.ok && rec.modal.critical) sweep.critical.push_back(sweep.points.size());
    sweep.points.push_back(std::move(rec));
  }
  return sweep;
}

Crossing find_stability_crossing(const GridModel& model,
                                 std::span<const int> lddl_buses,
                                 std::span<const double> nominal, double lo,
                                 double hi, double tol,
                                 const SweepOptions& opt) {
  auto max_re = [&](double r) {
    const auto rep =
        modal_analysis(reduced_matrix_at(model, lddl_buses, nominal, r, opt),
                       opt.thresholds);
    return -rep.abscissa;
  };
  double f_lo = max_re(lo);
  const double f_hi = max_re(hi);
  if ((f_lo < 0.0) == (f_hi < 0.0)) {
    throw DomainError("no stability crossing inside the bracket");
  }
  Crossing c{f_lo < 0.0 ? lo : hi, f_lo < 0.0 ? hi : lo};
  while (std::abs(c.unstable - c.stable) > tol) {
    const double mid = 0.5 * (c.stable + c.unstable);
    (max_re(mid) < 0.0 ? c.stable : c.unstable) = mid;
  }
  return c;
}

nlohmann::json sweep_to_json(const SnapshotSweep& sweep) {
  nlohmann::json points = nlohmann::json::array();
  for (const auto& rec : sweep.points) {
    nlohmann::json j;
    j["multiplier"] = rec.multiplier;
    j["loads"] = rec.loads;
    j["ok"] = rec.ok;
    if (!rec.ok) {
      j["error"] = rec.error;
      points.push_back(std::move(j));
      continue;
    }
    nlohmann::json eig = nlohmann::json::array();
    nlohmann::json zeta = nlohmann::json::array();
    for (const auto& m : rec.modal.modes) {
      eig.push_back({m.lambda.real(), m.lambda.imag()});
      zeta.push_back(m.zero_mode ? nlohmann::json(nullptr)
                                 : nlohmann::json(m.damping));
    }
    j["eigenvalues"] = std::move(eig);
    j["damping"] = std::move(zeta);
    j["abscissa"] = rec.modal.abscissa;
    j["zeta_min"] = rec.modal.zeta_min;
    if (rec.modal.least_damped) {
      const auto& m = rec.modal.modes[*rec.modal.least_damped];
      j["least_damped"] = {{"eigenvalue", {m.lambda.real(), m.lambda.imag()}},
                           {"frequency_hz", m.frequency_hz},
                           {"damping", m.damping}};
    }
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& r : rec.top_participants) {
      rows.push_back({{"component", r.component},
                      {"state", r.state},
                      {"bus", r.bus},
                      {"pf", r.factor}});
    }
    j["participation"] = std::move(rows);
    j["critical"] = rec.modal.critical;
    j["violating"] = nlohmann::json::array();
    for (const cplx l : rec.split.violating) {
      j["violating"].push_back({l.real(), l.imag()});
    }
    j["hausdorff_to_previous"] =
        rec.hausdorff_to_previous ? nlohmann::json(*rec.hausdorff_to_previous)
                                  : nlohmann::json(nullptr);
    points.push_back(std::move(j));
  }
  return {{"points", points}, {"critical", sweep.critical}};
}

void write_sweep_csv(const std::filesystem::path& path,
                     const SnapshotSweep& sweep) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << "multiplier,least_damped_re,zeta_min,hausdorff_prev\n";
  for (const auto& rec : sweep.points) {
    out << csv::format(rec.multiplier) << ',';
    if (rec.ok && rec.modal.least_damped) {
      out << csv::format(rec.modal.modes[*rec.modal.least_damped].lambda.real())
          << ',' << csv::format(rec.modal.zeta_min);
    } else {
      out << "nan,nan";
    }
    out << ','
        << (rec.hausdorff_to_previous ? csv::format(*rec.hausdorff_to_previous)
                                      : std::string("nan"))
        << '\n';
  }
  if (!out) throw IoError("write failed for " + path.string());
}

}  // namespace lddl
