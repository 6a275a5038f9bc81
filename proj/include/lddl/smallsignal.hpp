#pragma once

#include <complex>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "lddl/dae.hpp"
#include "lddl/simulator.hpp"

namespace lddl {

using cplx = std::complex<double>;

enum class Stencil { second_order, fourth_order };

struct FdOptions {
  double rel_step = 1e-3;  // h_i = rel_step * max(1, |z_i|)
  Stencil stencil = Stencil::fourth_order;
  double equilibrium_tolerance = 1e-8;
};

/// Central-difference Jacobian of fn at z with per-variable step scaling.
Eigen::MatrixXd central_difference_jacobian(
    const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& fn,
    const Eigen::VectorXd& z, double rel_step,
    Stencil stencil = Stencil::second_order);

/// Blocks of the linearized DAE
///   dx' = a11 dx + a12 du + a13 dp + a14 dv
///   0   = a21 dx + a22 du + a23 dp + a24 dv
struct LinearizedSystem {
  Eigen::MatrixXd a11, a12, a13, a14;
  Eigen::MatrixXd a21, a22, a23, a24;
  Eigen::VectorXd x, p, u, v;
};

/// Throws PreconditionError if (x, p) is not an equilibrium under (u, v).
LinearizedSystem linearize(const DaeSystem& sys, const Eigen::VectorXd& x,
                           const Eigen::VectorXd& p, const Eigen::VectorXd& v,
                           const FdOptions& opt = {});
LinearizedSystem linearize(const Equilibrium& eq, const FdOptions& opt = {});

/// a11 - a13 a23^-1 a21. Throws SingularityError when a23 is numerically
/// singular.
Eigen::MatrixXd reduce_state_matrix(const Eigen::MatrixXd& a11,
                                    const Eigen::MatrixXd& a13,
                                    const Eigen::MatrixXd& a21,
                                    const Eigen::MatrixXd& a23);
Eigen::MatrixXd reduce_state_matrix(const LinearizedSystem& lin);

struct ReducedInputs {
  Eigen::MatrixXd bu;  // a12 - a13 a23^-1 a22
  Eigen::MatrixXd bv;  // a14 - a13 a23^-1 a24
};
ReducedInputs reduce_input_matrices(const LinearizedSystem& lin);

struct StabilityThresholds {
  double zeta_min = 0.005;
  double m_min = 0.0;
  double zero_tolerance = 1e-8;  // |λ| below this is the angle-reference mode
};

struct ModeReport {
  cplx lambda;
  double frequency_hz = 0.0;
  double damping = 1.0;  // -Re λ / |λ|; 1 for the excluded zero mode
  bool zero_mode = false;
};

struct ModalReport {
  std::vector<ModeReport> modes;  // eigensolver order
  double abscissa = 0.0;          // -max Re λ over non-zero modes
  std::optional<std::size_t> least_damped;
  double zeta_min = 1.0;
  bool critical = false;
};

ModalReport modal_analysis(const Eigen::MatrixXd& a,
                           const StabilityThresholds& th = {});

struct Participation {
  Eigen::VectorXcd eigenvalues;
  Eigen::MatrixXd factors;  // states x modes, columns sum to 1
};

/// Throws ConditioningError when the eigenvector matrix is near-singular.
Participation participation_factors(const Eigen::MatrixXd& a);

/// First-order eigenvalue shift of mode `mode` (eigensolver order) under
/// the perturbation da. Throws DegeneracyError for a repeated eigenvalue.
cplx eigenvalue_perturbation(const Eigen::MatrixXd& a,
                             const Eigen::MatrixXd& da, std::size_t mode);

/// Throws DomainError for an empty set.
double hausdorff_distance(std::span<const cplx> a, std::span<const cplx> b);

struct SafeSplit {
  std::vector<cplx> safe;
  std::vector<cplx> violating;
};
SafeSplit classify_safe_set(
    std::span<const cplx> spectrum,
    const std::function<bool(cplx)>& criterion = [](cplx l) {
      return l.real() < 0.0;
    });

struct ParticipationRow {
  std::string component;  // "SG", "GFM" or "LDDL"
  std::string state;
  int bus = 0;
  double factor = 0.0;
};

struct SnapshotRecord {
  double multiplier = 0.0;
  std::vector<double> loads;
  bool ok = false;
  std::string error;
  ModalReport modal;
  std::vector<ParticipationRow> top_participants;  // least-damped mode
  std::optional<double> hausdorff_to_previous;
  SafeSplit split;
};

struct SnapshotSweep {
  std::vector<SnapshotRecord> points;
  std::vector<std::size_t> critical;  // indices into points
};

struct SweepOptions {
  StabilityThresholds thresholds;
  FdOptions fd;
  std::size_t top_participants = 5;
  std::optional<int> reference_bus;
};

/// State matrix at LDDL demand nominal * (1 + r).
Eigen::MatrixXd reduced_matrix_at(const GridModel& model,
                                  std::span<const int> lddl_buses,
                                  std::span<const double> nominal, double r,
                                  const SweepOptions& opt = {});

/// Equilibrium, linearization, reduction and modal analysis at each ramp
/// point r (relative LDDL demand variation). Failed points are recorded.
SnapshotSweep snapshot_sweep(const GridModel& model,
                             std::span<const int> lddl_buses,
                             std::span<const double> nominal,
                             std::span<const double> ramp,
                             const SweepOptions& opt = {});

struct Crossing {
  double stable = 0.0;    // ramp value with max Re λ < 0
  double unstable = 0.0;  // ramp value with max Re λ >= 0
};

/// Bisects the ramp value at which the largest non-zero Re λ crosses 0.
/// Requires a sign change between `lo` and `hi`.
Crossing find_stability_crossing(const GridModel& model,
                                 std::span<const int> lddl_buses,
                                 std::span<const double> nominal, double lo,
                                 double hi, double tol,
                                 const SweepOptions& opt = {});

nlohmann::json sweep_to_json(const SnapshotSweep& sweep);
void write_sweep_csv(const std::filesystem::path& path,
                     const SnapshotSweep& sweep);

}  // namespace lddl
