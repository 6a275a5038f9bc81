#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>

#include <Eigen/Eigenvalues>

#include "lddl/error.hpp"
#include "lddl/model_io.hpp"
#include "lddl/smallsignal.hpp"

using namespace lddl;
namespace fs = std::filesystem;

namespace {

const fs::path kData = LDDL_DATA_DIR;

Eigen::MatrixXd randm(std::mt19937_64& rng, Eigen::Index r, Eigen::Index c) {
  std::normal_distribution<double> n(0.0, 1.0);
  Eigen::MatrixXd m(r, c);
  for (Eigen::Index j = 0; j < c; ++j)
    for (Eigen::Index i = 0; i < r; ++i) m(i, j) = n(rng);
  return m;
}

Eigen::VectorXd smooth_fn(const Eigen::VectorXd& z) {
  Eigen::VectorXd out(2);
  out << std::sin(z(0)) * std::exp(z(1)), z(0) * z(0) * z(1) + std::cos(z(1));
  return out;
}

Eigen::MatrixXd smooth_jac(const Eigen::VectorXd& z) {
  Eigen::MatrixXd j(2, 2);
  j << std::cos(z(0)) * std::exp(z(1)), std::sin(z(0)) * std::exp(z(1)),
      2 * z(0) * z(1), z(0) * z(0) - std::sin(z(1));
  return j;
}

}  // namespace

TEST_CASE("finite-difference jacobian") {
  SUBCASE("exact for linear maps") {
    std::mt19937_64 rng(1);
    const Eigen::MatrixXd a = randm(rng, 5, 5);
    const Eigen::VectorXd z = randm(rng, 5, 1);
    const auto j = central_difference_jacobian(
        [&](const Eigen::VectorXd& x) -> Eigen::VectorXd { return a * x; }, z, 1e-3);
    CHECK((j - a).cwiseAbs().maxCoeff() < 1e-10);
  }
  SUBCASE("Richardson: second order stencil") {
    Eigen::VectorXd z(2);
    z << 0.7, -0.3;
    const Eigen::MatrixXd exact = smooth_jac(z);
    const double e1 = (central_difference_jacobian(smooth_fn, z, 1e-2) - exact).norm();
    const double e2 = (central_difference_jacobian(smooth_fn, z, 5e-3) - exact).norm();
    CHECK(e1 / e2 == doctest::Approx(4.0).epsilon(0.05));
  }
  SUBCASE("fourth order stencil") {
    Eigen::VectorXd z(2);
    z << 0.7, -0.3;
    const Eigen::MatrixXd exact = smooth_jac(z);
    const double e1 = (central_difference_jacobian(smooth_fn, z, 4e-2, Stencil::fourth_order) -
                       exact).norm();
    const double e2 = (central_difference_jacobian(smooth_fn, z, 2e-2, Stencil::fourth_order) -
                       exact).norm();
    CHECK(e1 / e2 == doctest::Approx(16.0).epsilon(0.1));
  }
  CHECK_THROWS_AS(central_difference_jacobian(smooth_fn, Eigen::VectorXd::Zero(2), 0.0),
                  DomainError);
}

TEST_CASE("linearize at the bundled equilibrium") {
  const GridModel m = load_model(kData / "models/three_bus.json");
  const std::vector<int> buses{2};
  const std::vector<double> loads{1.0};
  const auto eq = equilibrium_at(m, buses, loads);
  const auto lin = linearize(eq);
  const auto nx = static_cast<Eigen::Index>(eq.system.num_states());
  const auto np = static_cast<Eigen::Index>(eq.system.num_algebraic());
  CHECK(lin.a11.rows() == nx);
  CHECK(lin.a13.cols() == np);
  CHECK(lin.a23.rows() == np);
  CHECK(lin.a23.cols() == np);
  CHECK(lin.a14.cols() == 1);
  // g does not see setpoints or demand.
  CHECK(lin.a22.cwiseAbs().maxCoeff() == 0.0);
  CHECK(lin.a24.cwiseAbs().maxCoeff() == 0.0);
  // Analytic dg/dp agrees with the finite-difference block.
  const Eigen::MatrixXd gj = eq.system.g_jacobian(eq.state.x, eq.state.p);
  CHECK((gj - lin.a23).cwiseAbs().maxCoeff() < 1e-7);

  const Eigen::MatrixXd a = reduce_state_matrix(lin);
  const auto rep = modal_analysis(a);
  int zero = 0;
  for (const auto& md : rep.modes) zero += md.zero_mode;
  CHECK(zero == 1);
  CHECK(rep.abscissa > 0.0);

  Eigen::VectorXd x = eq.state.x;
  x(0) += 0.05;
  try {
    linearize(eq.system, x, eq.state.p, eq.loads);
    FAIL("expected PreconditionError");
  } catch (const PreconditionError& e) {
    CHECK(e.residual() > 1e-8);
  }
}

TEST_CASE("Schur reduction") {
  SUBCASE("no coupling") {
    std::mt19937_64 rng(2);
    const Eigen::MatrixXd a11 = randm(rng, 4, 4);
    const Eigen::MatrixXd a13 = Eigen::MatrixXd::Zero(4, 3);
    const Eigen::MatrixXd a21 = randm(rng, 3, 4);
    const Eigen::MatrixXd a23 = randm(rng, 3, 3) + 3 * Eigen::MatrixXd::Identity(3, 3);
    CHECK(reduce_state_matrix(a11, a13, a21, a23) == a11);
  }
  SUBCASE("scalar blocks") {
    const Eigen::MatrixXd a11{{2.0}}, a13{{1.0}}, a21{{4.0}}, a23{{2.0}};
    CHECK(reduce_state_matrix(a11, a13, a21, a23)(0, 0) == doctest::Approx(0.0));
  }
  SUBCASE("random blocks against explicit elimination") {
    std::mt19937_64 rng(3);
    for (int rep = 0; rep < 20; ++rep) {
      const Eigen::MatrixXd a11 = randm(rng, 6, 6), a13 = randm(rng, 6, 4),
                            a21 = randm(rng, 4, 6);
      const Eigen::MatrixXd a23 = randm(rng, 4, 4) + 4 * Eigen::MatrixXd::Identity(4, 4);
      const Eigen::MatrixXd ref = a11 - a13 * a23.inverse() * a21;
      CHECK((reduce_state_matrix(a11, a13, a21, a23) - ref).cwiseAbs().maxCoeff() < 1e-12);
    }
  }
  SUBCASE("singular algebraic block") {
    const Eigen::MatrixXd a11 = Eigen::MatrixXd::Identity(2, 2);
    const Eigen::MatrixXd a13 = Eigen::MatrixXd::Ones(2, 2);
    const Eigen::MatrixXd a21 = Eigen::MatrixXd::Ones(2, 2);
    const Eigen::MatrixXd a23{{1.0, 2.0}, {2.0, 4.0}};
    CHECK_THROWS_AS(reduce_state_matrix(a11, a13, a21, a23), SingularityError);
  }
  SUBCASE("input matrices use the Schur complement") {
    std::mt19937_64 rng(4);
    LinearizedSystem lin;
    lin.a11 = randm(rng, 3, 3);
    lin.a12 = randm(rng, 3, 2);
    lin.a13 = randm(rng, 3, 2);
    lin.a14 = randm(rng, 3, 1);
    lin.a21 = randm(rng, 2, 3);
    lin.a22 = randm(rng, 2, 2);
    lin.a23 = randm(rng, 2, 2) + 3 * Eigen::MatrixXd::Identity(2, 2);
    lin.a24 = randm(rng, 2, 1);
    const auto in = reduce_input_matrices(lin);
    const Eigen::MatrixXd inv = lin.a23.inverse();
    CHECK((in.bu - (lin.a12 - lin.a13 * inv * lin.a22)).norm() < 1e-12);
    CHECK((in.bv - (lin.a14 - lin.a13 * inv * lin.a24)).norm() < 1e-12);
  }
}

TEST_CASE("modal analysis") {
  SUBCASE("damped pair") {
    const double s = -0.5, w = 2 * std::numbers::pi * 0.4;
    const Eigen::MatrixXd a{{s, w}, {-w, s}};
    const auto rep = modal_analysis(a);
    REQUIRE(rep.modes.size() == 2);
    for (const auto& md : rep.modes) {
      CHECK(md.frequency_hz == doctest::Approx(0.4));
      CHECK(md.damping == doctest::Approx(0.1951).epsilon(1e-3));
    }
    CHECK(rep.abscissa == doctest::Approx(0.5));
    CHECK(!rep.critical);
  }
  SUBCASE("undamped pair") {
    const Eigen::MatrixXd a{{0.0, 1.0}, {-1.0, 0.0}};
    StabilityThresholds th;
    th.zeta_min = 1e-6;
    const auto rep = modal_analysis(a, th);
    CHECK(rep.zeta_min == doctest::Approx(0.0));
    CHECK(rep.abscissa == doctest::Approx(0.0));
    CHECK(rep.critical);
  }
  SUBCASE("zero mode excluded") {
    const Eigen::MatrixXd a{{0.0, 0.0}, {0.0, -2.0}};
    const auto rep = modal_analysis(a);
    CHECK(rep.abscissa == doctest::Approx(2.0));
    CHECK(rep.zeta_min == doctest::Approx(1.0));
    CHECK(!rep.critical);
  }
  SUBCASE("conjugate pairs and bounded damping") {
    std::mt19937_64 rng(5);
    const auto rep = modal_analysis(randm(rng, 9, 9));
    for (const auto& md : rep.modes) {
      CHECK(md.damping >= -1.0);
      CHECK(md.damping <= 1.0);
      CHECK(md.frequency_hz == doctest::Approx(std::abs(md.lambda.imag()) / (2 * std::numbers::pi)));
      if (md.lambda.imag() != 0.0) {
        int conj = 0;
        for (const auto& o : rep.modes)
          conj += std::abs(o.lambda - std::conj(md.lambda)) < 1e-10;
        CHECK(conj == 1);
      }
    }
  }
}

TEST_CASE("participation factors") {
  std::mt19937_64 rng(6);
  SUBCASE("columns sum to one") {
    for (int rep = 0; rep < 30; ++rep) {
      const auto p = participation_factors(randm(rng, 7, 7));
      for (Eigen::Index j = 0; j < 7; ++j)
        CHECK(std::abs(p.factors.col(j).sum() - 1.0) < 1e-12);
      CHECK(p.factors.minCoeff() >= 0.0);
    }
  }
  SUBCASE("diagonal matrix gives identity") {
    const Eigen::VectorXd d{{-3.0, -1.0, -2.0}};
    const auto p = participation_factors(d.asDiagonal().toDenseMatrix());
    for (Eigen::Index j = 0; j < 3; ++j) {
      Eigen::Index k;
      (d.array() - p.eigenvalues(j).real()).abs().minCoeff(&k);
      CHECK(p.factors(k, j) == 1.0);
      CHECK(p.factors.col(j).sum() == 1.0);
    }
  }
  SUBCASE("invariant under diagonal state scaling") {
    const Eigen::MatrixXd a = randm(rng, 5, 5);
    Eigen::VectorXd t(5);
    t << 1.0, 10.0, 0.1, 3.0, 0.5;
    const Eigen::MatrixXd b = t.asDiagonal() * a * t.cwiseInverse().asDiagonal();
    const auto pa = participation_factors(a), pb = participation_factors(b);
    for (Eigen::Index j = 0; j < 5; ++j) {
      Eigen::Index k;
      (pb.eigenvalues.array() - pa.eigenvalues(j)).abs().minCoeff(&k);
      CHECK((pa.factors.col(j) - pb.factors.col(k)).cwiseAbs().maxCoeff() < 1e-9);
    }
  }
  SUBCASE("defective matrix") {
    const Eigen::MatrixXd j{{1.0, 1.0}, {0.0, 1.0}};
    CHECK_THROWS_AS(participation_factors(j), ConditioningError);
  }
}

TEST_CASE("eigenvalue perturbation") {
  SUBCASE("diagonal") {
    const Eigen::MatrixXd a = Eigen::Vector3d(-1, -2, -3).asDiagonal();
    const Eigen::MatrixXd da = Eigen::Vector3d(0.1, 0.2, 0.3).asDiagonal();
    const Eigen::VectorXcd ev = Eigen::EigenSolver<Eigen::MatrixXd>(a).eigenvalues();
    for (std::size_t i = 0; i < 3; ++i) {
      const auto idx = static_cast<Eigen::Index>(i);
      Eigen::Index k;
      (Eigen::Vector3d(-1, -2, -3).array() - ev(idx).real()).abs().minCoeff(&k);
      CHECK(std::abs(eigenvalue_perturbation(a, da, i) - cplx(da(k, k), 0)) < 1e-14);
    }
  }
  SUBCASE("symmetric first-order agreement") {
    std::mt19937_64 rng(7);
    for (int rep = 0; rep < 10; ++rep) {
      const Eigen::MatrixXd r = randm(rng, 4, 4);
      const Eigen::MatrixXd a = r + r.transpose();
      const Eigen::MatrixXd e = randm(rng, 4, 4);
      const Eigen::MatrixXd da = 1e-5 * (e + e.transpose());
      const Eigen::VectorXcd l0 = Eigen::EigenSolver<Eigen::MatrixXd>(a).eigenvalues();
      const Eigen::VectorXcd l1 = Eigen::EigenSolver<Eigen::MatrixXd>(a + da).eigenvalues();
      for (std::size_t i = 0; i < 4; ++i) {
        const cplx pred = eigenvalue_perturbation(a, da, i);
        Eigen::Index k;
        (l1.array() - l0(static_cast<Eigen::Index>(i)) - pred).abs().minCoeff(&k);
        CHECK(std::abs(l1(k) - l0(static_cast<Eigen::Index>(i)) - pred) < 1e-8);
      }
    }
  }
  SUBCASE("repeated eigenvalue") {
    const Eigen::MatrixXd a = Eigen::MatrixXd::Identity(3, 3);
    CHECK_THROWS_AS(eigenvalue_perturbation(a, a, 0), DegeneracyError);
  }
}

TEST_CASE("hausdorff distance and safe set") {
  const std::vector<cplx> z{0.0}, p{{3.0, 4.0}}, a{0.0, 1.0}, b{1.0, 2.0};
  CHECK(hausdorff_distance(a, a) == 0.0);
  CHECK(hausdorff_distance(z, p) == doctest::Approx(5.0));
  CHECK(hausdorff_distance(a, b) == doctest::Approx(1.0));
  CHECK_THROWS_AS(hausdorff_distance(std::vector<cplx>{}, a), DomainError);

  const std::vector<cplx> stable{-1.0, {-0.2, 3.0}};
  CHECK(classify_safe_set(stable).violating.empty());
  const std::vector<cplx> mixed{-1.0, 0.09};
  const auto split = classify_safe_set(mixed);
  CHECK(split.safe == std::vector<cplx>{-1.0});
  CHECK(split.violating == std::vector<cplx>{0.09});
}

TEST_CASE("snapshot sweeps") {
  const GridModel tuned = load_model(kData / "models/three_bus_tuned.json");
  const std::vector<int> buses{2};
  const std::vector<double> nominal{1.0};

  SUBCASE("single point equals direct analysis") {
    const std::vector<double> ramp{0.0};
    const auto sw = snapshot_sweep(tuned, buses, nominal, ramp);
    REQUIRE(sw.points.size() == 1);
    const auto direct = modal_analysis(reduced_matrix_at(tuned, buses, nominal, 0.0));
    CHECK(sw.points[0].ok);
    CHECK(sw.points[0].modal.abscissa == direct.abscissa);
    CHECK(!sw.points[0].hausdorff_to_previous);
    CHECK(sw.points[0].top_participants.size() == 5);
    double total = 0.0;
    for (const auto& row : sw.points[0].top_participants) total += row.factor;
    CHECK(total <= 1.0 + 1e-12);
  }
  SUBCASE("violating sets coincide with unstable flagged points") {
    std::vector<double> ramp;
    for (int k = 0; k <= 8; ++k) ramp.push_back(-0.25 + 0.05 * k);
    const auto sw = snapshot_sweep(tuned, buses, nominal, ramp);
    REQUIRE(sw.points.size() == 9);
    for (std::size_t i = 0; i < 9; ++i) {
      const auto& pt = sw.points[i];
      REQUIRE(pt.ok);
      const bool unstable = -pt.modal.abscissa > 0.0;
      CHECK(!pt.split.violating.empty() == unstable);
      if (unstable) CHECK(pt.modal.critical);
      if (i > 0) CHECK(pt.hausdorff_to_previous.has_value());
    }
    CHECK(sweep_to_json(sw)["points"].size() == 9);

    const fs::path out = fs::temp_directory_path() / "lddl_sweep.csv";
    write_sweep_csv(out, sw);
    std::ifstream in(out);
    std::string header;
    std::getline(in, header);
    CHECK(header == "multiplier,least_damped_re,zeta_min,hausdorff_prev");
    fs::remove(out);
  }
  SUBCASE("infeasible point is recorded") {
    const std::vector<double> ramp{0.0, 80.0, 0.05};
    const auto sw = snapshot_sweep(tuned, buses, nominal, ramp);
    REQUIRE(sw.points.size() == 3);
    CHECK(sw.points[0].ok);
    CHECK(!sw.points[1].ok);
    CHECK(!sw.points[1].error.empty());
    CHECK(sw.points[2].ok);
    CHECK(!sw.points[2].hausdorff_to_previous);
  }
  SUBCASE("crossing bisection") {
    const auto c = find_stability_crossing(tuned, buses, nominal, 0.0, 0.15, 1e-4);
    CHECK(c.unstable - c.stable <= 1e-4);
    CHECK(modal_analysis(reduced_matrix_at(tuned, buses, nominal, c.stable)).abscissa > 0.0);
    CHECK(modal_analysis(reduced_matrix_at(tuned, buses, nominal, c.unstable)).abscissa <= 0.0);
    CHECK_THROWS_AS(find_stability_crossing(tuned, buses, nominal, -0.25, -0.2, 1e-3),
                    DomainError);
  }
  SUBCASE("Hausdorff distances shrink with the ramp increment") {
    double prev = std::numeric_limits<double>::infinity();
    for (double h = 0.04; h > 0.004; h /= 2) {
      const std::vector<double> ramp{0.0, h};
      const double d = *snapshot_sweep(tuned, buses, nominal, ramp).points[1].hausdorff_to_previous;
      CHECK(d <= prev + 1e-12);
      prev = d;
    }
  }
}
