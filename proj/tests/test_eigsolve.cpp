#include "doctest.h"

#include <cmath>

#include "fracpq/eigsolve.hpp"
#include "fracpq/errors.hpp"
#include "test_support.hpp"

using namespace fracpq;
using fracpq::testing::ones;
using fracpq::testing::rel;

namespace {

EnergyBundle unit_bundle(int n, double s, double p) {
  const MeshPtr m = fracpq::testing::unit_mesh(n);
  return make_bundle(m, ProblemParams{s, p, 0.5 * (1.0 + p), 0.0, 0.0}, ones(m));
}

}  // namespace

TEST_CASE("linear oracle structure") {
  const MeshPtr m = fracpq::testing::unit_mesh(32);
  const GagliardoOperator op2 = assemble(m, 0.5, 2.0);
  const Matrix& A = op2.quadratic_form();
  CHECK((A - A.transpose()).cwiseAbs().maxCoeff() == 0.0);
  const auto modes = linear_oracle(op2, ones(m));
  REQUIRE(modes.size() == m->size());
  CHECK(modes.front().lambda > 1.0);
  for (std::size_t k = 1; k < modes.size(); ++k) CHECK(modes[k].lambda >= modes[k - 1].lambda);
  for (const OracleMode& mode : modes) CHECK(lp_norm_p(mode.u, 2.0) == doctest::Approx(1.0).epsilon(1e-10));
  CHECK_THROWS_AS(linear_oracle(build_mesh(Domain1D({{0.0, 1.0}}), 2), 0.5, ones(build_mesh(Domain1D({{0.0, 1.0}}), 2))),
                  ValidationError);
}

TEST_CASE("oracle spectral gap stabilizes under refinement") {
  const double gap128 = [] {
    const auto modes = linear_oracle(fracpq::testing::unit_mesh(64), 0.5, ones(fracpq::testing::unit_mesh(64)));
    return modes[1].lambda - modes[0].lambda;
  }();
  const MeshPtr fine = fracpq::testing::unit_mesh(128);
  const auto modes = linear_oracle(fine, 0.5, ones(fine));
  const double gap256 = modes[1].lambda - modes[0].lambda;
  CHECK(gap256 > 0.0);
  CHECK(rel(gap128, gap256) <= 0.02);
}

TEST_CASE("first and second eigenvalue agree with the linear oracle at p = 2") {
  for (double s : {0.3, 0.5, 0.8}) {
    const EnergyBundle b = unit_bundle(32, s, 2.0);
    const auto modes = linear_oracle(b.mesh(), s, b.V);
    const EigenReport r1 = lambda1(b, 1e-10, 1000, 0);
    CAPTURE(s);
    CHECK(r1.converged);
    CHECK(r1.residual <= 1e-10);
    CHECK(rel(r1.lambda_est, modes[0].lambda) <= 1e-8);
    const EigenReport r2 = lambda2_minimax(b, 1e-10, 0);
    CHECK(r2.converged);
    CHECK(rel(r2.lambda_est, modes[1].lambda) <= 1e-6);
    CHECK(r2.sign == SignProfile::sign_changing);
  }
}

TEST_CASE("lambda1 report contract") {
  for (double p : {1.5, 2.5, 3.0}) {
    const EnergyBundle b = unit_bundle(16, 0.5, p);
    // Below p = 2 the gradient is only Hoelder continuous where mirror nodes coincide,
    // which caps the attainable residual near the square root of rounding error.
    const double tol = p < 2.0 ? 1e-6 : 1e-9;
    const EigenReport r = lambda1(b, tol, 1000, 3);
    CAPTURE(p);
    CHECK(r.converged);
    CHECK(r.lambda_est > 1.0);
    CHECK(r.residual <= tol);
    CHECK(functional_J(b, r.eigenfunction) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(eigen_residual(b, r.eigenfunction, r.lambda_est) == doctest::Approx(r.residual).epsilon(1e-6).scale(1e-12));
    CHECK(r.sign == SignProfile::positive);
    REQUIRE_FALSE(r.trace.empty());
    for (std::size_t k = 1; k < r.trace.size(); ++k) CHECK(r.trace[k].quotient <= r.trace[k - 1].quotient);
    double lowest = r.trace.front().quotient;
    for (const TraceRow& row : r.trace) lowest = std::min(lowest, row.quotient);
    CHECK(r.lambda_est <= lowest + 1e-9 * lowest);

    const EnergyBundle doubled = with_potential(b, b.V.scaled(2.0));
    const EigenReport r2 = lambda1(doubled, tol, 1000, 3);
    CHECK(rel(r2.lambda_est, 0.5 * r.lambda_est) <= 1e-10);
    const double scale = std::pow(2.0, 1.0 / p);
    CHECK(lp_distance(scale * r2.eigenfunction.values, r.eigenfunction.values, b.h(), p) <= 1e-6);
  }
}

TEST_CASE("lambda2 exceeds lambda1 and bounds the odd path") {
  for (double p : {2.0, 2.5}) {
    const EnergyBundle b = unit_bundle(16, 0.5, p);
    const EigenReport r1 = lambda1(b, 1e-9, 1000, 0);
    const EigenReport r2 = lambda2_minimax(b, 1e-9, 0);
    CAPTURE(p);
    CHECK(r2.converged);
    CHECK(r2.lambda_est - r1.lambda_est >= 1e-3 * r1.lambda_est);
    CHECK(r2.eigenfunction.values.maxCoeff() > 0.0);
    CHECK(r2.eigenfunction.values.minCoeff() < 0.0);
    const PathProfile prof = odd_path_profile(b, r2.eigenfunction.values);
    REQUIRE(prof.value.size() == 128);
    for (double v : prof.value) CHECK(v <= r2.lambda_est + 1e-9 * r2.lambda_est);
    REQUIRE(r2.path_max.has_value());
    CHECK(*r2.path_max <= r2.lambda_est + 1e-9 * r2.lambda_est);
  }
}

TEST_CASE("ground state on a disconnected domain") {
  const MeshPtr m = build_mesh(Domain1D({{-1.0, -0.2}, {0.2, 1.0}}), 20);
  const EnergyBundle b = make_bundle(m, ProblemParams{0.5, 2.5, 1.5, 0.0, 0.0}, ones(m));
  const EigenReport r = lambda1(b, 1e-9, 1000, 0);
  REQUIRE(r.converged);
  const GroundStateReport g = check_ground_state_properties(r, b, 10);
  CHECK(g.constant_sign);
  CHECK(g.positive_on_every_component);
  REQUIRE(g.component_mins.size() == 2);
  CHECK(g.component_mins[0] > 0.0);
  CHECK(g.component_mins[1] > 0.0);
  CHECK(g.seeds_checked == 10);
  CHECK(g.simple);
  CHECK(g.simplicity_distance <= 1e-3);
  CHECK(g.symmetry_applicable);
  CHECK(g.symmetry_defect <= 1e-3);

  EigenReport flipped = r;
  flipped.eigenfunction.values = -r.eigenfunction.values;
  flipped.sign = SignProfile::negative;
  const GroundStateReport gf = check_ground_state_properties(flipped, b, 10);
  CHECK(gf.constant_sign == g.constant_sign);
  CHECK(gf.positive_on_every_component == g.positive_on_every_component);
  CHECK(gf.simple == g.simple);
  CHECK(gf.symmetry_defect == doctest::Approx(g.symmetry_defect).epsilon(1e-12).scale(1e-15));
}

TEST_CASE("ground state on a symmetric interval is even and radially monotone") {
  const EnergyBundle b = unit_bundle(24, 0.6, 3.0);
  const EigenReport r = lambda1(b, 1e-9, 1000, 0);
  const GroundStateReport g = check_ground_state_properties(r, b, 3);
  CHECK(g.symmetry_applicable);
  CHECK(g.symmetry_defect <= 1e-3);
  CHECK(g.monotonicity_applicable);
  CHECK(g.radially_monotone);
}

TEST_CASE("no admissible start") {
  const MeshPtr m = fracpq::testing::unit_mesh(8);
  Vector v = -Vector::Ones(static_cast<Eigen::Index>(m->size()));
  // The only positive sample underflows once multiplied by h |u|^p.
  v[0] = 5e-324;
  const EnergyBundle b = make_bundle(m, ProblemParams{0.5, 2.0, 1.5, 0.0, 0.0}, Potential(m, v));
  CHECK_THROWS_WITH_AS(lambda1(b, 1e-9, 100, 0), doctest::Contains("positivity set unresolved by mesh"), SolverError);
}

TEST_CASE("isolation probe finds no eigenvalue strictly between the first two") {
  const EnergyBundle b = unit_bundle(16, 0.5, 2.0);
  const auto modes = linear_oracle(b.mesh(), 0.5, b.V);
  const double l1 = modes[0].lambda, l2 = modes[1].lambda;
  const auto rows = isolation_probe(b, l1, l2, 5, 4, 1e-9, 0);
  REQUIRE(rows.size() == 5);
  const double delta = 0.05 * (l2 - l1);
  for (const IsolationRow& row : rows) {
    CHECK(row.lambda >= l1 + delta);
    CHECK(row.lambda <= l2 - delta);
    CHECK(row.converged_starts == 0);
    CHECK(row.min_residual > 1e-9);
  }
}

TEST_CASE("sign classification") {
  Vector u(4);
  u << 1.0, 2.0, 0.0, 3.0;
  CHECK(sign_profile(u) == SignProfile::positive);
  CHECK(sign_profile(Vector(-u)) == SignProfile::negative);
  u[2] = -1e-3;
  CHECK(sign_profile(u) == SignProfile::sign_changing);
  u[2] = -1e-12;
  CHECK(sign_profile(u) == SignProfile::positive);
  CHECK(to_string(SignProfile::sign_changing) == "sign_changing");
}
