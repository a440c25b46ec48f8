#include "doctest.h"

#include <atomic>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "fracpq/continuation.hpp"
#include "fracpq/errors.hpp"
#include "test_support.hpp"

using namespace fracpq;
using fracpq::testing::ones;
using fracpq::testing::rel;

namespace {

EnergyBundle pq_bundle(int n, double p, double q, double mu) {
  const MeshPtr m = fracpq::testing::unit_mesh(n);
  return make_bundle(m, ProblemParams{0.5, p, q, mu, 0.0}, ones(m));
}

double bump(double x) {
  const double y = x / 1.5;
  return (1.0 - y * y) * (1.0 - y * y);
}

}  // namespace

TEST_CASE("mesh coupling") {
  MeshCoupling c;
  CHECK(c.resolve(0.5) == 8);
  CHECK(c.resolve(0.9) >= 100);
  CHECK(c.resolve(0.9) <= 101);
  c.max_n = 200;
  CHECK(c.resolve(0.95) == 200);
  c.coupled = false;
  c.n_per_unit = 40;
  CHECK(c.resolve(0.95) == 40);
}

TEST_CASE("parallel_for visits every index once and rethrows") {
  CHECK(worker_count() >= 1);
  CHECK(worker_count(1) == 1);
  std::vector<std::atomic<int>> hits(57);
  parallel_for(hits.size(), 4, [&](std::size_t k) { hits[k]++; });
  for (const auto& h : hits) CHECK(h.load() == 1);
  CHECK_THROWS_AS(parallel_for(10, 3,
                               [](std::size_t k) {
                                 if (k == 7) throw std::runtime_error("boom");
                               }),
                  std::runtime_error);
}

TEST_CASE("log-log slope of a pure power") {
  const std::vector<double> x{1.0, 10.0, 100.0, 1000.0};
  std::vector<double> y;
  for (double v : x) y.push_back(3.0 * std::pow(v, -1.75));
  CHECK(loglog_slope(x, y) == doctest::Approx(-1.75).epsilon(1e-12));
}

TEST_CASE("quotient along the ground-state ray decays like t^-(p-q)") {
  for (auto [p, q] : {std::pair{3.0, 2.0}, std::pair{2.0, 1.5}, std::pair{2.5, 1.2}}) {
    const EnergyBundle b = pq_bundle(16, p, q, 1.0);
    const EigenReport ground = lambda1(with_mu(b, 0.0), 1e-10, 1000, 0);
    const SweepResult r = mu_quotient_decay(b, ground, {10.0, 100.0, 1000.0, 10000.0});
    CAPTURE(p);
    CAPTURE(q);
    REQUIRE(r.fitted_exponent.has_value());
    CHECK(std::abs(*r.fitted_exponent + (p - q)) <= 0.1 * (p - q));
    for (double a : r.column("above_lambda1")) CHECK(a == 1.0);
    const auto quotient = r.column("quotient");
    for (std::size_t k = 1; k < quotient.size(); ++k) CHECK(quotient[k] < quotient[k - 1]);
    const auto gap = r.column("gap");
    const auto predicted = r.column("predicted_gap");
    for (std::size_t k = 0; k < gap.size(); ++k) CHECK(rel(gap[k], predicted[k]) <= 1e-3);
  }
}

TEST_CASE("mu sweep") {
  const EnergyBundle b = pq_bundle(12, 3.0, 2.0, 1.0);
  const double l1 = lambda1(with_mu(b, 0.0), 1e-10, 1000, 0).lambda_est;
  SweepOptions opt;
  opt.tol = 1e-9;
  const std::vector<double> grid{1.0, 0.5, 0.25, 0.1};
  const SweepResult r = mu_sweep(b, 1.5 * l1, grid, opt);
  REQUIRE(r.rows.size() == grid.size());
  const auto m = r.column("m_lambda");
  for (std::size_t k = 0; k < m.size(); ++k) {
    CHECK(m[k] > 0.0);
    CHECK_FALSE(r.flagged[k]);
    // Substituting u = mu^{1/(p-q)} v maps the mu = 1 problem onto the mu problem and
    // multiplies the free energy by mu^{p/(p-q)}, which is mu^3 here.
    CHECK(rel(m[k], m[0] * std::pow(grid[k], 3.0)) <= 1e-6);
  }
  for (std::size_t k = 1; k < m.size(); ++k) CHECK(m[k] < m[k - 1]);
  CHECK_THROWS_AS(mu_sweep(b, 1.5 * l1, {0.5, 1.0}, opt), ValidationError);
  CHECK_THROWS_AS(mu_sweep(b, 0.9 * l1, grid, opt), ValidationError);
  const SweepResult again = mu_sweep(b, 1.5 * l1, grid, opt);
  CHECK(again.rows == r.rows);
}

TEST_CASE("seminorm approaches the gradient energy as s grows") {
  const Domain1D d({{-1.5, 1.5}});
  MeshCoupling c;
  const std::vector<double> grid{0.6, 0.7, 0.8, 0.9};
  for (double p : {2.0, 3.0}) {
    const SweepResult r = bbm_check(d, bump, p, grid, c);
    const auto err = r.column("rel_error");
    CAPTURE(p);
    for (std::size_t k = 1; k < err.size(); ++k) CHECK(err[k] < err[k - 1]);
    const SweepResult r3 = bbm_check(d, [](double x) { return 3.0 * bump(x); }, p, grid, c);
    const auto err3 = r3.column("rel_error");
    for (std::size_t k = 0; k < err.size(); ++k) CHECK(err3[k] == doctest::Approx(err[k]).epsilon(1e-12));
  }
  CHECK_THROWS_AS(bbm_check(d, bump, 2.0, {0.8, 0.7}, c), ValidationError);
}

TEST_CASE("local reference eigenvalue") {
  const MeshPtr m = build_mesh(Domain1D({{0.0, 1.0}}), 512);
  const double exact = 1.0 + std::numbers::pi * std::numbers::pi;
  const EigenReport r = local_reference_lambda1(m, 2.0, ones(m), 1e-10);
  CHECK(r.converged);
  CHECK(r.lambda_est > 1.0);
  CHECK(rel(r.lambda_est, exact) <= 0.02);
  const EigenReport r2 = local_reference_lambda1(m, 2.0, ones(m).scaled(2.0), 1e-10);
  CHECK(rel(r2.lambda_est, 0.5 * r.lambda_est) <= 1e-10);
}

TEST_CASE("stability sweep at p = 2") {
  const Domain1D d({{-1.0, 1.0}});
  MeshCoupling c;
  c.coupled = false;
  c.n_per_unit = 24;
  StabilityOptions opt;
  opt.tol = 1e-10;
  const ProblemParams base{0.5, 2.0, 1.5, 0.0, 0.0};
  const SweepResult r = s_stability_sweep(d, base, [](double) { return 1.0; }, {0.6, 0.8, 0.95}, c, opt);
  REQUIRE(r.rows.size() == 3);
  for (double e : r.column("rel_to_oracle")) CHECK(e <= 1e-8);
  const auto gap = r.column("rel_to_local");
  CHECK(gap.back() < gap.front());
  const auto dist = r.column("eig_distance");
  CHECK(std::isnan(dist[0]));
  CHECK(dist[2] < dist[1]);

  StabilityOptions with_level = opt;
  with_level.tol = 1e-9;
  with_level.nehari_lambda_factor = 1.5;
  const ProblemParams pq{0.5, 3.0, 2.0, 1.0, 0.0};
  const SweepResult rq = s_stability_sweep(d, pq, [](double) { return 1.0; }, {0.6, 0.8}, c, with_level);
  for (double level : rq.column("nehari_level")) CHECK(level > 0.0);
  for (double e : rq.column("rel_to_oracle")) CHECK(std::isnan(e));
}
