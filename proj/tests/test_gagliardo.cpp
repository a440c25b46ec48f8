#include "doctest.h"

#include <cmath>
#include <random>

#include "fracpq/errors.hpp"
#include "fracpq/gagliardo.hpp"
#include "test_support.hpp"

using namespace fracpq;
using fracpq::testing::random_vector;
using fracpq::testing::rel;

namespace {

using fracpq::testing::kink_separated;

double max_fd_error(const SeminormOperator& op, const Vector& u) {
  return fracpq::testing::max_fd_error([&](const Vector& v) { return op.value(v); },
                                       [&](const Vector& v) { return op.gradient(v); }, u);
}

}  // namespace

TEST_CASE("normalizing constants") {
  CHECK(bbm_constant(1, 2.0) == 1.0);
  CHECK(bbm_constant(1, 3.0) == 1.5);
  CHECK_THROWS_AS(bbm_constant(2, 2.0), ValidationError);
  CHECK(normalizing_constant(0.3, 2.5) == doctest::Approx(0.7 * 1.25));
  const GagliardoOperator op = assemble(fracpq::testing::unit_mesh(8), 0.4, 3.0);
  CHECK(op.constant() == doctest::Approx(0.6 * 1.5));
}

TEST_CASE("exterior kernel integral in closed form") {
  const double beta = 0.7;
  const Domain1D single({{-1.0, 2.0}});
  const double x = 0.3;
  const double expected = (std::pow(x + 1.0, -beta) + std::pow(2.0 - x, -beta)) / beta;
  CHECK(exterior_kernel_integral(single, x, beta) == doctest::Approx(expected).epsilon(1e-14));

  // A gap (a, b) adds the integral of |x - y|^{-1-beta} over it.
  const Domain1D two({{-1.0, -0.2}, {0.2, 1.0}});
  const double y = -0.5;
  const double gap = (std::pow(-0.2 - y, -beta) - std::pow(0.2 - y, -beta)) / beta;
  const double tails = (std::pow(y + 1.0, -beta) + std::pow(1.0 - y, -beta)) / beta;
  CHECK(exterior_kernel_integral(two, y, beta) == doctest::Approx(gap + tails).epsilon(1e-14));
}

TEST_CASE("assembled weights are symmetric and nonnegative") {
  for (const Domain1D& d : {Domain1D({{-1.0, 1.0}}), Domain1D({{-1.0, -0.2}, {0.2, 1.0}})}) {
    const MeshPtr m = build_mesh(d, 20);
    for (double a : {1.5, 2.0, 3.0}) {
      const GagliardoOperator op = assemble(m, 0.5, a);
      const Matrix& w = op.pair_weights();
      CHECK((w - w.transpose()).cwiseAbs().maxCoeff() == 0.0);
      CHECK(w.minCoeff() >= 0.0);
      CHECK(w.diagonal().cwiseAbs().maxCoeff() == 0.0);
      CHECK(op.tail_weights().minCoeff() >= 0.0);
      for (std::size_t k = 0; k < d.component_count(); ++k) {
        const auto [first, last] = m->component_range(k);
        CHECK(op.tail_weights()[static_cast<Eigen::Index>(first)] > 0.0);
        CHECK(op.tail_weights()[static_cast<Eigen::Index>(last - 1)] > 0.0);
      }
    }
  }
}

TEST_CASE("far-field pair weights against a high-precision double quadrature") {
  // Cell-pair integrals of |x - y|^{-1 - s alpha} over two cells of width h = 1/64
  // at lattice distance k, evaluated with 30-digit adaptive quadrature (mpmath).
  struct Row {
    double s, alpha;
    int k;
    double integral;
  };
  const Row rows[] = {
      {0.5, 2.0, 10, 0.010050335853501441},   {0.5, 2.0, 16, 0.0039138993211363291},
      {0.5, 2.0, 20, 0.0025031302181185304},  {0.5, 2.0, 40, 0.00062519539391837439},
      {0.5, 3.0, 10, 0.025484222692491622},   {0.5, 3.0, 16, 0.0078348243572703914},
      {0.5, 3.0, 20, 0.0044803051370262175},  {0.5, 3.0, 40, 0.00079092988645616861},
      {0.7, 2.5, 10, 0.040586841801114128},   {0.7, 2.5, 16, 0.011085765066806031},
      {0.7, 2.5, 20, 0.0059942750955654078},  {0.7, 2.5, 40, 0.0008896175421890739},
      {0.3, 1.5, 10, 0.0036131950710498037},  {0.3, 1.5, 16, 0.0018244416503637126},
      {0.3, 1.5, 20, 0.001319560286167878},   {0.3, 1.5, 40, 0.00048271900866726681},
  };
  const MeshPtr m = build_mesh(Domain1D({{-1.0, 1.0}}), 64);
  const double h = m->h();
  const Eigen::Index i = 20;
  for (const Row& r : rows) {
    const GagliardoOperator op = assemble(m, r.s, r.alpha);
    const double d = r.k * h;
    const double midpoint = h * h * std::pow(d, -1.0 - r.s * r.alpha);
    CAPTURE(r.s);
    CAPTURE(r.alpha);
    CAPTURE(r.k);
    CHECK(rel(midpoint, r.integral) <= 0.01);
    CHECK(rel(op.pair_weights()(i, i + r.k), r.integral) <= 0.01);
  }
}

TEST_CASE("hat function seminorm converges under refinement") {
  // Continuum value for s = 1/2, alpha = 2 of the hat 1 - |x| on (-1, 1) is 4 ln 2,
  // obtained by adaptive quadrature of the difference integral.
  const double continuum = 2.772588722239781;
  auto hat_value = [](int n) {
    const MeshPtr m = build_mesh(Domain1D({{-1.0, 1.0}}), n);
    Vector u(static_cast<Eigen::Index>(m->size()));
    for (std::size_t k = 0; k < m->size(); ++k) u[static_cast<Eigen::Index>(k)] = 1.0 - std::abs(m->nodes()[k]);
    return seminorm_pow(assemble(m, 0.5, 2.0), NodalFunction(m, u));
  };
  const double coarse = hat_value(64);
  const double fine = hat_value(512);
  CHECK(rel(coarse, fine) <= 0.02);
  CHECK(rel(fine, continuum) <= 1e-3);
  CHECK(rel(coarse, continuum) <= 1e-2);
}

TEST_CASE("value, pairing and gradient identities") {
  std::mt19937_64 rng(3);
  const MeshPtr m = fracpq::testing::unit_mesh(16);
  std::uniform_real_distribution<double> cdist(-2.0, 2.0);
  for (double a : {1.5, 2.0, 3.0}) {
    const GagliardoOperator op = assemble(m, 0.6, a);
    CHECK(op.value(Vector::Zero(static_cast<Eigen::Index>(m->size()))) == 0.0);
    CHECK(op.gradient(Vector::Zero(static_cast<Eigen::Index>(m->size()))).cwiseAbs().maxCoeff() == 0.0);
    for (int trial = 0; trial < 20; ++trial) {
      const Vector u = random_vector(m->size(), rng);
      const Vector v = random_vector(m->size(), rng);
      const Vector w = random_vector(m->size(), rng);
      const double c = cdist(rng);
      CHECK(op.value(u) > 0.0);
      CHECK(op.weak_action(u, u) == doctest::Approx(op.value(u)).epsilon(1e-12));
      CHECK(op.weak_action(u, v + w) ==
            doctest::Approx(op.weak_action(u, v) + op.weak_action(u, w)).epsilon(1e-12).scale(op.value(u)));
      CHECK(op.weak_action(u, v) == doctest::Approx(op.gradient(u).dot(v) / a).epsilon(1e-12).scale(op.value(u)));
      CHECK(op.value(Vector(c * u)) == doctest::Approx(std::pow(std::abs(c), a) * op.value(u)).epsilon(1e-12));
      CHECK((op.gradient(Vector(-u)) + op.gradient(u)).cwiseAbs().maxCoeff() == 0.0);
    }
  }
  const GagliardoOperator op2 = assemble(m, 0.6, 2.0);
  const Vector u = random_vector(m->size(), rng);
  CHECK(op2.value(u) == doctest::Approx(u.dot(op2.quadratic_form() * u)).epsilon(1e-12));
}

TEST_CASE("gradients match central differences") {
  std::mt19937_64 rng(5);
  const MeshPtr m = build_mesh(Domain1D({{-1.0, -0.2}, {0.2, 1.0}}), 12);
  for (double s : {0.3, 0.7}) {
    for (double a : {2.0, 2.5, 3.0, 4.0}) {
      const GagliardoOperator op = assemble(m, s, a);
      for (int trial = 0; trial < 3; ++trial) CHECK(max_fd_error(op, random_vector(m->size(), rng)) <= 1e-6);
    }
    for (double a : {1.2, 1.5, 1.8}) {
      const GagliardoOperator op = assemble(m, s, a);
      for (int trial = 0; trial < 3; ++trial) CHECK(max_fd_error(op, kink_separated(m->size(), rng)) <= 1e-4);
    }
  }
  for (double a : {1.5, 2.0, 3.0}) {
    const LocalGradientOperator loc(m, a);
    CHECK(max_fd_error(loc, kink_separated(m->size(), rng)) <= 1e-6);
  }
}

TEST_CASE("hessian matches differences of the gradient") {
  std::mt19937_64 rng(9);
  const MeshPtr m = fracpq::testing::unit_mesh(8);
  for (double a : {2.0, 3.0}) {
    const GagliardoOperator op = assemble(m, 0.5, a);
    const Vector u = random_vector(m->size(), rng);
    const Matrix H = op.hessian(u);
    const double step = 1e-6;
    for (Eigen::Index k = 0; k < u.size(); ++k) {
      Vector up = u, dn = u;
      up[k] += step;
      dn[k] -= step;
      const Vector col = (op.gradient(up) - op.gradient(dn)) / (2.0 * step);
      CHECK((col - H.col(k)).norm() <= 1e-6 * H.norm());
    }
  }
}

TEST_CASE("monotone operator, contraction and homogeneity on random samples") {
  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> tdist(-3.0, 3.0);
  const MeshPtr m = build_mesh(Domain1D({{-1.0, -0.2}, {0.2, 1.0}}), 10);
  for (double a : {1.5, 2.0, 3.0}) {
    const GagliardoOperator op = assemble(m, 0.5, a);
    int violations = 0;
    for (int trial = 0; trial < 1000; ++trial) {
      const Vector u = random_vector(m->size(), rng);
      const Vector v = random_vector(m->size(), rng);
      const Vector d = u - v;
      if (op.weak_action(u, d) - op.weak_action(v, d) < -1e-12) ++violations;
      if (op.value(u.cwiseAbs()) > op.value(u) * (1.0 + 1e-14)) ++violations;
      const double t = tdist(rng);
      if (rel(op.value(Vector(t * u)), std::pow(std::abs(t), a) * op.value(u)) > 1e-12) ++violations;
    }
    CAPTURE(a);
    CHECK(violations == 0);
  }
}

TEST_CASE("first-difference energy") {
  const MeshPtr m = build_mesh(Domain1D({{0.0, 1.0}}), 2);
  Vector u(1);
  u << 1.0;
  // Hat of height 1 on (0, 1): slope 2 on both halves.
  CHECK(LocalGradientOperator(m, 2.0).value(u) == doctest::Approx(4.0));
  CHECK(LocalGradientOperator(m, 3.0).value(u) == doctest::Approx(8.0));
  std::mt19937_64 rng(1);
  const MeshPtr fine = fracpq::testing::unit_mesh(10);
  const LocalGradientOperator loc(fine, 2.5);
  const Vector v = random_vector(fine->size(), rng);
  CHECK(loc.weak_action(v, v) == doctest::Approx(loc.value(v)).epsilon(1e-12));
}
