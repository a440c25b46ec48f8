#include "fracpq/nehari.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>

#include "fracpq/errors.hpp"
#include "solver_util.hpp"

namespace fracpq {

namespace {

constexpr double kNewtonSwitch = 1e-2;
constexpr double kArmijo = 1e-4;
constexpr int kStagnation = 40;

void require_q(const EnergyBundle& b) {
  if (!b.has_q()) throw ValidationError("Nehari machinery needs mu > 0");
}

// t0(w) w, or nothing when the ray never meets the manifold.
std::optional<Vector> project(const EnergyBundle& b, const Vector& w, double lambda) {
  const FiberingData f = fibering(b, w, lambda);
  if (!f.t0 || !std::isfinite(*f.t0)) return std::nullopt;
  return Vector(*f.t0 * w);
}

double residual(const EnergyBundle& b, const Vector& u, double lambda) {
  return detail::eigen_residual(b, u, lambda);
}

struct DescentResult {
  Vector u;
  int iterations = 0;
  bool converged = false;
  std::vector<TraceRow> trace;
};

// Alternates a step on the free energy L with re-projection onto the manifold
// along the ray. Far from a critical point the step is the L-gradient
// preconditioned by the Hessian of pq and is accepted by Armijo on L o project;
// close to one it is a Newton step on grad L = 0 accepted when the residual drops.
template <typename OnIterate>
DescentResult nehari_descent(const EnergyBundle& b, double lambda, const Vector& start, double tol,
                             int max_iter, OnIterate&& on_iterate) {
  DescentResult out;
  auto proj = project(b, start, lambda);
  if (!proj) throw SolverError("start direction does not meet the Nehari manifold");
  Vector u = std::move(*proj);
  const double p = b.params.p;
  const double q = b.params.q;
  const double mu = b.params.mu;
  // Energy steps may raise the residual, and for q < 2 it reacts like
  // |delta|^{q-1} to tiny perturbations, so the best iterate is kept.
  Vector best = u;
  double best_res = std::numeric_limits<double>::infinity();
  int best_it = 0;
  int it = 0;
  for (;; ++it) {
    const Vector g = detail::grad_lagrangian(b, u, lambda);
    const double E = detail::lagrangian(b, u, lambda);
    const double res = g.norm() / detail::grad_pq(b, u).norm();
    out.trace.push_back({it, E, res});
    on_iterate(it, u);
    if (res < best_res) {
      best_res = res;
      best = u;
      best_it = it;
    }
    if (res <= tol) {
      out.converged = true;
      break;
    }
    if (it >= max_iter || it - best_it >= kStagnation) break;

    bool moved = false;
    if (res < kNewtonSwitch) {
      const Matrix H = detail::hess_lagrangian(b, u, lambda);
      Eigen::PartialPivLU<Matrix> lu(H);
      const Vector d = lu.solve(-g);
      if (d.allFinite()) {
        double t = 1.0;
        for (int k = 0; k < 8 && !moved; ++k, t *= 0.5) {
          auto v = project(b, Vector(u + t * d), lambda);
          if (!v) continue;
          if (residual(b, *v, lambda) < res) {
            u = std::move(*v);
            moved = true;
          }
        }
      }
    }
    if (!moved) {
      Matrix P = detail::hess_I(b, u) / p;
      P += mu / q * detail::hess_B(b, u);
      const Vector d = -detail::spd_solve(std::move(P), g);
      const double slope = g.dot(d);
      double t = 1.0;
      for (int k = 0; k < 60 && !moved && slope < 0.0; ++k, t *= 0.5) {
        auto v = project(b, Vector(u + t * d), lambda);
        if (!v) continue;
        const double Ev = detail::lagrangian(b, *v, lambda);
        if (Ev <= E + kArmijo * t * slope) {
          u = std::move(*v);
          moved = true;
        }
      }
    }
    if (!moved) break;
  }
  out.iterations = it;
  out.u = std::move(best);
  return out;
}

double identity_defect(const EnergyBundle& b, const Vector& u, double lambda) {
  const double L = detail::lagrangian(b, u, lambda);
  const double p = b.params.p;
  const double q = b.params.q;
  const double rhs = b.params.mu * (1.0 / q - 1.0 / p) * detail::B(b, u);
  return std::abs(L - rhs) / std::max(1.0, L);
}

double nehari_residual(const EnergyBundle& b, const Vector& u, double lambda) {
  const double pairing = detail::grad_lagrangian(b, u, lambda).dot(u);
  return std::abs(pairing) / detail::grad_pq(b, u).dot(u);
}

EigenReport ground_state(const EnergyBundle& b, double tol, std::uint64_t seed) {
  return lambda1(with_mu(b, 0.0), tol, 1000, seed);
}

}  // namespace

FiberingData fibering(const EnergyBundle& b, const Vector& w, double lambda) {
  require_q(b);
  FiberingData f;
  f.A = lambda * detail::J(b, w) - detail::I(b, w);
  f.B = b.params.mu * detail::B(b, w);
  if (f.A > 0.0) f.t0 = std::pow(f.B / f.A, 1.0 / (b.params.p - b.params.q));
  return f;
}

FiberingData fibering(const EnergyBundle& b, const NodalFunction& w, double lambda) {
  return fibering(b, w.values, lambda);
}

CertificateReport nonexistence_certificate(const EnergyBundle& b, double lambda, int trials,
                                           std::uint64_t seed, const NodalFunction* seed_function) {
  if (trials < 1) throw ValidationError("certificate needs at least one trial");
  CertificateReport rep;
  rep.lambda = lambda;
  const Mesh& mesh = *b.mesh();
  const auto n = static_cast<Eigen::Index>(mesh.size());
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uni(-1.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);

  auto draw = [&](long k) -> Vector {
    Vector w(n);
    if (seed_function && k == 0) return seed_function->values;
    switch (k % 4) {
      case 0:
        for (Eigen::Index i = 0; i < n; ++i) w[i] = uni(rng);
        return w;
      case 1:
      case 2: {
        // Random sine series per component; case 2 keeps only its modulus.
        std::array<double, 8> a{};
        for (auto& c : a) c = normal(rng);
        for (Eigen::Index i = 0; i < n; ++i) {
          const auto& iv = mesh.domain().intervals()[mesh.node_component()[static_cast<std::size_t>(i)]];
          const double y = (mesh.nodes()[static_cast<std::size_t>(i)] - iv.lo) / iv.length();
          double v = 0.0;
          for (std::size_t m = 0; m < a.size(); ++m)
            v += a[m] / static_cast<double>(m + 1) * std::sin(std::numbers::pi * static_cast<double>(m + 1) * y);
          w[i] = v;
        }
        if (k % 4 == 2) w = w.cwiseAbs();
        return w;
      }
      default:
        if (seed_function) {
          w = seed_function->values;
          detail::add_relative_noise(w, 0.05, rng());
        } else {
          w = detail::endpoint_bump(mesh);
          detail::add_relative_noise(w, 0.5, rng());
        }
        return w;
    }
  };

  const long max_draws = 50L * trials;
  for (long k = 0; k < max_draws && rep.trials < trials; ++k) {
    const Vector w = draw(k);
    const double Jw = detail::J(b, w);
    if (!(Jw > 0.0)) {
      ++rep.rejected;
      continue;
    }
    const double Iw = detail::I(b, w);
    ++rep.trials;
    rep.max_ratio = std::max(rep.max_ratio, lambda * Jw / Iw);
    if (lambda * Jw - Iw <= 0.0)
      ++rep.passes;
    else
      ++rep.failures;
  }
  rep.pass = rep.trials == trials && rep.failures == 0;
  return rep;
}

NehariReport solve_m_lambda(const EnergyBundle& b, double lambda, double tol, std::uint64_t seed,
                            const EigenReport* ground, int max_iter) {
  require_q(b);
  if (!(tol > 0.0)) throw ValidationError("tol must be positive");
  EigenReport own;
  if (!ground) {
    own = ground_state(b, std::min(tol, 1e-10), 0);
    ground = &own;
  }
  NehariReport rep;
  rep.lambda = lambda;
  rep.lambda1 = ground->lambda_est;
  if (!(lambda > ground->lambda_est))
    throw SolverError("Nehari manifold empty: lambda does not exceed the discrete first eigenvalue");

  Vector start = ground->eigenfunction.values.cwiseAbs();
  detail::add_relative_noise(start, 0.01, seed);
  if (!project(b, start, lambda)) start = ground->eigenfunction.values.cwiseAbs();

  auto noop = [](int, const Vector&) {};
  DescentResult res = nehari_descent(b, lambda, start, tol, max_iter, noop);
  SignProfile sign = sign_profile(res.u);
  if (sign == SignProfile::negative) res.u = -res.u;
  if (sign == SignProfile::sign_changing) {
    // |u| has no larger level than u; restart from it when that holds.
    auto absu = project(b, Vector(res.u.cwiseAbs()), lambda);
    if (absu && detail::lagrangian(b, *absu, lambda) <= detail::lagrangian(b, res.u, lambda)) {
      DescentResult again = nehari_descent(b, lambda, *absu, tol, max_iter, noop);
      again.iterations += res.iterations;
      again.trace.insert(again.trace.begin(), res.trace.begin(), res.trace.end());
      res = std::move(again);
      if (sign_profile(res.u) == SignProfile::negative) res.u = -res.u;
    }
  }

  const Vector& u = res.u;
  rep.m_lambda = detail::lagrangian(b, u, lambda);
  rep.nehari_residual = nehari_residual(b, u, lambda);
  rep.energy_identity_defect = identity_defect(b, u, lambda);
  rep.eigen_residual = residual(b, u, lambda);
  rep.sign = sign_profile(u);
  rep.positive = u.minCoeff() > -1e-8 * u.cwiseAbs().maxCoeff();
  rep.iterations = res.iterations;
  rep.converged = res.converged && rep.m_lambda > 0.0;
  rep.trace = std::move(res.trace);
  rep.minimizer = NodalFunction(b.mesh(), u);
  return rep;
}

RayCondition per_sign_ray_condition(const EnergyBundle& b, const Vector& v, double lambda) {
  RayCondition r;
  r.lhs = detail::I(b, v) + (b.has_q() ? b.params.mu * detail::B(b, v) : 0.0);
  r.rhs = lambda * detail::J(b, v);
  r.holds = r.lhs <= r.rhs;
  return r;
}

ProbeReport sign_changing_probe(const EnergyBundle& b, double lambda, std::uint64_t seed,
                                const EigenReport* ground, const Vector* start, int max_iter) {
  require_q(b);
  ProbeReport rep;
  rep.lambda = lambda;
  Vector w;
  if (start) {
    w = *start;
  } else {
    EigenReport own;
    if (!ground) {
      own = ground_state(b, 1e-10, 0);
      ground = &own;
    }
    const Mesh& mesh = *b.mesh();
    const Vector base = ground->eigenfunction.values.cwiseAbs();
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> frac(0.05, 0.2);
    std::uniform_int_distribution<int> side(0, 1);
    double width = frac(rng);
    const bool from_left = side(rng) == 0;
    const auto& iv = mesh.domain().intervals().front();
    // Shrink the flipped region until the ray meets the manifold.
    for (int attempt = 0; attempt < 40; ++attempt, width *= 0.7) {
      w = base;
      for (std::size_t i = 0; i < mesh.size(); ++i) {
        if (mesh.node_component()[i] != 0) continue;
        const double x = mesh.nodes()[i];
        const bool flip = from_left ? x < iv.lo + width * iv.length() : x > iv.hi - width * iv.length();
        if (flip) w[static_cast<Eigen::Index>(i)] = -w[static_cast<Eigen::Index>(i)];
      }
      if (sign_profile(w) == SignProfile::sign_changing && project(b, w, lambda)) break;
    }
  }
  rep.start_sign_changing = sign_profile(w) == SignProfile::sign_changing;
  rep.start_plus = per_sign_ray_condition(b, detail::positive_part(w), lambda);
  rep.start_minus = per_sign_ray_condition(b, detail::negative_part(w), lambda);
  if (!project(b, w, lambda)) {
    rep.final_sign = sign_profile(w);
    return rep;
  }

  auto watch = [&](int it, const Vector& u) {
    if (!rep.collapsed && sign_profile(u) != SignProfile::sign_changing) {
      rep.collapsed = true;
      rep.collapse_iteration = it;
    }
  };
  DescentResult res = nehari_descent(b, lambda, w, 1e-8, max_iter, watch);
  rep.final_sign = sign_profile(res.u);
  rep.final_plus = per_sign_ray_condition(b, detail::positive_part(res.u), lambda);
  rep.final_minus = per_sign_ray_condition(b, detail::negative_part(res.u), lambda);
  rep.final_energy = detail::lagrangian(b, res.u, lambda);
  rep.final_residual = residual(b, res.u, lambda);
  rep.converged = res.converged;
  rep.iterations = res.iterations;
  return rep;
}

}  // namespace fracpq
