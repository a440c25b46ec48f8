#include "fracpq/eigsolve.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include <Eigen/Eigenvalues>

#include "fracpq/errors.hpp"
#include "solver_util.hpp"

namespace fracpq {

using detail::grad_I;
using detail::grad_J;
using detail::hess_I;
using detail::hess_J;

namespace {

// Residual below which the Newton direction is tried before the preconditioned one.
constexpr double kNewtonSwitch = 1e-1;
constexpr double kArmijo = 1e-4;
// Rounding slack, in units of |R| * epsilon, tolerated on Newton steps that
// still reduce the residual once the quotient has converged to machine precision.
constexpr double kRoundingSlack = 16.0;

std::vector<double> component_mins(const Mesh& mesh, const Vector& u) {
  std::vector<double> mins;
  for (std::size_t k = 0; k < mesh.domain().component_count(); ++k) {
    const auto [first, last] = mesh.component_range(k);
    double m = std::numeric_limits<double>::infinity();
    for (std::size_t i = first; i < last; ++i) m = std::min(m, std::abs(u[static_cast<Eigen::Index>(i)]));
    mins.push_back(m);
  }
  return mins;
}

void orient_by_mass(Vector& u) {
  if (u.sum() < 0.0) u = -u;
}

void orient_by_peak(Vector& u) {
  Eigen::Index k;
  u.cwiseAbs().maxCoeff(&k);
  if (u[k] < 0.0) u = -u;
}

struct QuotientState {
  Vector u;
  double R;
};

// Projected descent on {J = 1} for R(u) = I(u) / J(u). Directions: Newton on the
// tangent space once the residual is small, otherwise the gradient preconditioned
// by the Hessian of I. Armijo backtracking keeps the quotient nonincreasing.
EigenReport minimize_quotient(const EnergyBundle& b, Vector u, double tol, int max_iter) {
  detail::normalize_J(b, u);
  double R = detail::I(b, u);
  EigenReport rep;
  bool converged = false;
  int it = 0;
  for (;; ++it) {
    const Vector gI = grad_I(b, u);
    const Vector gJ = grad_J(b, u);
    const Vector g = gI - R * gJ;
    const double res = g.norm() / gI.norm();
    rep.trace.push_back({it, R, res});
    if (res <= tol) {
      converged = true;
      break;
    }
    if (it >= max_iter) break;

    auto try_direction = [&](const Vector& d, bool newton) -> bool {
      const double slope = g.dot(d);
      if (!(slope < 0.0)) return false;
      double t = 1.0;
      for (int k = 0; k < 60; ++k, t *= 0.5) {
        Vector v = u + t * d;
        const double Jv = detail::J(b, v);
        if (!(Jv > 0.0)) continue;
        v *= std::pow(Jv, -1.0 / b.params.p);
        const double Rv = detail::I(b, v);
        bool accept = Rv <= R + kArmijo * t * slope;
        if (!accept && newton && Rv <= R + kRoundingSlack * std::abs(R) * 1e-16) {
          const double res_v = (grad_I(b, v) - Rv * grad_J(b, v)).norm() / grad_I(b, v).norm();
          accept = res_v < 0.5 * res;
        }
        if (accept) {
          u = std::move(v);
          R = Rv;
          return true;
        }
      }
      return false;
    };

    bool moved = false;
    if (res < kNewtonSwitch) {
      const Matrix H = hess_I(b, u) - R * hess_J(b, u);
      if (auto d = detail::bordered_solve(H, gJ, -g)) moved = try_direction(*d, true);
    }
    if (!moved) moved = try_direction(-detail::spd_solve(hess_I(b, u), g), false);
    if (!moved) moved = try_direction(-g, false);
    if (!moved) break;
  }

  orient_by_mass(u);
  rep.iterations = it;
  rep.converged = converged;
  rep.lambda_est = R;
  for (const auto& row : rep.trace) rep.lambda_est = std::min(rep.lambda_est, row.quotient);
  rep.residual = detail::eigen_residual(b, u, rep.lambda_est);
  rep.sign = sign_profile(u);
  rep.component_mins = component_mins(*b.mesh(), u);
  rep.eigenfunction = NodalFunction(b.mesh(), std::move(u));
  return rep;
}

// Newton on grad I(u) - lambda grad J(u) = 0, J(u) = 1, with residual damping.
// Converges to the eigenpair nearest the start, saddle points included.
void refine_eigenpair(const EnergyBundle& b, Vector& u, double tol, int max_iter,
                      EigenReport& rep, int it0) {
  detail::normalize_J(b, u);
  double lambda = detail::I(b, u);
  double res = detail::eigen_residual(b, u, lambda);
  int it = it0;
  for (; it < it0 + max_iter; ++it) {
    rep.trace.push_back({it, lambda, res});
    if (res <= tol) {
      rep.converged = true;
      break;
    }
    const Vector gJ = grad_J(b, u);
    const Vector F = grad_I(b, u) - lambda * gJ;
    const Matrix H = hess_I(b, u) - lambda * hess_J(b, u);
    auto d = detail::bordered_solve(H, gJ, -F);
    if (!d) break;
    bool moved = false;
    double t = 1.0;
    for (int k = 0; k < 12 && !moved; ++k, t *= 0.5) {
      Vector v = u + t * (*d);
      const double Jv = detail::J(b, v);
      if (!(Jv > 0.0)) continue;
      v *= std::pow(Jv, -1.0 / b.params.p);
      const double lv = detail::I(b, v);
      const double rv = detail::eigen_residual(b, v, lv);
      if (rv < res) {
        u = std::move(v);
        lambda = lv;
        res = rv;
        moved = true;
      }
    }
    if (!moved) break;
  }
  rep.iterations = it;
  rep.lambda_est = lambda;
  rep.residual = res;
}

Vector initial_guess(const EnergyBundle& b, std::uint64_t seed) {
  const Mesh& mesh = *b.mesh();
  Vector u = detail::endpoint_bump(mesh);
  detail::add_relative_noise(u, 0.01, seed);
  if (detail::J(b, u) > 0.0) return u;
  // Restrict the bump to the positivity set of V.
  for (Eigen::Index i = 0; i < u.size(); ++i)
    if (b.V.values()[i] <= 0.0) u[i] = 0.0;
  if (u.cwiseAbs().maxCoeff() > 0.0 && detail::J(b, u) > 0.0) return u;
  throw SolverError("positivity set unresolved by mesh: no start with int V|u|^p > 0");
}

double path_value(const EnergyBundle& b, const Vector& up, const Vector& um, double Jp,
                  double Jm, double theta) {
  const double c1 = std::cos(theta);
  const double c2 = std::sin(theta);
  const double p = b.params.p;
  const double den = abs_pow(c1, p) * Jp + abs_pow(c2, p) * Jm;
  const Vector w = c1 * up + c2 * um;
  return detail::I(b, w) / den;
}

struct PathMax {
  double value;
  double theta;
};

PathMax maximize_path(const EnergyBundle& b, const Vector& u, int points) {
  const Vector up = detail::positive_part(u);
  const Vector um = detail::negative_part(u);
  const double Jp = detail::J(b, up);
  const double Jm = detail::J(b, um);
  const int half = points / 2;
  const double step = 2.0 * std::numbers::pi / points;
  // f(theta + pi) = -f(theta) and I is even, so half the circle suffices; the
  // first maximizing index wins ties.
  int best = 0;
  double best_v = -std::numeric_limits<double>::infinity();
  for (int k = 0; k < half; ++k) {
    const double v = path_value(b, up, um, Jp, Jm, k * step);
    if (v > best_v) {
      best_v = v;
      best = k;
    }
  }
  // Golden-section refinement on the bracketing cell.
  const double invphi = (std::sqrt(5.0) - 1.0) / 2.0;
  double lo = (best - 1) * step;
  double hi = (best + 1) * step;
  double c = hi - invphi * (hi - lo);
  double d = lo + invphi * (hi - lo);
  double fc = path_value(b, up, um, Jp, Jm, c);
  double fd = path_value(b, up, um, Jp, Jm, d);
  for (int k = 0; k < 40; ++k) {
    if (fc > fd) {
      hi = d;
      d = c;
      fd = fc;
      c = hi - invphi * (hi - lo);
      fc = path_value(b, up, um, Jp, Jm, c);
    } else {
      lo = c;
      c = d;
      fc = fd;
      d = lo + invphi * (hi - lo);
      fd = path_value(b, up, um, Jp, Jm, d);
    }
  }
  const double tm = 0.5 * (lo + hi);
  const double vm = path_value(b, up, um, Jp, Jm, tm);
  if (vm > best_v) return {vm, tm};
  return {best_v, best * step};
}

}  // namespace

std::string to_string(SignProfile s) {
  switch (s) {
    case SignProfile::positive: return "positive";
    case SignProfile::negative: return "negative";
    case SignProfile::sign_changing: return "sign_changing";
  }
  return "unknown";
}

SignProfile sign_profile(const Vector& u, double rel) {
  const double thr = rel * u.cwiseAbs().maxCoeff();
  const bool has_pos = u.maxCoeff() > thr;
  const bool has_neg = u.minCoeff() < -thr;
  if (has_pos && has_neg) return SignProfile::sign_changing;
  return has_neg ? SignProfile::negative : SignProfile::positive;
}

double lp_distance(const Vector& u, const Vector& v, double h, double p) {
  return std::pow(lp_norm_p(Vector(u - v), h, p), 1.0 / p);
}

EigenReport lambda1(const EnergyBundle& b, double tol, int max_iter, std::uint64_t seed) {
  if (!(tol > 0.0)) throw ValidationError("tol must be positive");
  if (b.has_q()) throw ValidationError("lambda1 expects a bundle with mu = 0");
  return minimize_quotient(b, initial_guess(b, seed), tol, max_iter);
}

EigenReport local_reference_lambda1(const MeshPtr& mesh, double p, const Potential& V, double tol,
                                    int max_iter, std::uint64_t seed) {
  ProblemParams params;
  params.s = 0.5;  // unused by the local energy
  params.p = p;
  params.q = 0.5 * (1.0 + p);
  const EnergyBundle b = make_local_bundle(mesh, params, V);
  return minimize_quotient(b, initial_guess(b, seed), tol, max_iter);
}

std::vector<OracleMode> linear_oracle(const GagliardoOperator& op2, const Potential& V) {
  if (op2.exponent() != 2.0) throw ValidationError("linear oracle needs the alpha = 2 operator");
  const MeshPtr& mesh = op2.mesh();
  const auto n = static_cast<Eigen::Index>(mesh->size());
  if (n < 3) throw ValidationError("linear oracle needs at least 3 nodes");
  const double h = mesh->h();
  Matrix A = op2.quadratic_form();
  A.diagonal().array() += h;
  const Eigen::LLT<Matrix> llt(A);
  if (llt.info() != Eigen::Success) throw SolverError("stiffness plus mass is not positive definite");
  const auto L = llt.matrixL();
  // C = L^{-1} M_V L^{-T}, eigenvalues nu = 1 / lambda.
  Matrix MV = (h * V.values()).asDiagonal();
  Matrix Z = L.solve(MV);
  Matrix C = L.solve(Matrix(Z.transpose()));
  C = 0.5 * (C + C.transpose()).eval();
  Eigen::SelfAdjointEigenSolver<Matrix> es(C);
  if (es.info() != Eigen::Success) throw SolverError("dense eigensolver failed");
  const Vector& nu = es.eigenvalues();
  const double cut = 1e-13 * nu.cwiseAbs().maxCoeff();
  std::vector<OracleMode> modes;
  for (Eigen::Index k = n - 1; k >= 0; --k) {
    if (!(nu[k] > cut)) break;
    Vector u = llt.matrixU().solve(Vector(es.eigenvectors().col(k)));
    const double Ju = weighted_lp_norm_p(u, V.values(), h, 2.0);
    u /= std::sqrt(Ju);
    orient_by_peak(u);
    modes.push_back({1.0 / nu[k], NodalFunction(mesh, std::move(u))});
  }
  return modes;
}

std::vector<OracleMode> linear_oracle(const MeshPtr& mesh, double s, const Potential& V) {
  return linear_oracle(assemble(mesh, s, 2.0), V);
}

PathProfile odd_path_profile(const EnergyBundle& b, const Vector& u, int points) {
  const Vector up = detail::positive_part(u);
  const Vector um = detail::negative_part(u);
  const double Jp = detail::J(b, up);
  const double Jm = detail::J(b, um);
  PathProfile prof;
  prof.max_value = -std::numeric_limits<double>::infinity();
  prof.argmax_theta = 0.0;
  for (int k = 0; k < points; ++k) {
    const double th = 2.0 * std::numbers::pi * k / points;
    const double v = path_value(b, up, um, Jp, Jm, th);
    prof.theta.push_back(th);
    prof.value.push_back(v);
    if (v > prof.max_value) {
      prof.max_value = v;
      prof.argmax_theta = th;
    }
  }
  return prof;
}

EigenReport lambda2_minimax(const EnergyBundle& b, double tol, std::uint64_t seed, int max_iter) {
  if (b.has_q()) throw ValidationError("lambda2_minimax expects a bundle with mu = 0");
  const auto* frac = dynamic_cast<const GagliardoOperator*>(b.op_p.get());
  if (!frac) throw ValidationError("lambda2_minimax needs the fractional operator");
  constexpr int kAngles = 128;
  constexpr int kMinimaxSteps = 20;

  // Start from the second mode of the linear pencil with the same s and V.
  const auto modes = b.params.p == 2.0 ? linear_oracle(*frac, b.V) : linear_oracle(b.mesh(), frac->s(), b.V);
  if (modes.size() < 2) throw SolverError("no sign-changing candidate found: pencil has one mode");
  Vector u = modes[1].u.values;
  detail::add_relative_noise(u, 0.01, seed);
  detail::normalize_J(b, u);

  EigenReport rep;
  auto admissible = [&](const Vector& v) {
    return sign_profile(v) == SignProfile::sign_changing &&
           detail::J(b, detail::positive_part(v)) > 0.0 && detail::J(b, detail::negative_part(v)) > 0.0;
  };
  if (!admissible(u)) throw SolverError("no sign-changing candidate found");

  // Outer descent on u -> max_theta I(f_u(theta)) along the supergradient.
  PathMax pm = maximize_path(b, u, kAngles);
  int it = 0;
  for (; it < kMinimaxSteps; ++it) {
    rep.trace.push_back({it, pm.value, std::numeric_limits<double>::quiet_NaN()});
    const double c1 = std::cos(pm.theta);
    const double c2 = std::sin(pm.theta);
    const Vector w = c1 * detail::positive_part(u) + c2 * detail::negative_part(u);
    const double Jw = detail::J(b, w);
    const double Rw = detail::I(b, w) / Jw;
    const Vector gw = (grad_I(b, w) - Rw * grad_J(b, w)) / Jw;
    Vector G(u.size());
    for (Eigen::Index i = 0; i < u.size(); ++i)
      G[i] = u[i] > 0.0 ? c1 * gw[i] : (u[i] < 0.0 ? c2 * gw[i] : 0.0);
    const Vector d = -detail::spd_solve(hess_I(b, u), G);
    bool moved = false;
    double t = 1.0;
    for (int k = 0; k < 20 && !moved; ++k, t *= 0.5) {
      Vector v = u + t * d;
      if (!admissible(v)) continue;
      detail::normalize_J(b, v);
      const PathMax pv = maximize_path(b, v, kAngles);
      if (pv.value < pm.value) {
        const double rel = (pm.value - pv.value) / pm.value;
        u = std::move(v);
        pm = pv;
        moved = rel > 1e-10;
        if (!moved) t = 0.0;
        break;
      }
    }
    if (!moved) break;
  }

  refine_eigenpair(b, u, tol, max_iter, rep, it + 1);
  rep.sign = sign_profile(u);
  if (rep.sign != SignProfile::sign_changing)
    throw SolverError("no sign-changing candidate found: refinement collapsed to constant sign");
  orient_by_peak(u);
  rep.path_max = maximize_path(b, u, kAngles).value;
  rep.component_mins = component_mins(*b.mesh(), u);
  rep.eigenfunction = NodalFunction(b.mesh(), std::move(u));
  return rep;
}

GroundStateReport check_ground_state_properties(const EigenReport& rep, const EnergyBundle& b,
                                                int seeds, double tol, double profile_tol) {
  GroundStateReport g;
  const Mesh& mesh = *b.mesh();
  const double h = mesh.h();
  const double p = b.params.p;
  Vector u = rep.eigenfunction.values;
  orient_by_mass(u);

  g.constant_sign = sign_profile(u, 0.0) != SignProfile::sign_changing;
  g.component_mins = component_mins(mesh, u);
  g.positive_on_every_component = u.minCoeff() > 0.0;

  g.seeds_checked = seeds;
  for (int k = 1; k <= seeds; ++k) {
    const EigenReport other = lambda1(b, tol, 1000, static_cast<std::uint64_t>(1000 + k));
    const Vector& v = other.eigenfunction.values;
    const double dist = std::min(lp_distance(u, v, h, p), lp_distance(u, Vector(-v), h, p));
    g.simplicity_distance = std::max(g.simplicity_distance, dist);
  }
  g.simple = g.simplicity_distance <= profile_tol;

  const auto mirror = mesh.mirror_map();
  g.symmetry_applicable = mesh.domain().is_symmetric() && b.V.is_even() &&
                          std::none_of(mirror.begin(), mirror.end(),
                                       [](std::size_t j) { return j == Mesh::npos; });
  if (g.symmetry_applicable) {
    Vector r(u.size());
    for (Eigen::Index i = 0; i < u.size(); ++i) r[i] = u[static_cast<Eigen::Index>(mirror[static_cast<std::size_t>(i)])];
    g.symmetry_defect = lp_distance(u, r, h, p);
  }
  g.monotonicity_applicable = g.symmetry_applicable && mesh.domain().component_count() == 1;
  if (g.monotonicity_applicable) {
    const auto n = u.size();
    const double slack = 1e-10 * u.cwiseAbs().maxCoeff();
    g.radially_monotone = true;
    for (Eigen::Index i = n / 2; i + 1 < n; ++i)
      if (std::abs(u[i + 1]) > std::abs(u[i]) + slack) g.radially_monotone = false;
    for (Eigen::Index i = (n - 1) / 2; i > 0; --i)
      if (std::abs(u[i - 1]) > std::abs(u[i]) + slack) g.radially_monotone = false;
  }
  return g;
}

std::vector<IsolationRow> isolation_probe(const EnergyBundle& b, double lambda1_value,
                                          double lambda2_value, int grid_points, int starts,
                                          double tol, std::uint64_t seed) {
  std::vector<IsolationRow> rows;
  const double delta = 0.05 * (lambda2_value - lambda1_value);
  const double lo = lambda1_value + delta;
  const double hi = lambda2_value - delta;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (int k = 0; k < grid_points; ++k) {
    const double lam = grid_points == 1 ? 0.5 * (lo + hi) : lo + (hi - lo) * k / (grid_points - 1);
    IsolationRow row{lam, std::numeric_limits<double>::infinity(), 0};
    for (int st = 0; st < starts; ++st) {
      Vector u = detail::endpoint_bump(*b.mesh());
      for (Eigen::Index i = 0; i < u.size(); ++i) u[i] *= normal(rng);
      if (!(detail::J(b, u) > 0.0)) u = u.cwiseAbs();
      detail::normalize_J(b, u);
      double best = detail::eigen_residual(b, u, lam);
      for (int it = 0; it < 30; ++it) {
        const Vector gJ = grad_J(b, u);
        const Vector F = grad_I(b, u) - lam * gJ;
        const Matrix H = hess_I(b, u) - lam * hess_J(b, u);
        auto d = detail::bordered_solve(H, gJ, -F);
        if (!d) break;
        Vector v = u + *d;
        if (!(detail::J(b, v) > 0.0)) break;
        detail::normalize_J(b, v);
        u = std::move(v);
        best = std::min(best, detail::eigen_residual(b, u, lam));
      }
      row.min_residual = std::min(row.min_residual, best);
      if (best <= tol) ++row.converged_starts;
    }
    rows.push_back(row);
  }
  return rows;
}

}  // namespace fracpq
