#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <vector>

#include "fracpq/eigsolve.hpp"
#include "fracpq/energies.hpp"

namespace fracpq {

/// Data of the fibering map xi(t) = <L'(t w), t w> = t^q B - t^p A along the ray t w.
struct FiberingData {
  double A;  ///< lambda J(w) - [w]_p^p - ||w||_p^p
  double B;  ///< mu ([w]_q^q + ||w||_q^q)
  std::optional<double> t0;  ///< (B / A)^{1/(p-q)}, present iff A > 0

  double xi(double t, double p, double q) const { return std::pow(t, q) * B - std::pow(t, p) * A; }
};

FiberingData fibering(const EnergyBundle& b, const NodalFunction& w, double lambda);
FiberingData fibering(const EnergyBundle& b, const Vector& w, double lambda);

struct CertificateReport {
  double lambda = 0.0;
  int trials = 0;     ///< admissible draws (J(w) > 0) that were checked
  int passes = 0;
  int failures = 0;
  int rejected = 0;   ///< draws discarded because J(w) <= 0
  double max_ratio = 0.0;  ///< max over trials of lambda J(w) / I(w); <= 1 on a full pass
  bool pass = false;
};

/// Checks lambda J(w) - I(w) <= 0 on random w with J(w) > 0, i.e. that no ray
/// meets the Nehari manifold. When `seed_function` is given it is the first
/// trial and small perturbations of it are mixed into the draws.
CertificateReport nonexistence_certificate(const EnergyBundle& b, double lambda, int trials,
                                           std::uint64_t seed,
                                           const NodalFunction* seed_function = nullptr);

struct NehariReport {
  double lambda = 0.0;
  double lambda1 = 0.0;  ///< discrete first eigenvalue of the mu = 0 problem on the same mesh
  double m_lambda = 0.0;
  NodalFunction minimizer;
  double nehari_residual = 0.0;          ///< |<L'(u), u>| / <pq'(u), u>
  double energy_identity_defect = 0.0;   ///< |L(u) - mu (1/q - 1/p) B(u)| / max(1, L(u))
  double eigen_residual = 0.0;
  SignProfile sign = SignProfile::positive;
  bool positive = false;  ///< min u > -1e-8 max|u| after sign normalization
  int iterations = 0;
  bool converged = false;
  std::vector<TraceRow> trace;  ///< (iteration, L(u), eigen residual)
};

/// Minimizes the free energy over the Nehari manifold for lambda > lambda_1.
/// `ground` may supply the mu = 0 ground state of the same mesh to skip recomputing it.
/// Throws SolverError when lambda <= lambda_1 (every ray misses the manifold).
NehariReport solve_m_lambda(const EnergyBundle& b, double lambda, double tol, std::uint64_t seed,
                            const EigenReport* ground = nullptr, int max_iter = 500);

/// Ray condition for one sign part v: I(v) + mu B(v) <= lambda J(v).
struct RayCondition {
  double lhs;
  double rhs;
  bool holds;
};
RayCondition per_sign_ray_condition(const EnergyBundle& b, const Vector& v, double lambda);

struct ProbeReport {
  double lambda = 0.0;
  bool start_sign_changing = false;
  RayCondition start_plus{}, start_minus{};
  bool collapsed = false;        ///< an iterate reached constant sign
  int collapse_iteration = -1;
  SignProfile final_sign = SignProfile::sign_changing;
  RayCondition final_plus{}, final_minus{};
  double final_energy = 0.0;
  double final_residual = 0.0;
  bool converged = false;
  int iterations = 0;
};

/// Runs the Nehari descent from a sign-changing start and records whether the
/// iterates collapse to constant sign. Without an explicit start, the ground
/// state is flipped on a seeded region near one component end.
ProbeReport sign_changing_probe(const EnergyBundle& b, double lambda, std::uint64_t seed,
                                const EigenReport* ground = nullptr,
                                const Vector* start = nullptr, int max_iter = 400);

}  // namespace fracpq
