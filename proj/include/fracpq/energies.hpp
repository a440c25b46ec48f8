#pragma once

#include <memory>
#include <optional>

#include "fracpq/gagliardo.hpp"
#include "fracpq/mesh.hpp"

namespace fracpq {

/// Scalars of (-Δ_p)^s u + μ(-Δ_q)^s u + |u|^{p-2}u + μ|u|^{q-2}u = λ V |u|^{p-2}u.
struct ProblemParams {
  double s = 0.5;
  double p = 2.0;
  double q = 1.5;
  double mu = 0.0;
  double lambda = 0.0;

  /// Throws ValidationError unless s in (0,1), 1 < q < p, mu >= 0.
  void validate() const;
  /// The compact-embedding bound p < N/s with N = 1. Recorded, never enforced.
  bool subcritical() const { return p * s < 1.0; }
};

/// Everything needed to evaluate the energies of one problem instance.
/// op_q is present iff mu > 0; at mu = 0 no q-term is ever evaluated.
struct EnergyBundle {
  std::shared_ptr<const SeminormOperator> op_p;
  std::shared_ptr<const SeminormOperator> op_q;
  ProblemParams params;
  Potential V;

  const MeshPtr& mesh() const { return op_p->mesh(); }
  double h() const { return mesh()->h(); }
  bool has_q() const { return static_cast<bool>(op_q); }
};

/// Assembles the fractional operators for params on mesh.
EnergyBundle make_bundle(const MeshPtr& mesh, const ProblemParams& params, const Potential& V);
/// Same problem with the first-difference (s = 1) energies in place of the Gagliardo ones.
EnergyBundle make_local_bundle(const MeshPtr& mesh, const ProblemParams& params, const Potential& V);
/// Copy of b with a different potential, reusing the assembled operators.
EnergyBundle with_potential(const EnergyBundle& b, const Potential& V);
/// Copy of b with a different mu; assembles op_q when it becomes necessary.
EnergyBundle with_mu(const EnergyBundle& b, double mu);

// Vector-level evaluations used by the solvers. Names follow the functionals:
//   I(u)  = [u]_p^p + ||u||_p^p
//   J(u)  = int V |u|^p
//   B(u)  = [u]_q^q + ||u||_q^q
//   pq(u) = I(u)/p + (mu/q) B(u)
//   L(u)  = pq(u) - (lambda/p) J(u)
namespace detail {
double I(const EnergyBundle& b, const Vector& u);
double J(const EnergyBundle& b, const Vector& u);
double B(const EnergyBundle& b, const Vector& u);
double pq(const EnergyBundle& b, const Vector& u);
double lagrangian(const EnergyBundle& b, const Vector& u, double lambda);

Vector grad_I(const EnergyBundle& b, const Vector& u);
Vector grad_J(const EnergyBundle& b, const Vector& u);
Vector grad_B(const EnergyBundle& b, const Vector& u);
Vector grad_pq(const EnergyBundle& b, const Vector& u);
Vector grad_lagrangian(const EnergyBundle& b, const Vector& u, double lambda);

Matrix hess_I(const EnergyBundle& b, const Vector& u);
Matrix hess_J(const EnergyBundle& b, const Vector& u);
Matrix hess_B(const EnergyBundle& b, const Vector& u);
Matrix hess_lagrangian(const EnergyBundle& b, const Vector& u, double lambda);

double eigen_residual(const EnergyBundle& b, const Vector& u, double lambda);
}  // namespace detail

double functional_I(const EnergyBundle& b, const NodalFunction& u);
double functional_J(const EnergyBundle& b, const NodalFunction& u);
/// I(u) / J(u); throws ValidationError("denominator constraint violated") when J(u) <= 0.
double rayleigh_quotient(const EnergyBundle& b, const NodalFunction& u);
double pq_energy(const EnergyBundle& b, const NodalFunction& u);
/// Free energy pq(u) - (lambda/p) J(u) with lambda taken from b.params.
double lagrangian_J_functional(const EnergyBundle& b, const NodalFunction& u);
/// ||grad L(u)|| / ||grad pq(u)|| for the given lambda. Zero iff (lambda, u)
/// is a discrete solution; scale invariant at mu = 0.
double eigen_residual(const EnergyBundle& b, const NodalFunction& u, double lambda);

}  // namespace fracpq
