#pragma once

#include "fracpq/mesh.hpp"

namespace fracpq {

/// K(N, alpha) with K^{-1} = (1/alpha) * integral over S^{N-1} of |w_1|^alpha.
/// Only N = 1 is supported, where S^0 = {-1, 1} and the constant is alpha / 2.
double bbm_constant(int dimension, double exponent);

/// K(1, s, alpha) = (1 - s) * bbm_constant(1, alpha).
double normalizing_constant(double s, double exponent);

/// Integral over R \ domain of |x - y|^{-(1 + beta)} dy for x inside the domain,
/// summed from the primitive d^{-beta} / beta over every gap and both unbounded tails.
double exterior_kernel_integral(const Domain1D& domain, double x, double beta);

/// Discrete alpha-homogeneous energy of pair-difference type,
///   E(u) = c * [ sum_{i != j} w_ij |u_i - u_j|^alpha + sum_i t_i |u_i|^alpha ],
/// shared by the fractional and the local (s = 1) discretizations.
class SeminormOperator {
 public:
  virtual ~SeminormOperator() = default;

  virtual double exponent() const = 0;
  virtual const MeshPtr& mesh() const = 0;

  /// [u]^alpha.
  virtual double value(const Vector& u) const = 0;
  /// Gradient of value().
  virtual Vector gradient(const Vector& u) const = 0;
  /// Hessian of value(). For alpha < 2 the difference floor `kink_floor`
  /// replaces vanishing differences so the matrix stays finite.
  virtual Matrix hessian(const Vector& u) const = 0;
  /// <A(u), v> = (1/alpha) <gradient(u), v>, evaluated in pairing form.
  virtual double weak_action(const Vector& u, const Vector& v) const = 0;
};

/// Dense discretization of K(1,s,alpha) * double integral over R x R of
/// |u(x) - u(y)|^alpha / |x - y|^{1 + s alpha} for zero-extended nodal u.
class GagliardoOperator final : public SeminormOperator {
 public:
  GagliardoOperator(MeshPtr mesh, double s, double exponent, double constant,
                    Matrix pair_weights, Vector tail_weights);

  double s() const { return s_; }
  double exponent() const override { return exponent_; }
  double constant() const { return constant_; }
  const Matrix& pair_weights() const { return pair_; }
  const Vector& tail_weights() const { return tail_; }
  const MeshPtr& mesh() const override { return mesh_; }

  double value(const Vector& u) const override;
  Vector gradient(const Vector& u) const override;
  Matrix hessian(const Vector& u) const override;
  double weak_action(const Vector& u, const Vector& v) const override;

  /// Quadratic-form matrix Q with value(u) = u^T Q u at alpha = 2.
  Matrix quadratic_form() const;

 private:
  MeshPtr mesh_;
  double s_;
  double exponent_;
  double constant_;
  Matrix pair_;
  Vector tail_;
};

/// Cell pairs whose lattice distance is at most this many steps are integrated
/// in closed form against linear differences; farther pairs use the midpoint rule.
inline constexpr int kNearBand = 16;

GagliardoOperator assemble(MeshPtr mesh, double s, double exponent);

/// First-difference energy h * sum |(u_{i+1} - u_i) / h|^alpha with zero
/// exterior neighbours at both ends of every component (the s = 1 problem).
class LocalGradientOperator final : public SeminormOperator {
 public:
  LocalGradientOperator(MeshPtr mesh, double exponent);

  double exponent() const override { return exponent_; }
  const MeshPtr& mesh() const override { return mesh_; }

  double value(const Vector& u) const override;
  Vector gradient(const Vector& u) const override;
  Matrix hessian(const Vector& u) const override;
  double weak_action(const Vector& u, const Vector& v) const override;

 private:
  template <typename F>
  void for_each_edge(const Vector& u, F&& f) const;

  MeshPtr mesh_;
  double exponent_;
  double scale_;
};

double seminorm_pow(const SeminormOperator& op, const NodalFunction& u);
NodalFunction seminorm_gradient(const SeminormOperator& op, const NodalFunction& u);
double weak_action(const SeminormOperator& op, const NodalFunction& u, const NodalFunction& v);

/// Smallest difference magnitude used in Hessians for exponents below 2.
double kink_floor(const Vector& u);

}  // namespace fracpq
