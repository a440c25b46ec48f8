#include "fracpq/energies.hpp"

#include <cmath>

#include "fracpq/errors.hpp"

namespace fracpq {

void ProblemParams::validate() const {
  if (!(s > 0.0 && s < 1.0)) throw ValidationError("s must lie in (0, 1)");
  if (!(q > 1.0)) throw ValidationError("q must exceed 1");
  if (!(q < p)) throw ValidationError("q must be strictly smaller than p (1 < q < p)");
  if (!(mu >= 0.0) || !std::isfinite(mu)) throw ValidationError("mu must be nonnegative");
  if (!std::isfinite(lambda)) throw ValidationError("lambda must be finite");
}

namespace {

void check_mesh(const MeshPtr& mesh, const Potential& V) {
  if (V.mesh().get() != mesh.get() &&
      static_cast<std::size_t>(V.values().size()) != mesh->size())
    throw ValidationError("potential is sampled on a different mesh");
}

}  // namespace

EnergyBundle make_bundle(const MeshPtr& mesh, const ProblemParams& params, const Potential& V) {
  params.validate();
  check_mesh(mesh, V);
  EnergyBundle b{std::make_shared<GagliardoOperator>(assemble(mesh, params.s, params.p)), nullptr,
                 params, V};
  if (params.mu > 0.0)
    b.op_q = std::make_shared<GagliardoOperator>(assemble(mesh, params.s, params.q));
  return b;
}

EnergyBundle make_local_bundle(const MeshPtr& mesh, const ProblemParams& params, const Potential& V) {
  params.validate();
  check_mesh(mesh, V);
  EnergyBundle b{std::make_shared<LocalGradientOperator>(mesh, params.p), nullptr, params, V};
  if (params.mu > 0.0) b.op_q = std::make_shared<LocalGradientOperator>(mesh, params.q);
  return b;
}

EnergyBundle with_potential(const EnergyBundle& b, const Potential& V) {
  check_mesh(b.mesh(), V);
  EnergyBundle c = b;
  c.V = V;
  return c;
}

EnergyBundle with_mu(const EnergyBundle& b, double mu) {
  EnergyBundle c = b;
  c.params.mu = mu;
  c.params.validate();
  if (mu == 0.0) {
    c.op_q.reset();
  } else if (!c.op_q) {
    if (dynamic_cast<const LocalGradientOperator*>(b.op_p.get()))
      c.op_q = std::make_shared<LocalGradientOperator>(b.mesh(), b.params.q);
    else
      c.op_q = std::make_shared<GagliardoOperator>(assemble(b.mesh(), b.params.s, b.params.q));
  }
  return c;
}

namespace detail {

namespace {

Vector power_gradient(const Vector& u, double h, double a, const Vector* weight) {
  Vector g(u.size());
  for (Eigen::Index i = 0; i < u.size(); ++i) {
    const double d = u[i];
    double v = d == 0.0 ? 0.0 : a * std::copysign(abs_pow(d, a - 1.0), d);
    if (weight) v *= (*weight)[i];
    g[i] = h * v;
  }
  return g;
}

Matrix power_hessian(const Vector& u, double h, double a, const Vector* weight) {
  const double fl = kink_floor(u);
  Vector d(u.size());
  for (Eigen::Index i = 0; i < u.size(); ++i) {
    const double au = a < 2.0 ? std::max(std::abs(u[i]), fl) : std::abs(u[i]);
    double v = a * (a - 1.0) * (a == 2.0 ? 1.0 : abs_pow(au, a - 2.0));
    if (weight) v *= (*weight)[i];
    d[i] = h * v;
  }
  return d.asDiagonal();
}

}  // namespace

double I(const EnergyBundle& b, const Vector& u) {
  return b.op_p->value(u) + lp_norm_p(u, b.h(), b.params.p);
}

double J(const EnergyBundle& b, const Vector& u) {
  return weighted_lp_norm_p(u, b.V.values(), b.h(), b.params.p);
}

double B(const EnergyBundle& b, const Vector& u) {
  if (!b.op_q) throw ValidationError("q-energy requested for a bundle without the q operator");
  return b.op_q->value(u) + lp_norm_p(u, b.h(), b.params.q);
}

double pq(const EnergyBundle& b, const Vector& u) {
  const double e = I(b, u) / b.params.p;
  if (!b.has_q()) return e;
  return e + b.params.mu / b.params.q * B(b, u);
}

double lagrangian(const EnergyBundle& b, const Vector& u, double lambda) {
  return pq(b, u) - lambda / b.params.p * J(b, u);
}

Vector grad_I(const EnergyBundle& b, const Vector& u) {
  return b.op_p->gradient(u) + power_gradient(u, b.h(), b.params.p, nullptr);
}

Vector grad_J(const EnergyBundle& b, const Vector& u) {
  return power_gradient(u, b.h(), b.params.p, &b.V.values());
}

Vector grad_B(const EnergyBundle& b, const Vector& u) {
  if (!b.op_q) throw ValidationError("q-energy requested for a bundle without the q operator");
  return b.op_q->gradient(u) + power_gradient(u, b.h(), b.params.q, nullptr);
}

Vector grad_pq(const EnergyBundle& b, const Vector& u) {
  Vector g = grad_I(b, u) / b.params.p;
  if (b.has_q()) g += b.params.mu / b.params.q * grad_B(b, u);
  return g;
}

Vector grad_lagrangian(const EnergyBundle& b, const Vector& u, double lambda) {
  return grad_pq(b, u) - lambda / b.params.p * grad_J(b, u);
}

Matrix hess_I(const EnergyBundle& b, const Vector& u) {
  Matrix H = b.op_p->hessian(u);
  H += power_hessian(u, b.h(), b.params.p, nullptr);
  return H;
}

Matrix hess_J(const EnergyBundle& b, const Vector& u) {
  return power_hessian(u, b.h(), b.params.p, &b.V.values());
}

Matrix hess_B(const EnergyBundle& b, const Vector& u) {
  Matrix H = b.op_q->hessian(u);
  H += power_hessian(u, b.h(), b.params.q, nullptr);
  return H;
}

Matrix hess_lagrangian(const EnergyBundle& b, const Vector& u, double lambda) {
  const double p = b.params.p;
  Matrix H = hess_I(b, u) / p;
  H -= lambda / p * hess_J(b, u);
  if (b.has_q()) H += b.params.mu / b.params.q * hess_B(b, u);
  return H;
}

double eigen_residual(const EnergyBundle& b, const Vector& u, double lambda) {
  if (u.size() == 0 || u.cwiseAbs().maxCoeff() == 0.0)
    throw ValidationError("eigen residual is undefined at u = 0");
  const Vector scale = grad_pq(b, u);
  const Vector r = scale - lambda / b.params.p * grad_J(b, u);
  return r.norm() / scale.norm();
}

}  // namespace detail

double functional_I(const EnergyBundle& b, const NodalFunction& u) { return detail::I(b, u.values); }

double functional_J(const EnergyBundle& b, const NodalFunction& u) { return detail::J(b, u.values); }

double rayleigh_quotient(const EnergyBundle& b, const NodalFunction& u) {
  const double den = detail::J(b, u.values);
  if (!(den > 0.0)) throw ValidationError("denominator constraint violated: int V|u|^p <= 0");
  return detail::I(b, u.values) / den;
}

double pq_energy(const EnergyBundle& b, const NodalFunction& u) { return detail::pq(b, u.values); }

double lagrangian_J_functional(const EnergyBundle& b, const NodalFunction& u) {
  return detail::lagrangian(b, u.values, b.params.lambda);
}

double eigen_residual(const EnergyBundle& b, const NodalFunction& u, double lambda) {
  return detail::eigen_residual(b, u.values, lambda);
}

}  // namespace fracpq
