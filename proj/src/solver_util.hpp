#pragma once

#include <cstdint>
#include <optional>
#include <random>

#include <Eigen/Cholesky>
#include <Eigen/LU>

#include "fracpq/energies.hpp"
#include "fracpq/mesh.hpp"

namespace fracpq::detail {

/// Strictly positive bump: product of distances to the component endpoints.
inline Vector endpoint_bump(const Mesh& mesh) {
  Vector u(static_cast<Eigen::Index>(mesh.size()));
  for (std::size_t i = 0; i < mesh.size(); ++i) {
    const auto& iv = mesh.domain().intervals()[mesh.node_component()[i]];
    const double x = mesh.nodes()[i];
    u[static_cast<Eigen::Index>(i)] = (x - iv.lo) * (iv.hi - x) / (0.25 * iv.length() * iv.length());
  }
  return u;
}

/// Multiplies every entry by (1 + amplitude * xi), xi uniform on [-1, 1].
inline void add_relative_noise(Vector& u, double amplitude, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  for (Eigen::Index i = 0; i < u.size(); ++i) u[i] *= 1.0 + amplitude * dist(rng);
}

/// Rescales u to J(u) = 1. Requires J(u) > 0.
inline void normalize_J(const EnergyBundle& b, Vector& u) {
  u *= std::pow(J(b, u), -1.0 / b.params.p);
}

/// Solves P d = rhs for symmetric P, shifting the diagonal until Cholesky succeeds.
inline Vector spd_solve(Matrix P, const Vector& rhs) {
  const double scale = std::max(P.diagonal().cwiseAbs().maxCoeff(), 1e-300);
  double shift = 0.0;
  for (int attempt = 0; attempt < 12; ++attempt) {
    Eigen::LLT<Matrix> llt(P);
    if (llt.info() == Eigen::Success) {
      Vector d = llt.solve(rhs);
      if (d.allFinite()) return d;
    }
    const double next = shift == 0.0 ? 1e-12 * scale : shift * 10.0;
    P.diagonal().array() += next - shift;
    shift = next;
  }
  return Vector::Zero(rhs.size());
}

/// Solves [[H, c], [c^T, 0]] [d; tau] = [rhs; 0]; returns nullopt when singular.
inline std::optional<Vector> bordered_solve(const Matrix& H, const Vector& c, const Vector& rhs) {
  const auto n = H.rows();
  Matrix K(n + 1, n + 1);
  K.topLeftCorner(n, n) = H;
  K.topRightCorner(n, 1) = c;
  K.bottomLeftCorner(1, n) = c.transpose();
  K(n, n) = 0.0;
  Vector r(n + 1);
  r.head(n) = rhs;
  r[n] = 0.0;
  Eigen::PartialPivLU<Matrix> lu(K);
  Vector sol = lu.solve(r);
  if (!sol.allFinite()) return std::nullopt;
  if ((K * sol - r).norm() > 1e-6 * (r.norm() + 1e-300)) return std::nullopt;
  return Vector(sol.head(n));
}

inline Vector positive_part(const Vector& u) { return u.cwiseMax(0.0); }
inline Vector negative_part(const Vector& u) { return u.cwiseMin(0.0); }

}  // namespace fracpq::detail
