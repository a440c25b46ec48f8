#include "fracpq/gagliardo.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "fracpq/errors.hpp"

namespace fracpq {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Second primitive of r -> r^e on r >= 0, i.e. G'' = r^e.
double second_primitive(double r, double e) {
  if (e == -2.0) return -std::log(r);
  if (e == -1.0) return r > 0.0 ? r * std::log(r) - r : 0.0;
  if (r == 0.0) return 0.0;
  return std::pow(r, e + 2.0) / ((e + 1.0) * (e + 2.0));
}

// Integral of |x - y|^e over [x0, x1] x [y0, y1]. Either y-bound may be
// infinite; the intervals may touch or coincide only when e > -1.
double cell_integral(double x0, double x1, double y0, double y1, double e) {
  auto G = [e](double r) { return second_primitive(std::abs(r), e); };
  double v = 0.0;
  if (std::isfinite(y1)) v += G(y1 - x0) - G(y1 - x1);
  if (std::isfinite(y0)) v += G(y0 - x1) - G(y0 - x0);
  return v;
}

// phi(d) = |d|^{a-2} d.
inline double odd_pow(double d, double a) {
  if (a == 2.0) return d;
  if (a == 3.0) return std::abs(d) * d;
  if (d == 0.0) return 0.0;
  return std::copysign(std::pow(std::abs(d), a - 1.0), d);
}

// |d|^{a-2} with the Hessian floor applied.
inline double curvature_pow(double d, double a, double floor) {
  if (a == 2.0) return 1.0;
  if (a == 3.0) return std::abs(d);
  const double ad = a < 2.0 ? std::max(std::abs(d), floor) : std::abs(d);
  if (ad == 0.0) return 0.0;
  return std::pow(ad, a - 2.0);
}

struct ExteriorPiece {
  double lo;
  double hi;
  double ghost_position;  // NaN for far pieces
};

// Splits R \ (union of node cells) into ghost cells adjacent to the grid and
// far pieces that sit at least h away from every node cell.
std::vector<ExteriorPiece> exterior_pieces(const Mesh& mesh) {
  const double h = mesh.h();
  const double nan = std::numeric_limits<double>::quiet_NaN();
  std::vector<ExteriorPiece> pieces;
  const std::size_t K = mesh.domain().component_count();
  std::vector<std::pair<double, double>> covered;
  for (std::size_t k = 0; k < K; ++k) {
    const auto [first, last] = mesh.component_range(k);
    covered.emplace_back(mesh.nodes()[first] - 0.5 * h, mesh.nodes()[last - 1] + 0.5 * h);
  }
  // Left unbounded tail.
  {
    const double g1 = covered.front().first;
    pieces.push_back({g1 - h, g1, g1 - 0.5 * h});
    pieces.push_back({-kInf, g1 - h, nan});
  }
  for (std::size_t k = 0; k + 1 < K; ++k) {
    const double g0 = covered[k].second;
    const double g1 = covered[k + 1].first;
    const double mid = 0.5 * (g0 + g1);
    const double left_hi = std::min(g0 + h, mid);
    const double right_lo = std::max(g1 - h, mid);
    pieces.push_back({g0, left_hi, g0 + 0.5 * h});
    pieces.push_back({right_lo, g1, g1 - 0.5 * h});
    if (g1 - g0 > 2.0 * h) pieces.push_back({g0 + h, g1 - h, nan});
  }
  {
    const double g0 = covered.back().second;
    pieces.push_back({g0, g0 + h, g0 + 0.5 * h});
    pieces.push_back({g0 + h, kInf, nan});
  }
  return pieces;
}

}  // namespace

double bbm_constant(int dimension, double exponent) {
  if (dimension != 1) throw ValidationError("unsupported dimension: only N = 1 is implemented");
  if (!(exponent > 1.0)) throw ValidationError("exponent must exceed 1");
  // S^0 = {-1, +1}: (1/alpha) * (|-1|^alpha + |1|^alpha) = 2 / alpha.
  return exponent / 2.0;
}

double normalizing_constant(double s, double exponent) {
  return (1.0 - s) * bbm_constant(1, exponent);
}

double exterior_kernel_integral(const Domain1D& domain, double x, double beta) {
  auto F = [beta](double d) { return std::pow(d, -beta) / beta; };
  const auto& iv = domain.intervals();
  double total = F(x - iv.front().lo) + F(iv.back().hi - x);
  for (std::size_t k = 0; k + 1 < iv.size(); ++k) {
    const double g0 = iv[k].hi;
    const double g1 = iv[k + 1].lo;
    if (g1 <= x)
      total += F(x - g1) - F(x - g0);
    else
      total += F(g0 - x) - F(g1 - x);
  }
  return total;
}

double kink_floor(const Vector& u) {
  const double scale = u.size() ? u.cwiseAbs().maxCoeff() : 0.0;
  return std::max(1e-8 * scale, std::numeric_limits<double>::min());
}

// ---------------------------------------------------------------------------

GagliardoOperator::GagliardoOperator(MeshPtr mesh, double s, double exponent, double constant,
                                     Matrix pair_weights, Vector tail_weights)
    : mesh_(std::move(mesh)), s_(s), exponent_(exponent), constant_(constant),
      pair_(std::move(pair_weights)), tail_(std::move(tail_weights)) {}

GagliardoOperator assemble(MeshPtr mesh, double s, double exponent) {
  if (!(s > 0.0 && s < 1.0)) throw ValidationError("fractional order s must lie in (0, 1)");
  if (!(exponent > 1.0)) throw ValidationError("exponent must exceed 1");
  const Mesh& m = *mesh;
  const auto n = static_cast<Eigen::Index>(m.size());
  const double h = m.h();
  const double beta = s * exponent;
  const double moment = exponent - 1.0 - beta;  // > -1 for every s < 1
  const double plain = -1.0 - beta;
  const auto& x = m.nodes();
  const auto& comp = m.node_component();

  // Weights exact for differences of a linear function:
  //   w_ij = int_{C_i x C_j} |x - y|^{alpha - 1 - s alpha} / |x_i - x_j|^alpha.
  auto moment_weight = [&](double xi, double lo, double hi, double d) {
    return cell_integral(xi - 0.5 * h, xi + 0.5 * h, lo, hi, moment) / std::pow(d, exponent);
  };

  Matrix w = Matrix::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double d = x[static_cast<std::size_t>(j)] - x[static_cast<std::size_t>(i)];
      double wij;
      if (d <= kNearBand * h * (1.0 + 1e-9)) {
        const double xj = x[static_cast<std::size_t>(j)];
        wij = moment_weight(x[static_cast<std::size_t>(i)], xj - 0.5 * h, xj + 0.5 * h, d);
      } else {
        wij = h * h * std::pow(d, plain);
      }
      w(i, j) = wij;
      w(j, i) = wij;
    }
  }

  // Same-cell interaction, spread over the two lattice neighbours of each node.
  const double self = 2.0 * second_primitive(h, moment) / std::pow(h, exponent);
  Vector t = Vector::Zero(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto ui = static_cast<std::size_t>(i);
    const bool left_real = i > 0 && comp[ui - 1] == comp[ui];
    const bool right_real = i + 1 < n && comp[ui + 1] == comp[ui];
    if (left_real) {
      w(i, i - 1) += 0.25 * self;
      w(i - 1, i) += 0.25 * self;
    } else {
      t[i] += 0.5 * self;
    }
    if (right_real) {
      w(i, i + 1) += 0.25 * self;
      w(i + 1, i) += 0.25 * self;
    } else {
      t[i] += 0.5 * self;
    }
  }

  // Exterior interactions appear twice in the R x R integral.
  const auto pieces = exterior_pieces(m);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double xi = x[static_cast<std::size_t>(i)];
    double acc = 0.0;
    for (const auto& pc : pieces) {
      if (pc.hi <= pc.lo) continue;
      if (std::isnan(pc.ghost_position)) {
        acc += cell_integral(xi - 0.5 * h, xi + 0.5 * h, pc.lo, pc.hi, plain);
        continue;
      }
      const double d = std::abs(pc.ghost_position - xi);
      if (d <= kNearBand * h * (1.0 + 1e-9))
        acc += moment_weight(xi, pc.lo, pc.hi, d);
      else
        acc += cell_integral(xi - 0.5 * h, xi + 0.5 * h, pc.lo, pc.hi, plain);
    }
    t[i] += 2.0 * acc;
  }

  return GagliardoOperator(std::move(mesh), s, exponent, normalizing_constant(s, exponent),
                           std::move(w), std::move(t));
}

double GagliardoOperator::value(const Vector& u) const {
  const auto n = u.size();
  const double a = exponent_;
  std::vector<double> rows(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    double r = tail_[i] * abs_pow(u[i], a);
    const double ui = u[i];
    for (Eigen::Index j = i + 1; j < n; ++j) r += 2.0 * pair_(j, i) * abs_pow(ui - u[j], a);
    rows[static_cast<std::size_t>(i)] = r;
  }
  return constant_ * pairwise_sum(rows);
}

Vector GagliardoOperator::gradient(const Vector& u) const {
  const auto n = u.size();
  const double a = exponent_;
  Vector g = Vector::Zero(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double ui = u[i];
    double gi = tail_[i] * a * odd_pow(ui, a);
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double f = 2.0 * pair_(j, i) * a * odd_pow(ui - u[j], a);
      gi += f;
      g[j] -= f;
    }
    g[i] += gi;
  }
  return constant_ * g;
}

Matrix GagliardoOperator::hessian(const Vector& u) const {
  const auto n = u.size();
  const double a = exponent_;
  const double c = constant_ * a * (a - 1.0);
  const double fl = kink_floor(u);
  Matrix H = Matrix::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    H(i, i) += c * tail_[i] * curvature_pow(u[i], a, fl);
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double hij = 2.0 * c * pair_(j, i) * curvature_pow(u[i] - u[j], a, fl);
      H(i, j) = -hij;
      H(j, i) = -hij;
      H(i, i) += hij;
      H(j, j) += hij;
    }
  }
  return H;
}

double GagliardoOperator::weak_action(const Vector& u, const Vector& v) const {
  const auto n = u.size();
  const double a = exponent_;
  std::vector<double> rows(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    double r = tail_[i] * odd_pow(u[i], a) * v[i];
    for (Eigen::Index j = i + 1; j < n; ++j)
      r += 2.0 * pair_(j, i) * odd_pow(u[i] - u[j], a) * (v[i] - v[j]);
    rows[static_cast<std::size_t>(i)] = r;
  }
  return constant_ * pairwise_sum(rows);
}

Matrix GagliardoOperator::quadratic_form() const {
  const auto n = pair_.rows();
  Matrix Q = -2.0 * pair_;
  for (Eigen::Index i = 0; i < n; ++i) Q(i, i) = 2.0 * pair_.row(i).sum() + tail_[i];
  return constant_ * Q;
}

// ---------------------------------------------------------------------------

LocalGradientOperator::LocalGradientOperator(MeshPtr mesh, double exponent)
    : mesh_(std::move(mesh)), exponent_(exponent) {
  if (!(exponent > 1.0)) throw ValidationError("exponent must exceed 1");
  scale_ = std::pow(mesh_->h(), 1.0 - exponent);
}

// Calls f(i, j, diff) for every edge; j < 0 marks an edge to a zero exterior node.
template <typename F>
void LocalGradientOperator::for_each_edge(const Vector& u, F&& f) const {
  const Mesh& m = *mesh_;
  for (std::size_t k = 0; k < m.domain().component_count(); ++k) {
    const auto [first, last] = m.component_range(k);
    const auto b = static_cast<Eigen::Index>(first);
    const auto e = static_cast<Eigen::Index>(last);
    f(b, Eigen::Index{-1}, u[b]);
    for (Eigen::Index i = b; i + 1 < e; ++i) f(i, i + 1, u[i] - u[i + 1]);
    f(e - 1, Eigen::Index{-1}, u[e - 1]);
  }
}

double LocalGradientOperator::value(const Vector& u) const {
  std::vector<double> terms;
  terms.reserve(static_cast<std::size_t>(u.size()) + 2 * mesh_->domain().component_count());
  for_each_edge(u, [&](Eigen::Index, Eigen::Index, double d) { terms.push_back(abs_pow(d, exponent_)); });
  return scale_ * pairwise_sum(terms);
}

Vector LocalGradientOperator::gradient(const Vector& u) const {
  Vector g = Vector::Zero(u.size());
  const double a = exponent_;
  for_each_edge(u, [&](Eigen::Index i, Eigen::Index j, double d) {
    const double f = a * odd_pow(d, a);
    g[i] += f;
    if (j >= 0) g[j] -= f;
  });
  return scale_ * g;
}

Matrix LocalGradientOperator::hessian(const Vector& u) const {
  const auto n = u.size();
  const double a = exponent_;
  const double fl = kink_floor(u);
  Matrix H = Matrix::Zero(n, n);
  for_each_edge(u, [&](Eigen::Index i, Eigen::Index j, double d) {
    const double c = scale_ * a * (a - 1.0) * curvature_pow(d, a, fl);
    H(i, i) += c;
    if (j >= 0) {
      H(j, j) += c;
      H(i, j) -= c;
      H(j, i) -= c;
    }
  });
  return H;
}

double LocalGradientOperator::weak_action(const Vector& u, const Vector& v) const {
  std::vector<double> terms;
  const double a = exponent_;
  for_each_edge(u, [&](Eigen::Index i, Eigen::Index j, double d) {
    terms.push_back(odd_pow(d, a) * (v[i] - (j >= 0 ? v[j] : 0.0)));
  });
  return scale_ * pairwise_sum(terms);
}

// ---------------------------------------------------------------------------

double seminorm_pow(const SeminormOperator& op, const NodalFunction& u) { return op.value(u.values); }

NodalFunction seminorm_gradient(const SeminormOperator& op, const NodalFunction& u) {
  return NodalFunction(u.mesh, op.gradient(u.values));
}

double weak_action(const SeminormOperator& op, const NodalFunction& u, const NodalFunction& v) {
  return op.weak_action(u.values, v.values);
}

}  // namespace fracpq
