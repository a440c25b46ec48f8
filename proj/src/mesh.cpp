#include "fracpq/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "fracpq/errors.hpp"

namespace fracpq {

Domain1D::Domain1D(std::vector<Interval> intervals) : intervals_(std::move(intervals)) {
  if (intervals_.empty()) throw ValidationError("domain has no intervals");
  for (std::size_t k = 0; k < intervals_.size(); ++k) {
    const auto& iv = intervals_[k];
    if (!std::isfinite(iv.lo) || !std::isfinite(iv.hi) || !(iv.hi > iv.lo)) {
      std::ostringstream os;
      os << "interval " << k << " has non-positive length";
      throw ValidationError(os.str());
    }
    if (k > 0 && !(intervals_[k - 1].hi < iv.lo)) {
      std::ostringstream os;
      os << "intervals " << k - 1 << " and " << k << " are not disjoint and sorted";
      throw ValidationError(os.str());
    }
  }
}

bool Domain1D::is_symmetric(double tol) const {
  const std::size_t m = intervals_.size();
  for (std::size_t k = 0; k < m; ++k) {
    const auto& a = intervals_[k];
    const auto& b = intervals_[m - 1 - k];
    if (std::abs(a.lo + b.hi) > tol || std::abs(a.hi + b.lo) > tol) return false;
  }
  return true;
}

Mesh::Mesh(Domain1D domain, double h, std::vector<double> nodes,
           std::vector<std::size_t> node_component)
    : domain_(std::move(domain)), h_(h), nodes_(std::move(nodes)),
      component_(std::move(node_component)) {
  ranges_.assign(domain_.component_count(), {0, 0});
  std::size_t i = 0;
  for (std::size_t k = 0; k < domain_.component_count(); ++k) {
    ranges_[k].first = i;
    while (i < component_.size() && component_[i] == k) ++i;
    ranges_[k].second = i;
  }
}

std::pair<std::size_t, std::size_t> Mesh::component_range(std::size_t k) const {
  return ranges_.at(k);
}

std::vector<std::size_t> Mesh::mirror_map(double tol) const {
  const std::size_t n = nodes_.size();
  std::vector<std::size_t> map(n, npos);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t j = n - 1 - i;
    if (std::abs(nodes_[i] + nodes_[j]) <= tol) map[i] = j;
  }
  return map;
}

MeshPtr build_mesh(const Domain1D& domain, int n_per_unit) {
  if (n_per_unit < 1) throw ValidationError("n_per_unit must be positive");
  const double h = 1.0 / n_per_unit;
  std::vector<double> nodes;
  std::vector<std::size_t> comp;
  for (std::size_t k = 0; k < domain.component_count(); ++k) {
    const auto& iv = domain.intervals()[k];
    if (iv.length() < 2.0 * h * (1.0 - 1e-12)) {
      std::ostringstream os;
      os << "interval unresolvable at this resolution: (" << iv.lo << ", " << iv.hi
         << ") is shorter than 2h = " << 2.0 * h;
      throw ValidationError(os.str());
    }
    // Nodes a + h, a + 2h, ... strictly below b.
    const auto m = static_cast<long>(std::ceil(iv.length() / h - 1e-9)) - 1;
    for (long j = 1; j <= m; ++j) {
      nodes.push_back(iv.lo + static_cast<double>(j) * h);
      comp.push_back(k);
    }
  }
  return std::make_shared<const Mesh>(domain, h, std::move(nodes), std::move(comp));
}

NodalFunction::NodalFunction(MeshPtr m, Vector v) : mesh(std::move(m)), values(std::move(v)) {
  if (!mesh || static_cast<std::size_t>(values.size()) != mesh->size())
    throw ValidationError("nodal function length does not match the mesh");
}

Potential::Potential(MeshPtr mesh, Vector values) : mesh_(std::move(mesh)), values_(std::move(values)) {
  if (!mesh_ || static_cast<std::size_t>(values_.size()) != mesh_->size())
    throw ValidationError("potential length does not match the mesh");
  if (!values_.allFinite()) throw ValidationError("potential samples must be finite");
  if (values_.maxCoeff() <= 0.0)
    throw ValidationError("potential must be positive on at least one node");
  ess_sup_ = values_.cwiseAbs().maxCoeff();
}

bool Potential::is_even(double tol) const {
  const auto map = mesh_->mirror_map();
  for (std::size_t i = 0; i < map.size(); ++i) {
    if (map[i] == Mesh::npos) return false;
    if (std::abs(values_[static_cast<Eigen::Index>(i)] -
                 values_[static_cast<Eigen::Index>(map[i])]) > tol)
      return false;
  }
  return true;
}

Potential Potential::scaled(double c) const { return Potential(mesh_, c * values_); }

double pairwise_sum(std::span<const double> terms) {
  constexpr std::size_t kLeaf = 32;
  if (terms.size() <= kLeaf) {
    double s = 0.0;
    for (double t : terms) s += t;
    return s;
  }
  const std::size_t half = terms.size() / 2;
  return pairwise_sum(terms.first(half)) + pairwise_sum(terms.subspan(half));
}

double abs_pow(double x, double a) {
  const double ax = std::abs(x);
  if (a == 2.0) return ax * ax;
  if (a == 3.0) return ax * ax * ax;
  if (a == 1.0) return ax;
  if (a == 4.0) return (ax * ax) * (ax * ax);
  if (ax == 0.0) return 0.0;
  return std::pow(ax, a);
}

double lp_norm_p(const Vector& u, double h, double exponent) {
  std::vector<double> terms(static_cast<std::size_t>(u.size()));
  for (Eigen::Index i = 0; i < u.size(); ++i) terms[static_cast<std::size_t>(i)] = abs_pow(u[i], exponent);
  return h * pairwise_sum(terms);
}

double lp_norm_p(const NodalFunction& u, double exponent) {
  return lp_norm_p(u.values, u.mesh->h(), exponent);
}

double weighted_lp_norm_p(const Vector& u, const Vector& V, double h, double exponent) {
  std::vector<double> terms(static_cast<std::size_t>(u.size()));
  for (Eigen::Index i = 0; i < u.size(); ++i)
    terms[static_cast<std::size_t>(i)] = V[i] * abs_pow(u[i], exponent);
  return h * pairwise_sum(terms);
}

double weighted_lp_norm_p(const NodalFunction& u, const Potential& V, double exponent) {
  return weighted_lp_norm_p(u.values, V.values(), u.mesh->h(), exponent);
}

double evaluate(const NodalFunction& u, double x) {
  const Mesh& m = *u.mesh;
  const double h = m.h();
  for (std::size_t k = 0; k < m.domain().component_count(); ++k) {
    const auto& iv = m.domain().intervals()[k];
    if (!(x > iv.lo && x < iv.hi)) continue;
    const auto [first, last] = m.component_range(k);
    // Piecewise-linear through (lo, 0), the component nodes, and (hi, 0).
    const double xl = m.nodes()[first];
    const double xr = m.nodes()[last - 1];
    auto val = [&](std::size_t i) { return u.values[static_cast<Eigen::Index>(i)]; };
    if (x <= xl) return val(first) * (x - iv.lo) / (xl - iv.lo);
    if (x >= xr) return val(last - 1) * (iv.hi - x) / (iv.hi - xr);
    const auto j = first + static_cast<std::size_t>(std::floor((x - xl) / h));
    const std::size_t jj = std::min(j, last - 2);
    const double t = (x - m.nodes()[jj]) / h;
    return (1.0 - t) * val(jj) + t * val(jj + 1);
  }
  return 0.0;
}

}  // namespace fracpq
