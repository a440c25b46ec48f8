#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Core>

namespace fracpq {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Open interval (lo, hi) of the real line.
struct Interval {
  double lo;
  double hi;

  double length() const { return hi - lo; }
};

/// Finite union of disjoint open intervals, sorted left to right.
class Domain1D {
 public:
  explicit Domain1D(std::vector<Interval> intervals);

  const std::vector<Interval>& intervals() const { return intervals_; }
  std::size_t component_count() const { return intervals_.size(); }

  /// True when the domain equals its own reflection x -> -x.
  bool is_symmetric(double tol = 1e-12) const;

 private:
  std::vector<Interval> intervals_;
};

/// Uniform grid on a Domain1D. Nodes sit strictly inside the intervals, so
/// every nodal function is implicitly zero on the complement of the domain.
class Mesh {
 public:
  Mesh(Domain1D domain, double h, std::vector<double> nodes,
       std::vector<std::size_t> node_component);

  const Domain1D& domain() const { return domain_; }
  double h() const { return h_; }
  std::size_t size() const { return nodes_.size(); }
  const std::vector<double>& nodes() const { return nodes_; }
  const std::vector<std::size_t>& node_component() const { return component_; }

  /// Half-open index range [first, last) of the nodes of component k.
  std::pair<std::size_t, std::size_t> component_range(std::size_t k) const;

  /// Index of the node at -x_i, or npos when the grid is not mirror symmetric.
  std::vector<std::size_t> mirror_map(double tol = 1e-9) const;

  static constexpr std::size_t npos = static_cast<std::size_t>(-1);

 private:
  Domain1D domain_;
  double h_;
  std::vector<double> nodes_;
  std::vector<std::size_t> component_;
  std::vector<std::pair<std::size_t, std::size_t>> ranges_;
};

using MeshPtr = std::shared_ptr<const Mesh>;

/// Builds the grid with spacing 1/n_per_unit anchored at each left endpoint.
MeshPtr build_mesh(const Domain1D& domain, int n_per_unit);

/// Coefficients at interior nodes of a mesh; zero outside the domain.
struct NodalFunction {
  MeshPtr mesh;
  Vector values;

  NodalFunction() = default;
  NodalFunction(MeshPtr m, Vector v);

  std::size_t size() const { return static_cast<std::size_t>(values.size()); }
};

/// Samples of a bounded weight V at the mesh nodes.
class Potential {
 public:
  Potential(MeshPtr mesh, Vector values);

  const Vector& values() const { return values_; }
  double ess_sup() const { return ess_sup_; }
  const MeshPtr& mesh() const { return mesh_; }

  bool nonnegative() const { return values_.minCoeff() >= 0.0; }
  /// V(x) = V(-x) on a mirror-symmetric mesh.
  bool is_even(double tol = 1e-12) const;

  Potential scaled(double c) const;

 private:
  MeshPtr mesh_;
  Vector values_;
  double ess_sup_;
};

/// Deterministic pairwise (tree) summation.
double pairwise_sum(std::span<const double> terms);

/// Mass-lumped h * sum |u_i|^exponent.
double lp_norm_p(const NodalFunction& u, double exponent);
double lp_norm_p(const Vector& u, double h, double exponent);

/// Mass-lumped h * sum V_i |u_i|^exponent; may be negative.
double weighted_lp_norm_p(const NodalFunction& u, const Potential& V, double exponent);
double weighted_lp_norm_p(const Vector& u, const Vector& V, double h, double exponent);

/// |x|^a with exact fast paths for the common integer exponents.
double abs_pow(double x, double a);

/// Piecewise-linear interpolant of u (zero extended) evaluated at x.
double evaluate(const NodalFunction& u, double x);

}  // namespace fracpq
