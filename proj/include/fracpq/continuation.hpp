#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "fracpq/eigsolve.hpp"
#include "fracpq/energies.hpp"
#include "fracpq/nehari.hpp"

namespace fracpq {

/// Tabular outcome of a parameter sweep, one row per grid point.
struct SweepResult {
  std::string parameter;             ///< name of the swept quantity, also the first column
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;
  std::vector<bool> flagged;         ///< point failed or missed its tolerance
  std::optional<double> fitted_exponent;
  std::vector<std::string> notes;

  /// Values of one column; throws std::out_of_range for unknown names.
  std::vector<double> column(const std::string& name) const;
};

/// Grid resolution as a function of s: either a fixed n_per_unit or
/// n(s) = ceil(1 / (scale (1 - s)^power)), i.e. h(s) = scale (1 - s)^power.
struct MeshCoupling {
  bool coupled = true;
  int n_per_unit = 64;
  double scale = 1.0;
  double power = 2.0;
  int min_n = 8;
  int max_n = 4096;

  int resolve(double s) const;
};

/// Worker count: min(requested, FRACPQ_THREADS, hardware parallelism), at least 1.
int worker_count(int requested = 0);

/// Runs job(0..count-1) on up to `workers` threads. Jobs must be independent.
void parallel_for(std::size_t count, int workers, const std::function<void(std::size_t)>& job);

/// Quotient (I(t u1) + (mu/q) B(t u1)) / J(t u1) along the ray through the
/// ground state, its gap to lambda_1 and the least-squares slope of log gap
/// against log t. `b` must carry mu > 0; `ground` is the mu = 0 ground state.
SweepResult mu_quotient_decay(const EnergyBundle& b, const EigenReport& ground,
                              const std::vector<double>& t_values);

struct SweepOptions {
  double tol = 1e-9;
  int max_iter = 500;
  std::uint64_t seed = 0;
  int workers = 0;
};

/// Nehari level m_lambda(mu) and solution norms for each mu of a decreasing grid.
/// Throws ValidationError when lambda does not exceed the discrete lambda_1.
SweepResult mu_sweep(const EnergyBundle& b, double lambda, const std::vector<double>& mu_grid,
                     const SweepOptions& opt = {});

using Profile = std::function<double(double)>;

/// Relative error |[u]_{s,p}^p - ||u'||_p^p| / ||u'||_p^p of a fixed profile
/// sampled on the coupled mesh of each s, against the first-difference energy.
SweepResult bbm_check(const Domain1D& domain, const Profile& u, double p,
                      const std::vector<double>& s_grid, const MeshCoupling& coupling,
                      int workers = 0);

struct StabilityOptions : SweepOptions {
  /// When set, also solves the Nehari problem at lambda_factor * lambda_1^s.
  std::optional<double> nehari_lambda_factor;
  /// Points of the uniform grid on which eigenfunctions of different meshes are compared.
  int compare_points = 2001;
};

/// lambda_1^s along an increasing s grid against the s = 1 reference on the same
/// mesh, with the L^p distance between consecutive normalized eigenfunctions.
SweepResult s_stability_sweep(const Domain1D& domain, const ProblemParams& base, const Profile& V,
                              const std::vector<double>& s_grid, const MeshCoupling& coupling,
                              const StabilityOptions& opt = {});

/// Slope of the least-squares line through (log x_i, log y_i).
double loglog_slope(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace fracpq
