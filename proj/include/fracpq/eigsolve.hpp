#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "fracpq/energies.hpp"

namespace fracpq {

enum class SignProfile { positive, negative, sign_changing };

std::string to_string(SignProfile s);

/// Classifies u with the relative threshold rel * max|u|.
SignProfile sign_profile(const Vector& u, double rel = 1e-8);

struct TraceRow {
  int iteration;
  double quotient;
  double residual;
};

struct EigenReport {
  double lambda_est = 0.0;
  NodalFunction eigenfunction;  ///< normalized to J(u) = 1
  double residual = 0.0;        ///< eigen_residual(lambda_est, eigenfunction)
  int iterations = 0;
  SignProfile sign = SignProfile::positive;
  std::vector<double> component_mins;  ///< min |u| per connected component
  std::vector<TraceRow> trace;
  bool converged = false;
  /// Second eigenvalue only: max over the circle of I(f(theta)) at the returned function.
  std::optional<double> path_max;
};

/// First eigenvalue of the mu = 0 problem by projected descent on {J(u) = 1}.
/// Throws SolverError when no admissible start with J(u) > 0 exists.
EigenReport lambda1(const EnergyBundle& b, double tol, int max_iter, std::uint64_t seed);

/// The s = 1 problem with first-difference gradient energy; same contract as lambda1.
EigenReport local_reference_lambda1(const MeshPtr& mesh, double p, const Potential& V, double tol,
                                    int max_iter = 500, std::uint64_t seed = 0);

struct OracleMode {
  double lambda;
  NodalFunction u;  ///< J(u) = 1, largest-magnitude entry positive
};

/// Dense generalized eigenproblem (A2 + M) u = lambda M_V u at p = 2, mu = 0.
/// Modes with non-positive V-weighted mass are dropped; ascending order.
std::vector<OracleMode> linear_oracle(const MeshPtr& mesh, double s, const Potential& V);
/// Same pencil with an already assembled alpha = 2 operator.
std::vector<OracleMode> linear_oracle(const GagliardoOperator& op2, const Potential& V);

/// Second eigenvalue through the two-parameter odd paths
///   f(theta) = (theta_1 u_+ + theta_2 u_-) / (|theta_1|^p J(u_+) + |theta_2|^p J(u_-))^{1/p},
/// minimized over u and refined to an eigenpair.
/// Throws SolverError("no sign-changing candidate found") on collapse.
EigenReport lambda2_minimax(const EnergyBundle& b, double tol, std::uint64_t seed,
                            int max_iter = 200);

/// Values of theta -> I(f_u(theta)) on `points` equally spaced angles of S^1.
struct PathProfile {
  std::vector<double> theta;
  std::vector<double> value;
  double max_value;
  double argmax_theta;
};
PathProfile odd_path_profile(const EnergyBundle& b, const Vector& u, int points = 128);

struct GroundStateReport {
  bool constant_sign = false;
  bool positive_on_every_component = false;
  std::vector<double> component_mins;
  int seeds_checked = 0;
  double simplicity_distance = 0.0;  ///< max L^p distance to re-runs, up to sign
  bool simple = false;
  bool symmetry_applicable = false;
  double symmetry_defect = 0.0;
  bool monotonicity_applicable = false;
  bool radially_monotone = false;
};

/// Findings about a lambda1 report: constant sign with positivity on each
/// component, simplicity across `seeds` re-runs, mirror symmetry and radial
/// monotonicity on symmetric configurations.
GroundStateReport check_ground_state_properties(const EigenReport& rep, const EnergyBundle& b,
                                                int seeds = 10, double tol = 1e-9,
                                                double profile_tol = 1e-3);

struct IsolationRow {
  double lambda;
  double min_residual;
  int converged_starts;
};

/// Fixed-lambda Newton refinement from random starts on a grid strictly between
/// lambda_1 and lambda_2. Empirical evidence only.
std::vector<IsolationRow> isolation_probe(const EnergyBundle& b, double lambda1, double lambda2,
                                          int grid_points, int starts, double tol,
                                          std::uint64_t seed);

/// L^p distance between two nodal functions on the same mesh, (h sum |u - v|^p)^{1/p}.
double lp_distance(const Vector& u, const Vector& v, double h, double p);

}  // namespace fracpq
