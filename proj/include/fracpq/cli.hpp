#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "fracpq/continuation.hpp"
#include "fracpq/energies.hpp"
#include "fracpq/mesh.hpp"

namespace fracpq::cli {

inline constexpr const char* kVersion = "0.1.0";

enum ExitCode : int { kOk = 0, kFailure = 1, kInvalid = 2, kNotConverged = 3 };

struct PotentialSpec {
  std::string kind = "constant";  ///< constant | catalog | nodal
  double value = 1.0;             ///< constant level
  std::string name;               ///< catalog id: one | sign_step | gaussian_bump
  double center = 0.0;            ///< gaussian_bump centre
  double width = 0.25;            ///< gaussian_bump standard deviation
  std::vector<double> values;     ///< nodal samples, one per mesh node
};

/// Where the problem lambda comes from: an absolute value or a multiple of lambda_1.
struct LambdaSpec {
  std::optional<double> value;
  std::optional<double> factor;
};

struct RunConfig {
  std::vector<Interval> domain;
  MeshCoupling mesh;
  ProblemParams params;
  PotentialSpec potential;
  double tol = 1e-10;
  int max_iter = 1000;
  std::uint64_t seed = 0;
  std::string out_dir = "out";
  std::vector<std::string> formats{"json", "csv"};
  int workers = 0;

  LambdaSpec nehari_lambda{std::nullopt, 1.5};
  LambdaSpec certify_lambda{std::nullopt, 0.99};
  int certify_trials = 1000;

  LambdaSpec mu_sweep_lambda{std::nullopt, 1.5};
  std::vector<double> mu_grid{1.0, 0.5, 0.25, 0.1, 0.05, 0.01};
  std::vector<double> t_grid{10.0, 100.0, 1000.0, 10000.0};

  std::vector<double> s_grid{0.6, 0.7, 0.8, 0.9, 0.95};
  MeshCoupling s_sweep_mesh{true, 64, 1.0, 2.0, 100, 4096};
  std::optional<double> s_sweep_nehari_factor;

  std::vector<Interval> bbm_domain{{-1.5, 1.5}};
  std::vector<double> bbm_p{2.0, 3.0};
  std::vector<double> bbm_s_grid{0.6, 0.7, 0.8, 0.9, 0.95};
  MeshCoupling bbm_mesh{};

  nlohmann::json raw;  ///< the configuration as read, echoed in the manifest
};

/// Parses and validates a configuration. Errors are ValidationError with the
/// offending field path in the message.
RunConfig parse_config(const nlohmann::json& j);
RunConfig load_config(const std::string& path);

/// Samples the potential of cfg on mesh.
Potential make_potential(const PotentialSpec& spec, const MeshPtr& mesh);

/// FNV-1a 64-bit hash of the compact dump of j, as 16 hex digits.
std::string config_hash(const nlohmann::json& j);

/// Human-readable summary lines derived from a manifest's subcommand and results.
std::vector<std::string> summarize(const nlohmann::json& manifest);

const std::vector<std::string>& subcommands();

/// Executes one subcommand and writes its artifacts. Returns the exit code;
/// diagnostics go to err.
int run(const std::string& subcommand, const std::string& config_path,
        const std::optional<std::string>& out_dir, const std::optional<std::uint64_t>& seed,
        std::ostream& out, std::ostream& err);

}  // namespace fracpq::cli
