#include "doctest.h"

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "fracpq/cli.hpp"
#include "fracpq/errors.hpp"

using namespace fracpq;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const fs::path kScratchRoot = fs::temp_directory_path() / ("fracpq_test_cli_" + std::to_string(::getpid()));

struct ScratchCleanup {
  ~ScratchCleanup() { fs::remove_all(kScratchRoot); }
} scratch_cleanup;

fs::path scratch(const std::string& name) {
  const fs::path dir = kScratchRoot / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

json small_config() {
  json j = json::parse(std::ifstream(FRACPQ_DEFAULT_CONFIG));
  j["mesh"] = {{"n_per_unit", 16}};
  j["certify"]["trials"] = 200;
  j["mu_sweep"]["mu_grid"] = {1.0, 0.5, 0.25};
  return j;
}

fs::path write_config(const fs::path& dir, const json& j) {
  const fs::path path = dir / "config.json";
  std::ofstream(path) << j.dump(2);
  return path;
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(FRACPQ_CLI_PATH) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

std::string parse_error(const json& j) {
  try {
    cli::parse_config(j);
  } catch (const ValidationError& e) {
    return e.what();
  }
  return {};
}

}  // namespace

TEST_CASE("configuration validation names the offending field") {
  const json base = small_config();
  CHECK(parse_error(base).empty());

  json j = base;
  j["params"]["q"] = 2.0;
  CHECK(parse_error(j).find("q must be strictly smaller than p") != std::string::npos);

  j = base;
  j["params"]["s"] = 1.2;
  CHECK(parse_error(j).find("params") != std::string::npos);

  j = base;
  j["domain"] = json::array();
  CHECK(parse_error(j).find("domain") != std::string::npos);

  j = base;
  j["solver"]["tolerance"] = 1e-3;
  CHECK(parse_error(j).find("solver.tolerance") != std::string::npos);

  j = base;
  j["mesh"]["n_per_unit"] = 2;
  CHECK_FALSE(parse_error(j).empty());
}

TEST_CASE("config hash is stable and sensitive") {
  const json a = small_config();
  json b = a;
  CHECK(cli::config_hash(a) == cli::config_hash(b));
  CHECK(cli::config_hash(a).size() == 16);
  b["solver"]["seed"] = 1;
  CHECK(cli::config_hash(a) != cli::config_hash(b));
}

TEST_CASE("lambda1 writes its artifacts and is deterministic") {
  const fs::path dir = scratch("lambda1");
  const fs::path cfg = write_config(dir, small_config());
  REQUIRE(run_cli("lambda1 --config " + cfg.string() + " --out " + (dir / "a").string()) == 0);
  REQUIRE(run_cli("lambda1 --config " + cfg.string() + " --out " + (dir / "b").string()) == 0);
  for (const char* f : {"manifest.json", "eigenfunction.csv", "trace.csv"}) CHECK(fs::exists(dir / "a" / f));
  CHECK(slurp(dir / "a" / "eigenfunction.csv").rfind("x,u\n", 0) == 0);
  CHECK(slurp(dir / "a" / "trace.csv").rfind("iter,quotient,residual\n", 0) == 0);
  CHECK(slurp(dir / "a" / "eigenfunction.csv") == slurp(dir / "b" / "eigenfunction.csv"));
  CHECK(slurp(dir / "a" / "trace.csv") == slurp(dir / "b" / "trace.csv"));

  const json manifest = json::parse(slurp(dir / "a" / "manifest.json"));
  CHECK(manifest["subcommand"] == "lambda1");
  CHECK(manifest["status"] == "ok");
  CHECK(manifest["version"] == cli::kVersion);
  CHECK(manifest["config_hash"] == cli::config_hash(manifest["config"]));
  CHECK(run_cli("report --config " + (dir / "a" / "manifest.json").string()) == 0);
}

TEST_CASE("certify passes below the computed first eigenvalue") {
  const fs::path dir = scratch("certify");
  const fs::path cfg = write_config(dir, small_config());
  REQUIRE(run_cli("certify --config " + cfg.string() + " --out " + (dir / "out").string()) == 0);
  const json manifest = json::parse(slurp(dir / "out" / "manifest.json"));
  CHECK(manifest["results"]["certificate"]["pass"] == true);
  CHECK(manifest["results"]["seeded_certificate"]["pass"] == true);
}

TEST_CASE("every subcommand runs on a small configuration") {
  const fs::path dir = scratch("all");
  json j = small_config();
  j["s_sweep"]["s_grid"] = {0.6, 0.8};
  j["s_sweep"]["mesh"] = {{"n_per_unit", 16}};
  j["bbm"]["s_grid"] = {0.6, 0.8};
  const fs::path cfg = write_config(dir, j);
  for (const std::string& sub : cli::subcommands()) {
    if (sub == "report") continue;
    CAPTURE(sub);
    const fs::path out = dir / sub;
    CHECK(run_cli(sub + " --config " + cfg.string() + " --out " + out.string() + " --seed 3") == 0);
    CHECK(fs::exists(out / "manifest.json"));
    const json manifest = json::parse(slurp(out / "manifest.json"));
    CHECK(manifest["seed"] == 3);
  }
  CHECK(fs::exists(dir / "mu-sweep" / "sweep.csv"));
  CHECK(fs::exists(dir / "mu-sweep" / "decay.csv"));
  CHECK(fs::exists(dir / "bbm" / "bbm_p2.csv"));
  CHECK(fs::exists(dir / "bbm" / "bbm_p3.csv"));
  CHECK(fs::exists(dir / "nehari" / "minimizer.csv"));
}

TEST_CASE("invalid input exits with code 2") {
  const fs::path dir = scratch("invalid");
  json j = small_config();
  j["params"]["q"] = j["params"]["p"];
  const fs::path cfg = write_config(dir, j);
  CHECK(run_cli("lambda1 --config " + cfg.string() + " --out " + (dir / "out").string()) == 2);

  const fs::path broken = dir / "broken.json";
  std::ofstream(broken) << "{\n  \"domain\": [[-1, 1]],\n  \"mesh\": {\n}";
  std::ostringstream out, err;
  CHECK(cli::run("lambda1", broken.string(), (dir / "out").string(), std::nullopt, out, err) == cli::kInvalid);
  CHECK(err.str().find("broken.json:") != std::string::npos);

  CHECK(run_cli("lambda1") == 2);
  CHECK(run_cli("lambda1 --config " + (dir / "missing.json").string()) == 2);
}

TEST_CASE("oracle rejects p other than two") {
  const fs::path dir = scratch("oracle");
  json j = small_config();
  j["params"]["p"] = 3.0;
  j["params"]["q"] = 2.0;
  const fs::path cfg = write_config(dir, j);
  CHECK(run_cli("oracle --config " + cfg.string() + " --out " + (dir / "out").string()) == 2);
}
