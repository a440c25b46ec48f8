#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"

#include "fracpq/cli.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Spectral solver for the Dirichlet fractional p&q-Laplacian on 1D domains"};
  app.set_version_flag("--version", fracpq::cli::kVersion);
  app.require_subcommand(1);

  std::string config;
  std::string out;
  std::uint64_t seed = 0;
  for (const auto& name : fracpq::cli::subcommands()) {
    const bool is_report = name == "report";
    CLI::App* sub = app.add_subcommand(name, is_report ? "recompute and check the summary of a manifest"
                                                       : "run " + name);
    sub->add_option("--config", config, is_report ? "manifest.json to check" : "JSON run configuration")
        ->required();
    sub->add_option("--out", out, "output directory (overrides output.directory)");
    sub->add_option("--seed", seed, "random seed (overrides solver.seed)");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : fracpq::cli::kInvalid;
  }

  CLI::App* chosen = app.get_subcommands().front();
  std::optional<std::string> out_dir;
  std::optional<std::uint64_t> seed_override;
  if (chosen->count("--out")) out_dir = out;
  if (chosen->count("--seed")) seed_override = seed;
  return fracpq::cli::run(chosen->get_name(), config, out_dir, seed_override, std::cout, std::cerr);
}
