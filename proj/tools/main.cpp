#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "refprior/cli.hpp"

int main(int argc, char** argv) {
  CLI::App app{"refprior: reference priors and permissibility diagnostics from a JSON run config"};
  std::string config;
  std::size_t threads = 0;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  app.add_option("--config", config, "run configuration (JSON)")->required();
  app.add_option("--threads", threads, "worker count (default: REFPRIOR_THREADS, else all cores)")
      ->check(CLI::PositiveNumber);
  app.add_option("--seed", seed, "overrides the seed in the config");
  app.add_option("--out", out, "overrides output.path");
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }
  refprior::cli::Overrides overrides;
  overrides.seed = seed;
  overrides.out = out;
  overrides.threads = threads;
  return refprior::cli::run(config, overrides, std::cerr);
}
