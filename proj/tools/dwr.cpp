#include <CLI11.hpp>

#include <cstdio>
#include <iostream>

#include "dwr/driver.hpp"

namespace {

enum Exit { kOk = 0, kConfigError = 1, kSolverFailure = 2, kFallback = 3 };

dwr::ExperimentConfig load(const std::string& path, const std::optional<std::uint64_t>& seed,
                           const std::string& backend) {
  dwr::ExperimentConfig cfg = dwr::load_config(path);
  if (seed) cfg.set_seed(*seed);
  if (backend == "fem") cfg.backend = dwr::AdjointBackend::Fem;
  if (backend == "nn") cfg.backend = dwr::AdjointBackend::Nn;
  cfg.validate();
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Goal-oriented adaptive finite elements with FEM or neural-network adjoints"};
  app.require_subcommand(1);
  std::optional<std::uint64_t> seed;
  std::string backend;
  app.add_option("--seed", seed, "Override the configured seed");
  app.add_option("--backend", backend, "Override the adjoint backend")->check(CLI::IsMember({"fem", "nn"}));

  std::string run_path, ref_path;
  auto* run = app.add_subcommand("run", "Run the refine loop and write results to output_dir");
  run->add_option("config", run_path, "Config file")->required();
  auto* ref = app.add_subcommand("reference", "Compute and cache the reference goal value");
  ref->add_option("config", ref_path, "Config file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfigError;
  }

  dwr::ExperimentConfig cfg;
  try {
    cfg = load(run->parsed() ? run_path : ref_path, seed, backend);
  } catch (const dwr::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigError;
  }

  try {
    if (ref->parsed()) {
      std::printf("%.17g\n", dwr::compute_reference(cfg));
      return kOk;
    }
    const auto res = dwr::run_experiment(cfg);
    std::cout << dwr::csv_header() << '\n';
    for (const auto& r : res.rows) std::cout << dwr::format_row(r) << '\n';
    if (res.fallback_triggered) {
      std::cerr << "warning: network training diverged; FEM adjoint used on rows marked fem_fallback\n";
      return kFallback;
    }
    return kOk;
  } catch (const dwr::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kSolverFailure;
  }
}
