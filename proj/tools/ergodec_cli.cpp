#include <chrono>
#include <cstdio>
#include <iostream>
#include <string>

#include "CLI11.hpp"

#include "ergodec/harness.hpp"

namespace {

enum ExitCode { kOk = 0, kCheckFailed = 1, kConfigError = 2, kCapacityError = 3, kOtherError = 4 };

}  // namespace

int main(int argc, char** argv) {
  using namespace ergodec;
  CLI::App app{"Ergodic decomposition experiments"};
  app.require_subcommand(1);
  app.set_version_flag("--version", harness::kVersion);

  std::string config_path;
  std::string out_dir = "out";
  std::uint64_t seed = 1;
  std::size_t workers = 1;
  bool seed_given = false;
  bool workers_given = false;

  for (const auto& name : harness::subcommands()) {
    auto* sub = app.add_subcommand(name);
    sub->add_option("--config", config_path, "TOML experiment configuration")->check(CLI::ExistingFile);
    sub->add_option_function<std::uint64_t>(
        "--seed", [&](std::uint64_t s) { seed = s, seed_given = true; }, "root random seed (default 1)");
    sub->add_option("--out", out_dir, "output directory")->capture_default_str();
    sub->add_option_function<std::size_t>(
           "--workers", [&](std::size_t w) { workers = w, workers_given = true; }, "worker threads (default 1)")
        ->check(CLI::PositiveNumber);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfigError;
  }

  const std::string subcommand = app.get_subcommands().front()->get_name();
  const auto start = std::chrono::steady_clock::now();
  try {
    auto cfg = config_path.empty() ? harness::ExperimentConfig{} : harness::ExperimentConfig::from_file(config_path);
    harness::RunOptions run;
    run.seed = seed_given ? seed : cfg.get_u64("seed", 1);
    run.workers = workers_given ? workers : cfg.get_size("workers", 1);
    if (run.workers == 0) throw ConfigError("workers must be positive");

    const auto rec = harness::run(subcommand, cfg, run);
    harness::write_artifacts(rec, out_dir);
    for (const auto& c : rec.checks) {
      std::cout << (c.passed ? "PASS " : "FAIL ") << c.name << ": " << c.detail << "\n";
    }
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::cout << subcommand << ": " << (rec.passed() ? "all checks passed" : "some checks failed") << " in "
              << format_double(seconds) << " s with " << run.workers << " worker(s); results in " << out_dir
              << "\n";
    return rec.passed() ? kOk : kCheckFailed;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const CapacityError& e) {
    std::cerr << "capacity error: " << e.what() << "\n";
    return kCapacityError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kOtherError;
  }
}
