#include <chrono>
#include <filesystem>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "bifrac/runner.hpp"

namespace {

enum Exit { kOk = 0, kFailure = 1, kUsage = 2, kBudget = 3 };

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"bifrac: bilinear fractional integral laboratory"};
  std::string experiment;
  std::string config_path;
  std::string out_dir = "bifrac_out";
  unsigned threads = 0;
  app.add_option("experiment", experiment, "one of: " + bifrac::experiment_list())->required();
  app.add_option("--config", config_path, "JSON experiment config")->required();
  app.add_option("--threads", threads, "worker thread cap (0 = all cores)");
  app.add_option("--out", out_dir, "output directory");
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    bifrac::require_known_experiment(experiment);
    bifrac::set_thread_cap(threads);
    const auto start = std::chrono::steady_clock::now();
    const bifrac::ExperimentConfig cfg = bifrac::load_config(config_path, experiment);
    const bifrac::RunResult result = bifrac::run_experiment(cfg);
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const auto files = bifrac::write_outputs(out_dir, cfg, result, config_path, wall, bifrac::thread_cap());
    std::cout << experiment << ": wrote";
    for (const auto& f : files) std::cout << ' ' << (std::filesystem::path(out_dir) / f).string();
    std::cout << '\n';
    return kOk;
  } catch (const bifrac::UsageError& e) {
    std::cerr << "error: " << e.what() << "\n\n" << app.help();
    return kUsage;
  } catch (const bifrac::HypothesisError& e) {
    std::cerr << "error: invalid exponents: " << e.what() << '\n';
    return kUsage;
  } catch (const bifrac::BudgetError& e) {
    std::cerr << "error: " << e.what() << "; raise budget_bytes or BIFRAC_BUDGET_BYTES to at least "
              << e.required() << '\n';
    return kBudget;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kFailure;
  }
}
