#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "dnewton/harness/compare.hpp"
#include "dnewton/harness/presets.hpp"

namespace h = dnewton::harness;

namespace {

constexpr int kUsageError = 1;

// Worst status over a set of runs: diverged > max_iters > converged.
int combined_exit(const std::vector<h::RunResult>& runs) {
  int code = 0;
  for (const auto& r : runs) {
    const int c = r.exit_code();
    if (c == 3 || (c == 2 && code == 0)) code = c;
  }
  return code;
}

void report(const std::vector<h::RunResult>& runs) {
  for (const auto& r : runs) {
    std::cout << r.label << ": " << r.trace.message;
    if (!r.csv_path.empty()) std::cout << " -> " << r.csv_path;
    std::cout << '\n';
  }
}

h::ExperimentConfig load(const std::string& path) {
  h::ExperimentConfig c = h::load_config(path);
  if (h::apply_seed_override(c)) std::cerr << "note: seeds overridden by " << h::kSeedEnv << '\n';
  return c;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Decentralized Newton simulator with compressed Hessian tracking"};
  app.require_subcommand(1);

  std::string config_path;
  auto* run = app.add_subcommand("run", "run the experiment described by a config file");
  run->add_option("--config", config_path, "config file")->required()->check(CLI::ExistingFile);

  std::string preset_name, out_dir = "out";
  auto* preset = app.add_subcommand("preset", "run a named experiment preset");
  preset->add_option("name", preset_name, "preset name (see list-presets)")->required();
  preset->add_option("--out", out_dir, "output directory")->capture_default_str();

  auto* list = app.add_subcommand("list-presets", "list the available presets");

  std::string summary_path;
  std::vector<std::string> traces;
  double tol = 1e-6;
  auto* cmp = app.add_subcommand("compare", "merge trace CSVs into a summary CSV");
  cmp->add_option("--out", summary_path, "summary CSV path")->required();
  cmp->add_option("--tol", tol, "relative-error tolerance for the *_to_tol columns")->capture_default_str();
  cmp->add_option("traces", traces, "trace CSV files")->required();

  auto* caps = app.add_subcommand("caps", "print the parameter caps for a config's instance");
  caps->add_option("--config", config_path, "config file")->required()->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kUsageError;
  }

  try {
    if (*run) {
      const auto runs = h::run_experiment(load(config_path));
      report(runs);
      return combined_exit(runs);
    }
    if (*preset) {
      const auto runs = h::run_preset(preset_name, out_dir);
      report(runs);
      return combined_exit(runs);
    }
    if (*list) {
      for (const auto& p : h::presets()) std::cout << p.name << "\t" << p.description << '\n';
      return 0;
    }
    if (*cmp) {
      const auto rows = h::compare(traces, tol, summary_path);
      h::write_summary(std::cout, rows);
      return 0;
    }
    if (*caps) {
      std::cout << h::caps_report(load(config_path));
      return 0;
    }
  } catch (const dnewton::CgBreakdown& e) {
    std::cerr << "error: " << e.what() << '\n';
    return dnewton::exit_code(dnewton::RunStatus::diverged);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsageError;
  }
  return kUsageError;
}
