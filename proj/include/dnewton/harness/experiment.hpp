#pragma once

#include <memory>
#include <string>
#include <vector>

#include "dnewton/harness/config.hpp"

namespace dnewton::harness {

/// Everything generated from the problem/graph/init sections of a config.
struct Instance {
  std::unique_ptr<Problem<double>> problem;
  Topology topology;
  MixingMatrix<double> mixing;
  NodeVectors<double> x0;
  CentralizedResult<double> oracle;
};

Instance build_instance(const ExperimentConfig& c);

struct RunResult {
  std::string label;
  std::string fingerprint;
  std::string csv_path;  // empty when no CSV was written
  std::string meta_path;
  Trace trace;
  double gt_alpha = 0;  // step actually used by a gt run (tuned or configured)
  int exit_code() const { return dnewton::exit_code(trace.status); }
};

/// Runs a single repetition on a prepared instance and persists its outputs.
RunResult run_on(const ExperimentConfig& c, const Instance& inst, const RunObserver<double>& observer = nullptr);

/// Runs every repetition of `c`. Repetition r > 0 shifts all three seeds by r
/// and writes to "<csv stem>_rep<r>.csv".
std::vector<RunResult> run_experiment(const ExperimentConfig& c, const RunObserver<double>& observer = nullptr);

/// Trace path of repetition r.
std::string repetition_path(const std::string& path, int r);

/// Human-readable parameter-cap report for the config's instance.
std::string caps_report(const ExperimentConfig& c);

/// Writes x, g and the per-node matrices of `s` in the text matrix format.
void dump_state(const std::string& path, const NetworkState<double>& s);

}  // namespace dnewton::harness
