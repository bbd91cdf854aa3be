#pragma once

#include <string>
#include <vector>

#include "dnewton/harness/experiment.hpp"

namespace dnewton::harness {

struct Preset {
  std::string name;
  std::string description;
  /// Configs of the preset's runs, writing "<out_dir>/<label>.csv".
  std::vector<ExperimentConfig> (*build)(const std::string& out_dir);
};

/// All presets, in a fixed order.
const std::vector<Preset>& presets();
/// Throws Error for an unknown name.
const Preset& find_preset(const std::string& name);

std::vector<RunResult> run_preset(const std::string& name, const std::string& out_dir,
                                  const RunObserver<double>& observer = nullptr);

}  // namespace dnewton::harness
