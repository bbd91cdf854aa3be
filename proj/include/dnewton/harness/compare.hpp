#pragma once

#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

namespace dnewton::harness {

struct SummaryRow {
  std::string label;
  std::string method;
  double final_rel_err = 0;
  int iterations = 0;
  int iterations_to_tol = -1;  // -1: tolerance never reached
  std::int64_t bits_to_tol = -1;
  double wall_time = 0;
};

/// One row per trace. Label and method come from the sidecar "<stem>.json" when
/// present, otherwise from the file name.
std::vector<SummaryRow> summarize(const std::vector<std::string>& trace_paths, double tol);

void write_summary(std::ostream& os, const std::vector<SummaryRow>& rows);
/// Needs at least two traces.
std::vector<SummaryRow> compare(const std::vector<std::string>& trace_paths, double tol, const std::string& out_path);

}  // namespace dnewton::harness
