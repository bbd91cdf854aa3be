#pragma once

#include <iosfwd>
#include <memory>
#include <string>

#include "dnewton/objectives.hpp"

namespace dnewton::harness {

// Self-describing text format:
//
//   dnewton-problem 1
//   family quadratic|logistic
//   n <nodes>
//   d <dimension>
//   seed <seed>
//   rho <rho>                 (logistic only)
//
// followed by one block per node and field, each a header line ("Q 0",
// "p 0" or "samples 0", "labels 0") and a matrix in the text matrix format
// terminated by a blank line. Vectors are stored as a single row.

void save_problem(std::ostream& os, const Problem<double>& problem);
void save_problem(const std::string& path, const Problem<double>& problem);
std::unique_ptr<Problem<double>> load_problem(std::istream& is);
std::unique_ptr<Problem<double>> load_problem(const std::string& path);

}  // namespace dnewton::harness
