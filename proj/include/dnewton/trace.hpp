#pragma once

#include <array>
#include <fstream>
#include <functional>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "dnewton/diagnostics.hpp"
#include "dnewton/matrix_io.hpp"

namespace dnewton {

enum class RunStatus { converged, max_iters, diverged };

inline std::string to_string(RunStatus s) {
  switch (s) {
    case RunStatus::converged: return "converged";
    case RunStatus::max_iters: return "max_iters";
    case RunStatus::diverged: return "diverged";
  }
  return "?";
}

/// Exit code convention: 0 converged, 2 iteration budget exhausted, 3 diverged.
inline int exit_code(RunStatus s) {
  switch (s) {
    case RunStatus::converged: return 0;
    case RunStatus::max_iters: return 2;
    case RunStatus::diverged: return 3;
  }
  return 1;
}

struct Trace {
  std::vector<RoundMetrics> rows;
  RunStatus status = RunStatus::max_iters;
  std::string message;
  std::string fingerprint;

  double final_rel_err() const { return rows.empty() ? 0.0 : rows.back().rel_err; }
  int iterations() const { return rows.empty() ? 0 : rows.back().iter; }

  /// First iteration with rel_err <= tol, or -1.
  int iterations_to(double tol) const {
    for (const auto& r : rows)
      if (r.rel_err <= tol) return r.iter;
    return -1;
  }
  std::int64_t bits_to(double tol) const {
    for (const auto& r : rows)
      if (r.rel_err <= tol) return r.bits_cum;
    return -1;
  }
};

/// Called after every recorded row; return false to stop the run early.
template <typename Scalar>
using RunObserver = std::function<bool(const NetworkState<Scalar>&, const RoundMetrics&)>;

inline constexpr std::array<std::string_view, 17> kCsvColumns = {
    "iter",  "rel_err", "cons_x", "track_g", "track_H", "err_E",   "diff_Htilde",    "u1",       "u2",
    "u3",    "eps_k",   "delta_k", "alpha_k", "c_k",    "fallback_count", "bits_cum", "wall_time"};

inline std::string csv_header() {
  std::string h;
  for (std::size_t i = 0; i < kCsvColumns.size(); ++i) {
    if (i) h += ',';
    h += kCsvColumns[i];
  }
  return h;
}

inline std::string csv_row(const RoundMetrics& r) {
  std::ostringstream os;
  os << r.iter << ',' << format_real(r.rel_err) << ',' << format_real(r.cons_x) << ',' << format_real(r.track_g)
     << ',' << format_real(r.track_H) << ',' << format_real(r.err_E) << ',' << format_real(r.diff_Htilde) << ','
     << format_real(r.u1) << ',' << format_real(r.u2) << ',' << format_real(r.u3) << ',' << format_real(r.eps_k)
     << ',' << format_real(r.delta_k) << ',' << format_real(r.alpha_k) << ',' << format_real(r.c_k) << ','
     << r.fallback_count << ',' << r.bits_cum << ',' << format_real(r.wall_time);
  return os.str();
}

inline void write_csv(std::ostream& os, const Trace& trace) {
  os << csv_header() << '\n';
  for (const auto& r : trace.rows) os << csv_row(r) << '\n';
}

inline void write_csv(const std::string& path, const Trace& trace) {
  std::ofstream os(path);
  if (!os) throw Error("cannot open '" + path + "' for writing");
  write_csv(os, trace);
  if (!os) throw Error("write to '" + path + "' failed");
}

inline std::vector<RoundMetrics> read_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw Error("read_csv: empty input");
  if (line != csv_header()) throw Error("read_csv: unexpected header '" + line + "'");
  std::vector<RoundMetrics> rows;
  int lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) f.push_back(cell);
    if (f.size() != kCsvColumns.size())
      throw Error("read_csv: line " + std::to_string(lineno) + " has " + std::to_string(f.size()) + " fields");
    try {
      RoundMetrics r;
      r.iter = std::stoi(f[0]);
      double* reals[] = {&r.rel_err, &r.cons_x, &r.track_g, &r.track_H, &r.err_E,   &r.diff_Htilde,
                         &r.u1,      &r.u2,     &r.u3,      &r.eps_k,   &r.delta_k, &r.alpha_k, &r.c_k};
      for (std::size_t i = 0; i < std::size(reals); ++i) *reals[i] = std::stod(f[i + 1]);
      r.fallback_count = std::stoi(f[14]);
      r.bits_cum = std::stoll(f[15]);
      r.wall_time = std::stod(f[16]);
      rows.push_back(r);
    } catch (const std::logic_error&) {
      throw Error("read_csv: malformed number on line " + std::to_string(lineno));
    }
  }
  return rows;
}

inline std::vector<RoundMetrics> read_csv(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw Error("cannot open trace '" + path + "'");
  return read_csv(is);
}

}  // namespace dnewton
