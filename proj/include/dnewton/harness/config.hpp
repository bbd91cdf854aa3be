#pragma once

#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "dnewton/baseline_gt.hpp"
#include "dnewton/newton.hpp"

namespace dnewton::harness {

/// Sectioned key = value text. Keys are unique per section; '#' and ';' start comments.
class IniDocument {
 public:
  struct Entry {
    std::string value;
    int line = 0;
    bool used = false;
  };

  static IniDocument parse(std::istream& is, const std::string& source = "<config>");
  static IniDocument parse_text(const std::string& text, const std::string& source = "<config>");
  static IniDocument load(const std::string& path);

  bool has(const std::string& section, const std::string& key) const;
  /// Marks the entry as consumed; nullptr if absent.
  const Entry* get(const std::string& section, const std::string& key);
  /// Throws for entries never consumed via get().
  void reject_unused() const;

  const std::string& source() const { return source_; }
  /// "source:line: section.key: what"
  [[noreturn]] void fail(const std::string& section, const std::string& key, const std::string& what) const;

 private:
  std::string source_;
  std::map<std::string, std::map<std::string, Entry>> sections_;
  std::vector<std::pair<std::string, std::string>> order_;
};

enum class ProblemFamily { quadratic, logistic, file };
enum class InitKind { gaussian, zero };
enum class Method { newton, gt };

std::string to_string(ProblemFamily f);
std::string to_string(InitKind k);
std::string to_string(Method m);

struct ProblemConfig {
  ProblemFamily family = ProblemFamily::quadratic;
  int n = 10;
  int d = 30;
  double kappa = 100;          // quadratic
  double heterogeneity = 0.5;  // quadratic
  double rho = 1e-3;           // logistic
  int samples = 100;           // logistic, per node
  std::uint64_t seed = 2;
  std::string path;  // file
};

struct GraphConfig {
  double tau = 0.2;
  std::uint64_t seed = 1;
};

struct InitConfig {
  InitKind kind = InitKind::gaussian;
  std::uint64_t seed = 3;
};

struct GTConfig {
  GTParams params;
  bool tune = false;
  // Tuning range in units of 1/L1.
  double tune_lo = 1e-3;
  double tune_hi = 4.0;
  double tune_tol = 1e-6;
  int tune_budget = 200000;
};

struct OutputConfig {
  std::string label;
  std::string csv;   // trace path; empty disables
  std::string meta;  // sidecar JSON; defaults to csv with a .json extension
  std::string dump_dir;
  int dump_every = 0;  // state dump cadence in iterations; 0 disables
};

struct ExperimentConfig {
  ProblemConfig problem;
  GraphConfig graph;
  InitConfig init;
  Method method = Method::newton;
  AlgoParams newton;
  GTConfig gt;
  OutputConfig output;
  int repetitions = 1;

  void validate() const;
};

ExperimentConfig parse_config(IniDocument& doc);
ExperimentConfig parse_config_text(const std::string& text, const std::string& source = "<config>");
ExperimentConfig load_config(const std::string& path);

/// Canonical text form; parse_config_text(to_ini(c)) reproduces c.
std::string to_ini(const ExperimentConfig& c);
/// FNV-1a 64 over the canonical form without the [output] section, as 16 hex digits.
std::string fingerprint(const ExperimentConfig& c);
std::uint64_t fnv1a64(const std::string& bytes);

inline constexpr const char* kSeedEnv = "DNEWTON_SEED";

/// With DNEWTON_SEED=s set, problem/graph/init seeds become s, s+1, s+2.
/// Returns true if an override was applied.
bool apply_seed_override(ExperimentConfig& c);
/// Same, with an explicit value (testable without touching the environment).
void override_seeds(ExperimentConfig& c, std::uint64_t s);

/// Seeds of repetition r (r = 0 is the configured one).
ExperimentConfig repetition(const ExperimentConfig& c, int r);

}  // namespace dnewton::harness
