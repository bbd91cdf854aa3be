#include "dnewton/harness/experiment.hpp"

#include <filesystem>
#include <fstream>
#include <random>

#include "json.hpp"

#include "dnewton/harness/problem_io.hpp"
#include "dnewton/matrix_io.hpp"

namespace dnewton::harness {

namespace fs = std::filesystem;

namespace {

std::unique_ptr<Problem<double>> make_problem(const ProblemConfig& p) {
  switch (p.family) {
    case ProblemFamily::quadratic: return make_quadratic<double>(p.n, p.d, p.kappa, p.seed, p.heterogeneity);
    case ProblemFamily::logistic: return make_logistic<double>(p.n, p.d, p.samples, p.rho, p.seed);
    case ProblemFamily::file: return load_problem(p.path);
  }
  throw Error("unknown problem family");
}

void ensure_parent(const std::string& path) {
  const fs::path parent = fs::path(path).parent_path();
  if (!parent.empty()) fs::create_directories(parent);
}

std::string default_meta_path(const std::string& csv) {
  fs::path p(csv);
  p.replace_extension(".json");
  return p.string();
}

void write_meta(const std::string& path, const ExperimentConfig& c, const Instance& inst, const RunResult& r) {
  const ProblemConstants k = inst.problem->constants();
  nlohmann::ordered_json j;
  j["label"] = r.label;
  j["fingerprint"] = r.fingerprint;
  j["method"] = to_string(c.method);
  j["status"] = to_string(r.trace.status);
  j["message"] = r.trace.message;
  j["iterations"] = r.trace.iterations();
  j["final_rel_err"] = r.trace.final_rel_err();
  j["csv"] = r.csv_path;
  j["sigma"] = inst.mixing.sigma;
  j["edges"] = inst.topology.edges.size();
  j["constants"] = {{"L1", k.L1}, {"L2", k.L2}, {"mu", k.mu}, {"kappa", k.kappa()}};
  j["oracle_gradient_norm"] = inst.oracle.gradient_norm;
  if (c.method == Method::gt) j["gt_alpha"] = r.gt_alpha;
  j["config"] = to_ini(c);
  ensure_parent(path);
  std::ofstream os(path);
  if (!os) throw Error("cannot open '" + path + "' for writing");
  os << j.dump(2) << '\n';
  if (!os) throw Error("write to '" + path + "' failed");
}

}  // namespace

Instance build_instance(const ExperimentConfig& c) {
  Instance inst;
  inst.problem = make_problem(c.problem);
  const Index n = inst.problem->n(), d = inst.problem->d();
  inst.topology = generate_topology(static_cast<int>(n), c.graph.tau, c.graph.seed);
  inst.mixing = metropolis_weights<double>(inst.topology);
  inst.x0 = NodeVectors<double>::Zero(d, n);
  if (c.init.kind == InitKind::gaussian) {
    std::mt19937_64 rng(c.init.seed);
    std::normal_distribution<double> normal;
    for (Index j = 0; j < n; ++j)
      for (Index i = 0; i < d; ++i) inst.x0(i, j) = normal(rng);
  }
  inst.oracle = centralized_solve(*inst.problem, 1e-12);
  return inst;
}

void dump_state(const std::string& path, const NetworkState<double>& s) {
  ensure_parent(path);
  std::ofstream os(path);
  if (!os) throw Error("cannot open '" + path + "' for writing");
  os << "# iteration " << s.k << "\n# x (column i = node i)\n";
  write_matrix(os, s.x);
  os << "\n# g\n";
  write_matrix(os, s.g);
  auto blocks = [&](const char* name, const NodeMatrices<double>& m) {
    for (std::size_t i = 0; i < m.size(); ++i) {
      os << "\n# " << name << ' ' << i << '\n';
      write_matrix(os, m[i]);
    }
  };
  blocks("H", s.H);
  blocks("H_tilde", s.H_tilde);
  blocks("E", s.E);
  if (!os) throw Error("write to '" + path + "' failed");
}

RunResult run_on(const ExperimentConfig& c, const Instance& inst, const RunObserver<double>& observer) {
  RunResult r;
  r.label = c.output.label.empty() ? to_string(c.method) : c.output.label;
  r.fingerprint = fingerprint(c);

  RunObserver<double> watch = observer;
  if (c.output.dump_every > 0) {
    const int every = c.output.dump_every;
    const std::string dir = c.output.dump_dir, label = r.label;
    watch = [observer, every, dir, label](const NetworkState<double>& s, const RoundMetrics& row) {
      if (row.iter % every == 0)
        dump_state((fs::path(dir) / (label + "_iter" + std::to_string(row.iter) + ".txt")).string(), s);
      return observer ? observer(s, row) : true;
    };
  }

  if (c.method == Method::newton) {
    AlgoParams p = c.newton;
    p.compressor.d = static_cast<int>(inst.problem->d());
    r.trace = run(*inst.problem, inst.mixing, p, inst.x0, inst.oracle.x, watch);
  } else {
    GTParams p = c.gt.params;
    if (c.gt.tune) {
      const double L1 = inst.problem->constants().L1;
      const TunedStep t = tune_gt_step(*inst.problem, inst.mixing, p.m, inst.x0, inst.oracle.x, c.gt.tune_tol,
                                       c.gt.tune_budget, c.gt.tune_lo / L1, c.gt.tune_hi / L1);
      if (t.iterations < 0)
        throw Error("gt step tuning: no step in the search range reached rel_err " + format_real(c.gt.tune_tol) +
                    " within " + std::to_string(c.gt.tune_budget) + " iterations");
      p.alpha = t.alpha;
    }
    r.gt_alpha = p.alpha;
    r.trace = gt_run(*inst.problem, inst.mixing, p, inst.x0, inst.oracle.x, watch);
  }
  r.trace.fingerprint = r.fingerprint;

  if (!c.output.csv.empty()) {
    r.csv_path = c.output.csv;
    ensure_parent(r.csv_path);
    write_csv(r.csv_path, r.trace);
    r.meta_path = c.output.meta.empty() ? default_meta_path(r.csv_path) : c.output.meta;
    write_meta(r.meta_path, c, inst, r);
  }
  return r;
}

std::string repetition_path(const std::string& path, int r) {
  if (r == 0 || path.empty()) return path;
  fs::path p(path);
  const std::string ext = p.extension().string();
  p.replace_filename(p.stem().string() + "_rep" + std::to_string(r) + ext);
  return p.string();
}

std::vector<RunResult> run_experiment(const ExperimentConfig& c, const RunObserver<double>& observer) {
  c.validate();
  std::vector<RunResult> out;
  for (int rep = 0; rep < c.repetitions; ++rep) {
    ExperimentConfig rc = repetition(c, rep);
    rc.repetitions = 1;
    rc.output.csv = repetition_path(c.output.csv, rep);
    rc.output.meta = repetition_path(c.output.meta, rep);
    if (rep > 0 && !rc.output.label.empty()) rc.output.label += "_rep" + std::to_string(rep);
    const Instance inst = build_instance(rc);
    out.push_back(run_on(rc, inst, observer));
  }
  return out;
}

std::string caps_report(const ExperimentConfig& c) {
  c.validate();
  const Instance inst = build_instance(c);
  const int m = c.method == Method::newton ? c.newton.m_at(0) : c.gt.params.m;
  const double delta = c.method == Method::newton ? delta_bound(c.newton.compressor) : 1.0;
  const NetworkState<double> s0 = init_state(*inst.problem, inst.x0, true);
  const double gamma = c.method == Method::newton ? c.newton.gamma : -1.0;
  const TheoreticalCaps caps = theoretical_caps(*inst.problem, inst.mixing.sigma, m, delta, s0, inst.oracle.x, gamma);
  std::string head = "instance:   " + to_string(c.problem.family) + "  n=" + std::to_string(inst.problem->n()) +
                     "  d=" + std::to_string(inst.problem->d()) + "  edges=" +
                     std::to_string(inst.topology.edges.size()) + "  fingerprint=" + fingerprint(c) + "\n";
  return head + to_text(caps);
}

}  // namespace dnewton::harness
