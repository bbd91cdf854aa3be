#include "dnewton/harness/presets.hpp"

#include <filesystem>

namespace dnewton::harness {

namespace {

std::string csv_in(const std::string& dir, const std::string& label) {
  return (std::filesystem::path(dir) / (label + ".csv")).string();
}

ExperimentConfig quadratic_base(double kappa) {
  ExperimentConfig c;
  c.problem.family = ProblemFamily::quadratic;
  c.problem.n = 10;
  c.problem.d = 30;
  c.problem.kappa = kappa;
  c.graph.tau = 0.2;
  c.init.kind = InitKind::gaussian;
  return c;
}

AlgoParams quadratic_newton(int d) {
  AlgoParams p;
  p.alpha = StepSchedule::ramp(0.02, 1.1);
  p.gamma = 0.03;
  p.M = 0;
  p.cg_tol = 1e-10;
  p.compressor = CompressorSpec::rank(3, d);
  p.max_iters = 2000;
  p.stop_tol = 1e-20;
  return p;
}

ExperimentConfig logistic_base() {
  ExperimentConfig c;
  c.problem.family = ProblemFamily::logistic;
  c.problem.n = 30;
  c.problem.d = 20;
  c.problem.samples = 100;
  c.problem.rho = 1e-3;
  c.graph.tau = 0.2;
  c.init.kind = InitKind::zero;
  return c;
}

std::string kappa_tag(double kappa) { return "kappa" + std::to_string(static_cast<long long>(kappa)); }

const double kKappas[] = {10.0, 100.0, 10000.0};

std::vector<ExperimentConfig> quad_kappa(const std::string& dir) {
  std::vector<ExperimentConfig> out;
  for (double kappa : kKappas) {
    for (int m : {15, 20, 0}) {
      ExperimentConfig c = quadratic_base(kappa);
      c.newton = quadratic_newton(c.problem.d);
      c.newton.rounds = m > 0 ? RoundsSchedule::fixed(m) : RoundsSchedule::per_iteration();
      c.output.label = "newton_" + kappa_tag(kappa) + (m > 0 ? "_m" + std::to_string(m) : std::string("_mk"));
      c.output.csv = csv_in(dir, c.output.label);
      out.push_back(c);
    }
  }
  return out;
}

std::vector<ExperimentConfig> gt_kappa(const std::string& dir) {
  std::vector<ExperimentConfig> out;
  for (double kappa : kKappas) {
    ExperimentConfig c = quadratic_base(kappa);
    c.method = Method::gt;
    c.gt.tune = true;
    c.gt.tune_tol = 1e-6;
    c.gt.tune_budget = 200000;
    c.gt.params.m = 1;
    c.gt.params.max_iters = 200000;
    c.gt.params.stop_tol = 1e-8;
    c.output.label = "gt_" + kappa_tag(kappa);
    c.output.csv = csv_in(dir, c.output.label);
    out.push_back(c);
  }
  return out;
}

std::vector<ExperimentConfig> logistic(const std::string& dir, const CompressorSpec& q, double a,
                                       const std::string& tag) {
  std::vector<ExperimentConfig> out;
  for (int m : {5, 10}) {
    ExperimentConfig c = logistic_base();
    AlgoParams& p = c.newton;
    p.alpha = StepSchedule::ramp(a, 1.1);
    p.gamma = 0.06;
    p.M = 0;
    p.cg_tol = 1e-10;
    p.compressor = q;
    p.rounds = RoundsSchedule::fixed(m);
    p.max_iters = 4000;
    p.stop_tol = 1e-14;
    p.settle_tol = 1e-7;
    c.output.label = "newton_" + tag + "_m" + std::to_string(m);
    c.output.csv = csv_in(dir, c.output.label);
    out.push_back(c);
  }
  return out;
}

std::vector<ExperimentConfig> logit_topk(const std::string& dir) {
  return logistic(dir, CompressorSpec::top(20, 20), 0.2, "top20");
}

std::vector<ExperimentConfig> logit_rank(const std::string& dir) {
  return logistic(dir, CompressorSpec::rank(3, 20), 0.1, "rank3");
}

std::vector<ExperimentConfig> alg_equivalence(const std::string& dir) {
  std::vector<ExperimentConfig> out;
  for (Variant v : {Variant::reference, Variant::efficient}) {
    ExperimentConfig c = quadratic_base(100.0);
    c.newton = quadratic_newton(c.problem.d);
    c.newton.rounds = RoundsSchedule::fixed(15);
    c.newton.max_iters = 200;
    c.newton.stop_tol = 0;
    c.newton.variant = v;
    c.output.label = std::string("newton_") + (v == Variant::reference ? "reference" : "efficient");
    c.output.csv = csv_in(dir, c.output.label);
    out.push_back(c);
  }
  return out;
}

std::vector<ExperimentConfig> quad_settle(const std::string& dir) {
  ExperimentConfig c = quadratic_base(10.0);
  c.newton = quadratic_newton(c.problem.d);
  c.newton.rounds = RoundsSchedule::fixed(20);
  c.newton.max_iters = 15000;
  c.newton.stop_tol = 1e-20;
  c.newton.settle_tol = 1e-7;
  c.output.label = "newton_kappa10_m20_settle";
  c.output.csv = csv_in(dir, c.output.label);
  return {c};
}

}  // namespace

const std::vector<Preset>& presets() {
  static const std::vector<Preset> all = {
      {"quad-kappa", "quadratic, n=10 d=30, kappa in {10,1e2,1e4} x m in {15,20,k}, Rank-3 (9 runs)", &quad_kappa},
      {"gt-kappa", "gradient tracking with tuned step on the quad-kappa instances (3 runs)", &gt_kappa},
      {"logit-topk", "logistic regression, n=30 d=20, Top-20, gamma=0.06, m in {5,10} (2 runs)", &logit_topk},
      {"logit-rank", "logistic regression, n=30 d=20, Rank-3, gamma=0.06, m in {5,10} (2 runs)", &logit_rank},
      {"alg-equivalence", "reference vs communication-efficient variant, 200 iterations, kappa=1e2 (2 runs)",
       &alg_equivalence},
      {"quad-settle", "quadratic kappa=10, m=20, Rank-3, run until the compression state settles (1 run)",
       &quad_settle},
  };
  return all;
}

const Preset& find_preset(const std::string& name) {
  for (const auto& p : presets())
    if (p.name == name) return p;
  std::string known;
  for (const auto& p : presets()) known += (known.empty() ? "" : ", ") + p.name;
  throw Error("unknown preset '" + name + "' (known: " + known + ")");
}

std::vector<RunResult> run_preset(const std::string& name, const std::string& out_dir,
                                  const RunObserver<double>& observer) {
  const Preset& p = find_preset(name);
  std::vector<RunResult> out;
  for (ExperimentConfig c : p.build(out_dir)) {
    apply_seed_override(c);
    auto rs = run_experiment(c, observer);
    out.insert(out.end(), std::make_move_iterator(rs.begin()), std::make_move_iterator(rs.end()));
  }
  return out;
}

}  // namespace dnewton::harness
