#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "support.hpp"

#include "dnewton/harness/compare.hpp"
#include "dnewton/harness/presets.hpp"
#include "dnewton/harness/problem_io.hpp"

using namespace dnewton;
using namespace dnewton::harness;
namespace fs = std::filesystem;

namespace {

std::string error_of(const std::string& text) {
  try {
    parse_config_text(text);
  } catch (const Error& e) {
    return e.what();
  }
  return "";
}

const char* kMinimal = R"([problem]
family = quadratic
n = 10
d = 30
kappa = 100

[algorithm]
method = newton
compressor = rank 3
m = 15
max_iters = 10
)";

std::string read_file(const std::string& path) {
  std::ifstream is(path);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

}  // namespace

TEST_SUITE("harness") {
  TEST_CASE("config text round trips") {
    for (const auto& preset : presets()) {
      for (const ExperimentConfig& c : preset.build("out")) {
        const std::string text = to_ini(c);
        const ExperimentConfig back = parse_config_text(text);
        CHECK(to_ini(back) == text);
        CHECK(fingerprint(back) == fingerprint(c));
      }
    }
    const ExperimentConfig c = parse_config_text(kMinimal);
    CHECK(c.newton.compressor.kind == CompressorKind::rank_k);
    CHECK(c.newton.compressor.K == 3);
    CHECK(c.newton.compressor.d == 30);
    CHECK(c.newton.m_at(0) == 15);
    CHECK(to_ini(parse_config_text(to_ini(c))) == to_ini(c));
  }

  TEST_CASE("config values are parsed") {
    const ExperimentConfig c = parse_config_text(std::string(kMinimal) + R"(alpha = ramp 0.1 1.2 0.9
gamma = 0.06  # trailing comment
cg_tol = 1e-8
local_phase_start = 40
divergence_threshold = 1e5
)");
    CHECK(c.newton.alpha.kind == StepSchedule::Kind::ramp);
    CHECK(c.newton.alpha.a == 0.1);
    CHECK(c.newton.alpha.r == 1.2);
    CHECK(c.newton.alpha.alpha_max == 0.9);
    CHECK(c.newton.gamma == 0.06);
    CHECK(c.newton.cg_tol == 1e-8);
    REQUIRE(c.newton.local_phase.has_value());
    CHECK(c.newton.local_phase->start == 40);
    CHECK(c.newton.divergence_threshold == 1e5);

    const ExperimentConfig k = parse_config_text(R"([problem]
family = logistic
[algorithm]
m = k
alpha = 0.5
compressor = top 20
)");
    CHECK(k.problem.n == 30);
    CHECK(k.problem.d == 20);
    CHECK(k.init.kind == InitKind::zero);
    CHECK(k.newton.rounds.kind == RoundsSchedule::Kind::iteration);
    CHECK(k.newton.alpha.kind == StepSchedule::Kind::constant);
    CHECK(k.newton.compressor.kind == CompressorKind::top_k);

    const ExperimentConfig g = parse_config_text(R"([algorithm]
method = gt
alpha = tune
m = 2
)");
    CHECK(g.method == Method::gt);
    CHECK(g.gt.tune);
    CHECK(g.gt.params.m == 2);
  }

  TEST_CASE("config errors name the line and field") {
    CHECK(error_of(std::string(kMinimal) + "bogus = 1\n") == "<config>:12: algorithm.bogus: unknown or inapplicable key");
    CHECK(error_of("[problem]\nn = ten\n").find("<config>:2: problem.n:") == 0);
    CHECK(error_of("[problem]\nkappa = 0.5\n").find("<config>:2: problem.kappa: must be >= 1") == 0);
    CHECK(error_of("[graph]\ntau = 1.5\n").find("<config>:2: graph.tau: must lie in (0,1]") == 0);
    CHECK(error_of("[algorithm]\ncompressor = svd 3\n").find("<config>:2: algorithm.compressor:") == 0);
    CHECK(error_of("[algorithm]\ncompressor = rank 40\n").find("[algorithm]") != std::string::npos);
    CHECK(error_of("[algorithm]\nalpha = fast\n").find("<config>:2: algorithm.alpha:") == 0);
    CHECK(error_of("[problem]\nn = 4\nn = 5\n").find("<config>:3:") == 0);
    CHECK(error_of("[problem]\njust words\n").find("<config>:2:") == 0);
    CHECK(error_of("[problem\n").find("<config>:1:") == 0);
    CHECK(error_of("[algorithm]\nmethod = gt\ncompressor = rank 3\n").find("algorithm.compressor") != std::string::npos);
    CHECK(error_of("[output]\ndump_every = 5\n").find("output.dump_dir") != std::string::npos);
    CHECK_THROWS_AS(load_config("/nonexistent/config.ini"), Error);
  }

  TEST_CASE("seeds, repetitions and fingerprints") {
    ExperimentConfig c = parse_config_text(kMinimal);
    const std::string base = fingerprint(c);
    CHECK(base.size() == 16);
    override_seeds(c, 40);
    CHECK(c.problem.seed == 40);
    CHECK(c.graph.seed == 41);
    CHECK(c.init.seed == 42);
    CHECK(fingerprint(c) != base);
    const ExperimentConfig r = repetition(c, 3);
    CHECK(r.problem.seed == 43);
    CHECK(r.graph.seed == 44);
    CHECK(r.init.seed == 45);
    ExperimentConfig labelled = c;
    labelled.output.label = "other";
    labelled.output.csv = "elsewhere.csv";
    CHECK(fingerprint(labelled) == fingerprint(c));
    CHECK(fnv1a64("") == 0xcbf29ce484222325ULL);
    CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cULL);

    ::setenv(kSeedEnv, "7", 1);
    ExperimentConfig env = parse_config_text(kMinimal);
    CHECK(apply_seed_override(env));
    CHECK(env.problem.seed == 7);
    ::setenv(kSeedEnv, "x7", 1);
    CHECK_THROWS_AS(apply_seed_override(env), Error);
    ::unsetenv(kSeedEnv);
    CHECK_FALSE(apply_seed_override(env));
    CHECK(repetition_path("out/a.csv", 0) == "out/a.csv");
    CHECK(repetition_path("out/a.csv", 2) == "out/a_rep2.csv");
  }

  TEST_CASE("problem files round trip") {
    const auto quad = make_quadratic(3, 4, 50, 5);
    std::stringstream qs;
    save_problem(qs, *quad);
    const auto qback = load_problem(qs);
    const auto* q2 = dynamic_cast<const QuadraticProblem<double>*>(qback.get());
    REQUIRE(q2 != nullptr);
    for (std::size_t i = 0; i < 3; ++i) {
      CHECK(q2->Q()[i] == quad->Q()[i]);
      CHECK(q2->p()[i] == quad->p()[i]);
    }
    CHECK(q2->seed() == quad->seed());

    const auto logit = make_logistic(2, 3, 5, 1e-3, 9);
    std::stringstream ls;
    save_problem(ls, *logit);
    const auto lback = load_problem(ls);
    const auto* l2 = dynamic_cast<const LogisticProblem<double>*>(lback.get());
    REQUIRE(l2 != nullptr);
    CHECK(l2->rho() == logit->rho());
    for (std::size_t i = 0; i < 2; ++i) {
      CHECK(l2->samples()[i] == logit->samples()[i]);
      CHECK(l2->labels()[i] == logit->labels()[i]);
    }

    std::stringstream bad("dnewton-problem 2\n");
    CHECK_THROWS_AS(load_problem(bad), Error);
    std::stringstream truncated(qs.str().substr(0, qs.str().size() / 2));
    CHECK_THROWS_AS(load_problem(truncated), Error);
  }

  TEST_CASE("file problems drive experiments") {
    const std::string dir = testing::scratch_dir("file_problem");
    const auto quad = make_quadratic(10, 30, 100, 2);
    save_problem(dir + "/q.txt", *quad);
    ExperimentConfig generated = parse_config_text(kMinimal);
    ExperimentConfig from_file = generated;
    from_file.problem.family = ProblemFamily::file;
    from_file.problem.path = dir + "/q.txt";
    const RunResult a = run_experiment(generated).front();
    const RunResult b = run_experiment(from_file).front();
    REQUIRE(a.trace.rows.size() == b.trace.rows.size());
    CHECK(a.trace.final_rel_err() == b.trace.final_rel_err());
  }

  TEST_CASE("trace CSV round trip") {
    Trace t;
    for (int k = 0; k < 3; ++k) {
      RoundMetrics r;
      r.iter = k;
      r.rel_err = std::pow(0.1, k) / 3;
      r.bits_cum = 1000 * k;
      r.fallback_count = k;
      r.wall_time = 0.25 * k;
      t.rows.push_back(r);
    }
    std::stringstream ss;
    write_csv(ss, t);
    CHECK(ss.str().substr(0, ss.str().find('\n')) == csv_header());
    CHECK(csv_header() ==
          "iter,rel_err,cons_x,track_g,track_H,err_E,diff_Htilde,u1,u2,u3,eps_k,delta_k,alpha_k,c_k,fallback_count,"
          "bits_cum,wall_time");
    const auto rows = read_csv(ss);
    REQUIRE(rows.size() == 3);
    for (int k = 0; k < 3; ++k) {
      CHECK(rows[static_cast<std::size_t>(k)].rel_err == t.rows[static_cast<std::size_t>(k)].rel_err);
      CHECK(rows[static_cast<std::size_t>(k)].bits_cum == 1000 * k);
    }
    std::stringstream broken("iter,rel_err\n1,2\n");
    CHECK_THROWS_AS(read_csv(broken), Error);
  }

  TEST_CASE("preset list") {
    std::vector<std::string> names;
    for (const auto& p : presets()) {
      names.push_back(p.name);
      CHECK_FALSE(p.description.empty());
    }
    const std::vector<std::string> expected = {"quad-kappa",      "gt-kappa",   "logit-topk",
                                               "logit-rank",      "alg-equivalence", "quad-settle"};
    CHECK(names == expected);
    CHECK_THROWS_AS(find_preset("nope"), Error);
    CHECK(find_preset("quad-kappa").build("o").size() == 9);
    const auto logit = find_preset("logit-topk").build("o");
    REQUIRE(logit.size() == 2);
    CHECK(logit[0].problem.n == 30);
    CHECK(logit[0].problem.d == 20);
    CHECK(logit[0].problem.samples == 100);
    CHECK(logit[0].problem.rho == 1e-3);
    CHECK(logit[0].newton.compressor.kind == CompressorKind::top_k);
    CHECK(logit[0].newton.compressor.K == 20);
    CHECK(logit[0].newton.gamma == 0.06);
    CHECK(logit[0].newton.alpha.a == 0.2);
    CHECK(logit[0].newton.M == 0);
    const auto rank = find_preset("logit-rank").build("o");
    CHECK(rank[0].newton.compressor.kind == CompressorKind::rank_k);
    CHECK(rank[0].newton.compressor.K == 3);
    CHECK(rank[0].newton.alpha.a == 0.1);
  }

  TEST_CASE("quad-kappa preset, comparison against gradient tracking") {
    const std::string dir = testing::scratch_dir("compare");
    const auto runs = run_preset("quad-kappa", dir);
    REQUIRE(runs.size() == 9);
    for (const auto& r : runs) {
      CHECK(fs::exists(r.csv_path));
      CHECK(fs::exists(r.meta_path));
      CHECK(r.exit_code() == 0);
      CHECK(read_file(r.csv_path).rfind(csv_header(), 0) == 0);
    }
    ExperimentConfig gt = find_preset("gt-kappa").build(dir).back();
    REQUIRE(gt.problem.kappa == 1e4);
    const RunResult gt_run_result = run_experiment(gt).front();
    CHECK(gt_run_result.gt_alpha > 0);

    const std::vector<std::string> traces = {dir + "/newton_kappa10000_m15.csv", dir + "/newton_kappa10000_m20.csv",
                                             gt_run_result.csv_path};
    const auto rows = compare(traces, 1e-6, dir + "/summary.csv");
    REQUIRE(rows.size() == traces.size());
    CHECK(rows[0].label == "newton_kappa10000_m15");
    CHECK(rows[2].method == "gt");
    CHECK(rows[1].bits_to_tol > rows[0].bits_to_tol);
    CHECK(rows[1].iterations_to_tol > 0);
    CHECK(rows[1].iterations_to_tol < rows[2].iterations_to_tol);

    const std::string summary = read_file(dir + "/summary.csv");
    CHECK(summary.rfind("label,method,final_rel_err,iterations,iterations_to_tol,bits_to_tol,wall_time\n", 0) == 0);
    CHECK(std::count(summary.begin(), summary.end(), '\n') == 4);

    CHECK_THROWS_AS(compare({traces[0]}, 1e-6, dir + "/one.csv"), Error);
    CHECK_THROWS_AS(compare({traces[0], dir + "/missing.csv"}, 1e-6, dir + "/two.csv"), Error);
  }

  TEST_CASE("repeated runs give identical traces") {
    const std::string dir = testing::scratch_dir("determinism");
    ExperimentConfig c = parse_config_text(kMinimal);
    c.repetitions = 2;
    c.output.csv = dir + "/a.csv";
    const auto first = run_experiment(c);
    REQUIRE(first.size() == 2);
    CHECK(fs::exists(dir + "/a_rep1.csv"));
    auto strip = [](const std::string& text) {
      std::stringstream in(text), out;
      std::string line;
      while (std::getline(in, line)) out << line.substr(0, line.rfind(',')) << '\n';
      return out.str();
    };
    const std::string once = strip(read_file(dir + "/a.csv"));
    run_experiment(c);
    CHECK(strip(read_file(dir + "/a.csv")) == once);
    CHECK(strip(read_file(dir + "/a_rep1.csv")) != once);
  }

  TEST_CASE("state dumps and caps report") {
    const std::string dir = testing::scratch_dir("dumps");
    ExperimentConfig c = parse_config_text(kMinimal);
    c.output.dump_dir = dir;
    c.output.dump_every = 5;
    c.output.label = "dumped";
    run_experiment(c);
    CHECK(fs::exists(dir + "/dumped_iter0.txt"));
    CHECK(fs::exists(dir + "/dumped_iter5.txt"));
    CHECK(fs::exists(dir + "/dumped_iter10.txt"));
    CHECK(read_file(dir + "/dumped_iter5.txt").find("# E 9") != std::string::npos);
    const std::string caps = caps_report(c);
    CHECK(caps.find("gamma   <=") != std::string::npos);
    CHECK(caps.find("fingerprint=" + fingerprint(c)) != std::string::npos);
  }
}
