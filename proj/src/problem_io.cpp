#include "dnewton/harness/problem_io.hpp"

#include <fstream>
#include <sstream>

#include "dnewton/matrix_io.hpp"

namespace dnewton::harness {

namespace {

constexpr const char* kMagic = "dnewton-problem 1";

void write_block(std::ostream& os, const std::string& name, Index i, const Matrix<double>& m) {
  os << name << ' ' << i << '\n';
  write_matrix(os, m);
  os << '\n';
}

class Scanner {
 public:
  explicit Scanner(std::istream& is) : is_(is) {}

  std::string next_line() {
    std::string line;
    while (std::getline(is_, line)) {
      ++lineno_;
      if (line.find_first_not_of(" \t\r") != std::string::npos) return line;
    }
    fail("unexpected end of input");
  }

  // "<key> <value>"
  std::string field(const std::string& key) {
    const std::string line = next_line();
    std::istringstream ls(line);
    std::string k, v;
    ls >> k >> v;
    if (k != key || v.empty()) fail("expected '" + key + " <value>', got '" + line + "'");
    return v;
  }

  Matrix<double> block(const std::string& name, Index i, Index rows, Index cols) {
    const std::string header = next_line();
    if (header != name + " " + std::to_string(i)) fail("expected block '" + name + " " + std::to_string(i) + "'");
    Matrix<double> m;
    try {
      m = read_matrix(is_, rows);
    } catch (const Error& e) {
      fail(std::string("block '") + name + " " + std::to_string(i) + "': " + e.what());
    }
    lineno_ += static_cast<int>(m.rows()) + (rows < 0 ? 1 : 0);
    if (m.cols() != cols)
      fail("block '" + name + " " + std::to_string(i) + "' has " + std::to_string(m.cols()) + " columns, expected " +
           std::to_string(cols));
    return m;
  }

  [[noreturn]] void fail(const std::string& what) const {
    throw Error("load_problem: line " + std::to_string(lineno_) + ": " + what);
  }

  template <typename T>
  T number(const std::string& key) {
    const std::string v = field(key);
    std::istringstream ls(v);
    T out{};
    if (!(ls >> out) || !ls.eof()) fail("malformed value for '" + key + "'");
    return out;
  }

 private:
  std::istream& is_;
  int lineno_ = 0;
};

}  // namespace

void save_problem(std::ostream& os, const Problem<double>& problem) {
  const Index n = problem.n(), d = problem.d();
  os << kMagic << '\n';
  os << "family " << problem.family() << '\n';
  os << "n " << n << "\nd " << d << "\nseed " << problem.seed() << '\n';
  if (const auto* q = dynamic_cast<const QuadraticProblem<double>*>(&problem)) {
    os << '\n';
    for (Index i = 0; i < n; ++i) {
      write_block(os, "Q", i, q->Q()[static_cast<std::size_t>(i)]);
      write_block(os, "p", i, q->p()[static_cast<std::size_t>(i)].transpose());
    }
  } else if (const auto* l = dynamic_cast<const LogisticProblem<double>*>(&problem)) {
    os << "rho " << format_real(l->rho()) << "\n\n";
    for (Index i = 0; i < n; ++i) {
      write_block(os, "samples", i, l->samples()[static_cast<std::size_t>(i)]);
      write_block(os, "labels", i, l->labels()[static_cast<std::size_t>(i)].transpose());
    }
  } else {
    throw Error("save_problem: unsupported problem family '" + problem.family() + "'");
  }
  if (!os) throw Error("save_problem: write failed");
}

void save_problem(const std::string& path, const Problem<double>& problem) {
  std::ofstream os(path);
  if (!os) throw Error("cannot open '" + path + "' for writing");
  save_problem(os, problem);
}

std::unique_ptr<Problem<double>> load_problem(std::istream& is) {
  Scanner sc(is);
  if (sc.next_line() != kMagic) sc.fail("not a problem file (missing '" + std::string(kMagic) + "' header)");
  const std::string family = sc.field("family");
  const auto n = sc.number<long long>("n");
  const auto d = sc.number<long long>("d");
  const auto seed = sc.number<std::uint64_t>("seed");
  if (n < 1 || d < 1) sc.fail("n and d must be >= 1");
  if (family == "quadratic") {
    std::vector<Matrix<double>> Q;
    std::vector<Vector<double>> p;
    for (Index i = 0; i < n; ++i) {
      Q.push_back(sc.block("Q", i, d, d));
      p.push_back(sc.block("p", i, 1, d).row(0).transpose());
    }
    return std::make_unique<QuadraticProblem<double>>(std::move(Q), std::move(p), seed);
  }
  if (family == "logistic") {
    const auto rho = sc.number<double>("rho");
    std::vector<Matrix<double>> samples;
    std::vector<Vector<double>> labels;
    for (Index i = 0; i < n; ++i) {
      Matrix<double> o = sc.block("samples", i, -1, d);
      Matrix<double> t = sc.block("labels", i, 1, o.rows());
      for (Index j = 0; j < t.cols(); ++j)
        if (t(0, j) != 1.0 && t(0, j) != -1.0) sc.fail("labels must be +1 or -1");
      samples.push_back(std::move(o));
      labels.push_back(t.row(0).transpose());
    }
    return std::make_unique<LogisticProblem<double>>(std::move(samples), std::move(labels), rho, seed);
  }
  sc.fail("unknown family '" + family + "'");
}

std::unique_ptr<Problem<double>> load_problem(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw Error("cannot open problem file '" + path + "'");
  return load_problem(is);
}

}  // namespace dnewton::harness
