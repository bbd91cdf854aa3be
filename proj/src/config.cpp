#include "dnewton/harness/config.hpp"

#include <cctype>
#include <charconv>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "dnewton/matrix_io.hpp"

namespace dnewton::harness {

namespace {

std::string trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

std::string strip_comment(const std::string& s) {
  const auto pos = s.find_first_of("#;");
  return pos == std::string::npos ? s : s.substr(0, pos);
}

std::vector<std::string> words(const std::string& s) {
  std::istringstream is(s);
  std::vector<std::string> out;
  std::string w;
  while (is >> w) out.push_back(w);
  return out;
}

bool valid_name(const std::string& s) {
  if (s.empty()) return false;
  for (char ch : s)
    if (!(std::isalnum(static_cast<unsigned char>(ch)) || ch == '_' || ch == '-' || ch == '.')) return false;
  return true;
}

}  // namespace

IniDocument IniDocument::parse(std::istream& is, const std::string& source) {
  IniDocument doc;
  doc.source_ = source;
  std::string raw, section;
  int lineno = 0;
  auto fail_line = [&](const std::string& what) {
    throw Error(source + ":" + std::to_string(lineno) + ": " + what);
  };
  while (std::getline(is, raw)) {
    ++lineno;
    const std::string line = trim(strip_comment(raw));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') fail_line("unterminated section header '" + line + "'");
      section = trim(line.substr(1, line.size() - 2));
      if (!valid_name(section)) fail_line("invalid section name '" + section + "'");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) fail_line("expected 'key = value', got '" + line + "'");
    if (section.empty()) fail_line("key outside of any section");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (!valid_name(key)) fail_line("invalid key '" + key + "'");
    auto& sec = doc.sections_[section];
    if (sec.count(key)) fail_line("duplicate key " + section + "." + key);
    sec[key] = Entry{value, lineno, false};
    doc.order_.emplace_back(section, key);
  }
  return doc;
}

IniDocument IniDocument::parse_text(const std::string& text, const std::string& source) {
  std::istringstream is(text);
  return parse(is, source);
}

IniDocument IniDocument::load(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw Error("cannot open config '" + path + "'");
  return parse(is, path);
}

bool IniDocument::has(const std::string& section, const std::string& key) const {
  const auto s = sections_.find(section);
  return s != sections_.end() && s->second.count(key) > 0;
}

const IniDocument::Entry* IniDocument::get(const std::string& section, const std::string& key) {
  const auto s = sections_.find(section);
  if (s == sections_.end()) return nullptr;
  const auto e = s->second.find(key);
  if (e == s->second.end()) return nullptr;
  e->second.used = true;
  return &e->second;
}

void IniDocument::reject_unused() const {
  for (const auto& [section, key] : order_) {
    const Entry& e = sections_.at(section).at(key);
    if (!e.used)
      throw Error(source_ + ":" + std::to_string(e.line) + ": " + section + "." + key + ": unknown or inapplicable key");
  }
}

void IniDocument::fail(const std::string& section, const std::string& key, const std::string& what) const {
  std::string where = source_;
  const auto s = sections_.find(section);
  if (s != sections_.end()) {
    const auto e = s->second.find(key);
    if (e != s->second.end()) where += ":" + std::to_string(e->second.line);
  }
  throw Error(where + ": " + section + "." + key + ": " + what);
}

std::string to_string(ProblemFamily f) {
  switch (f) {
    case ProblemFamily::quadratic: return "quadratic";
    case ProblemFamily::logistic: return "logistic";
    case ProblemFamily::file: return "file";
  }
  return "?";
}

std::string to_string(InitKind k) { return k == InitKind::gaussian ? "gaussian" : "zero"; }
std::string to_string(Method m) { return m == Method::newton ? "newton" : "gt"; }

namespace {

// Typed readers bound to one section of a document.
class Reader {
 public:
  Reader(IniDocument& doc, std::string section) : doc_(doc), section_(std::move(section)) {}

  const IniDocument::Entry* raw(const std::string& key) { return doc_.get(section_, key); }
  [[noreturn]] void fail(const std::string& key, const std::string& what) const { doc_.fail(section_, key, what); }

  void real(const std::string& key, double& out) {
    if (const auto* e = raw(key)) out = to_real(key, e->value);
  }
  void integer(const std::string& key, int& out) {
    if (const auto* e = raw(key)) {
      const long long v = to_integer(key, e->value);
      if (v < std::numeric_limits<int>::min() || v > std::numeric_limits<int>::max()) fail(key, "out of range");
      out = static_cast<int>(v);
    }
  }
  void seed(const std::string& key, std::uint64_t& out) {
    if (const auto* e = raw(key)) {
      std::uint64_t v = 0;
      const auto& s = e->value;
      const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
      if (ec != std::errc() || p != s.data() + s.size()) fail(key, "expected a nonnegative integer, got '" + s + "'");
      out = v;
    }
  }
  void text(const std::string& key, std::string& out) {
    if (const auto* e = raw(key)) out = e->value;
  }
  double to_real(const std::string& key, const std::string& s) const {
    double v = 0;
    const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size()) fail(key, "expected a number, got '" + s + "'");
    return v;
  }
  long long to_integer(const std::string& key, const std::string& s) const {
    long long v = 0;
    const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size()) fail(key, "expected an integer, got '" + s + "'");
    return v;
  }

 private:
  IniDocument& doc_;
  std::string section_;
};

StepSchedule parse_alpha(Reader& r, const std::string& key, const std::string& value) {
  const auto w = words(value);
  if (w.size() == 1) return StepSchedule::constant(r.to_real(key, w[0]));
  if (!w.empty() && w[0] == "constant" && w.size() == 2) return StepSchedule::constant(r.to_real(key, w[1]));
  if (!w.empty() && w[0] == "ramp" && (w.size() == 3 || w.size() == 4))
    return StepSchedule::ramp(r.to_real(key, w[1]), r.to_real(key, w[2]), w.size() == 4 ? r.to_real(key, w[3]) : 1.0);
  r.fail(key, "expected 'constant V', 'ramp A R [MAX]' or a number, got '" + value + "'");
}

CompressorSpec parse_compressor(Reader& r, const std::string& key, const std::string& value, int d) {
  const auto w = words(value);
  try {
    if (w.size() == 1 && parse_compressor_kind(w[0]) == CompressorKind::identity) return CompressorSpec::identity(d);
    if (w.size() == 2) {
      const auto kind = parse_compressor_kind(w[0]);
      const int K = static_cast<int>(r.to_integer(key, w[1]));
      if (kind == CompressorKind::rank_k) return CompressorSpec::rank(K, d);
      if (kind == CompressorKind::top_k) return CompressorSpec::top(K, d);
    }
  } catch (const Error& e) {
    if (std::string(e.what()).find("unknown compressor") != std::string::npos) r.fail(key, e.what());
    throw;
  }
  r.fail(key, "expected 'identity', 'rank K' or 'top K', got '" + value + "'");
}

}  // namespace

ExperimentConfig parse_config(IniDocument& doc) {
  ExperimentConfig c;

  Reader problem(doc, "problem");
  if (const auto* e = problem.raw("family")) {
    if (e->value == "quadratic") c.problem.family = ProblemFamily::quadratic;
    else if (e->value == "logistic") c.problem.family = ProblemFamily::logistic;
    else if (e->value == "file") c.problem.family = ProblemFamily::file;
    else problem.fail("family", "expected quadratic, logistic or file, got '" + e->value + "'");
  }
  if (c.problem.family == ProblemFamily::logistic) {
    c.problem.n = 30;
    c.problem.d = 20;
  }
  problem.integer("n", c.problem.n);
  problem.integer("d", c.problem.d);
  problem.seed("seed", c.problem.seed);
  switch (c.problem.family) {
    case ProblemFamily::quadratic:
      problem.real("kappa", c.problem.kappa);
      problem.real("heterogeneity", c.problem.heterogeneity);
      if (c.problem.kappa < 1) problem.fail("kappa", "must be >= 1");
      if (!(c.problem.heterogeneity >= 0 && c.problem.heterogeneity < 1)) problem.fail("heterogeneity", "must lie in [0,1)");
      break;
    case ProblemFamily::logistic:
      problem.real("rho", c.problem.rho);
      problem.integer("samples", c.problem.samples);
      if (!(c.problem.rho > 0)) problem.fail("rho", "must be > 0");
      if (c.problem.samples < 1) problem.fail("samples", "must be >= 1");
      break;
    case ProblemFamily::file:
      problem.text("path", c.problem.path);
      if (c.problem.path.empty()) problem.fail("path", "required when family = file");
      break;
  }
  if (c.problem.n < 2) problem.fail("n", "need at least 2 nodes");
  if (c.problem.d < 1) problem.fail("d", "must be >= 1");

  Reader graph(doc, "graph");
  graph.real("tau", c.graph.tau);
  graph.seed("seed", c.graph.seed);
  if (!(c.graph.tau > 0 && c.graph.tau <= 1)) graph.fail("tau", "must lie in (0,1]");

  Reader init(doc, "init");
  if (const auto* e = init.raw("x0")) {
    if (e->value == "gaussian") c.init.kind = InitKind::gaussian;
    else if (e->value == "zero") c.init.kind = InitKind::zero;
    else init.fail("x0", "expected gaussian or zero, got '" + e->value + "'");
  } else if (c.problem.family == ProblemFamily::logistic) {
    c.init.kind = InitKind::zero;
  }
  init.seed("seed", c.init.seed);

  Reader algo(doc, "algorithm");
  if (const auto* e = algo.raw("method")) {
    if (e->value == "newton") c.method = Method::newton;
    else if (e->value == "gt") c.method = Method::gt;
    else algo.fail("method", "expected newton or gt, got '" + e->value + "'");
  }
  if (c.method == Method::newton) {
    AlgoParams& p = c.newton;
    p.compressor = CompressorSpec::identity(c.problem.d);
    if (const auto* e = algo.raw("variant")) {
      if (e->value == "efficient") p.variant = Variant::efficient;
      else if (e->value == "reference") p.variant = Variant::reference;
      else algo.fail("variant", "expected efficient or reference, got '" + e->value + "'");
    }
    if (const auto* e = algo.raw("alpha")) p.alpha = parse_alpha(algo, "alpha", e->value);
    algo.real("gamma", p.gamma);
    if (const auto* e = algo.raw("m")) {
      if (e->value == "k") p.rounds = RoundsSchedule::per_iteration();
      else p.rounds = RoundsSchedule::fixed(static_cast<int>(algo.to_integer("m", e->value)));
    }
    algo.real("M", p.M);
    algo.real("cg_tol", p.cg_tol);
    if (const auto* e = algo.raw("compressor")) p.compressor = parse_compressor(algo, "compressor", e->value, c.problem.d);
    algo.integer("max_iters", p.max_iters);
    algo.real("stop_tol", p.stop_tol);
    algo.real("settle_tol", p.settle_tol);
    algo.real("divergence_threshold", p.divergence_threshold);
    if (doc.has("algorithm", "local_phase_start")) {
      LocalPhase lp;
      algo.integer("local_phase_start", lp.start);
      algo.real("local_phase_cg_tol", lp.cg_tol);
      if (lp.start < 0) algo.fail("local_phase_start", "must be >= 0");
      p.local_phase = lp;
    }
    try {
      p.validate();
    } catch (const Error& e) {
      throw Error(doc.source() + ": [algorithm]: " + e.what());
    }
  } else {
    GTConfig& g = c.gt;
    if (const auto* e = algo.raw("alpha")) {
      if (e->value == "tune") g.tune = true;
      else g.params.alpha = algo.to_real("alpha", e->value);
    }
    algo.integer("m", g.params.m);
    algo.integer("max_iters", g.params.max_iters);
    algo.real("stop_tol", g.params.stop_tol);
    algo.real("divergence_threshold", g.params.divergence_threshold);
    algo.real("tune_lo", g.tune_lo);
    algo.real("tune_hi", g.tune_hi);
    algo.real("tune_tol", g.tune_tol);
    algo.integer("tune_budget", g.tune_budget);
    if (g.tune && !(g.tune_lo > 0 && g.tune_hi > g.tune_lo)) algo.fail("tune_hi", "need 0 < tune_lo < tune_hi");
    try {
      g.params.validate();
    } catch (const Error& e) {
      throw Error(doc.source() + ": [algorithm]: " + e.what());
    }
  }

  Reader out(doc, "output");
  out.text("label", c.output.label);
  out.text("csv", c.output.csv);
  out.text("meta", c.output.meta);
  out.text("dump_dir", c.output.dump_dir);
  out.integer("dump_every", c.output.dump_every);
  if (c.output.dump_every < 0) out.fail("dump_every", "must be >= 0");
  if (c.output.dump_every > 0 && c.output.dump_dir.empty()) out.fail("dump_dir", "required when dump_every > 0");

  Reader reps(doc, "run");
  reps.integer("repetitions", c.repetitions);
  if (c.repetitions < 1) reps.fail("repetitions", "must be >= 1");

  doc.reject_unused();
  return c;
}

ExperimentConfig parse_config_text(const std::string& text, const std::string& source) {
  IniDocument doc = IniDocument::parse_text(text, source);
  return parse_config(doc);
}

ExperimentConfig load_config(const std::string& path) {
  IniDocument doc = IniDocument::load(path);
  return parse_config(doc);
}

void ExperimentConfig::validate() const {
  if (problem.n < 2) throw Error("config: problem.n must be >= 2");
  if (problem.d < 1) throw Error("config: problem.d must be >= 1");
  if (!(graph.tau > 0 && graph.tau <= 1)) throw Error("config: graph.tau must lie in (0,1]");
  if (repetitions < 1) throw Error("config: run.repetitions must be >= 1");
  if (method == Method::newton) {
    AlgoParams p = newton;
    if (problem.family != ProblemFamily::file && p.compressor.d != problem.d)
      throw Error("config: compressor dimension does not match problem.d");
    p.validate();
  } else {
    gt.params.validate();
  }
}

namespace {

std::string schedule_text(const StepSchedule& s) {
  if (s.kind == StepSchedule::Kind::constant) return "constant " + format_real(s.value);
  return "ramp " + format_real(s.a) + " " + format_real(s.r) + " " + format_real(s.alpha_max);
}

std::string compressor_text(const CompressorSpec& c) {
  switch (c.kind) {
    case CompressorKind::identity: return "identity";
    case CompressorKind::rank_k: return "rank " + std::to_string(c.K);
    case CompressorKind::top_k: return "top " + std::to_string(c.K);
  }
  return "?";
}

void write_body(std::ostream& os, const ExperimentConfig& c) {
  os << "[problem]\n";
  os << "family = " << to_string(c.problem.family) << '\n';
  os << "n = " << c.problem.n << '\n';
  os << "d = " << c.problem.d << '\n';
  os << "seed = " << c.problem.seed << '\n';
  switch (c.problem.family) {
    case ProblemFamily::quadratic:
      os << "kappa = " << format_real(c.problem.kappa) << '\n';
      os << "heterogeneity = " << format_real(c.problem.heterogeneity) << '\n';
      break;
    case ProblemFamily::logistic:
      os << "rho = " << format_real(c.problem.rho) << '\n';
      os << "samples = " << c.problem.samples << '\n';
      break;
    case ProblemFamily::file: os << "path = " << c.problem.path << '\n'; break;
  }
  os << "\n[graph]\n";
  os << "tau = " << format_real(c.graph.tau) << '\n';
  os << "seed = " << c.graph.seed << '\n';
  os << "\n[init]\n";
  os << "x0 = " << to_string(c.init.kind) << '\n';
  os << "seed = " << c.init.seed << '\n';
  os << "\n[algorithm]\n";
  os << "method = " << to_string(c.method) << '\n';
  if (c.method == Method::newton) {
    const AlgoParams& p = c.newton;
    os << "variant = " << (p.variant == Variant::efficient ? "efficient" : "reference") << '\n';
    os << "alpha = " << schedule_text(p.alpha) << '\n';
    os << "gamma = " << format_real(p.gamma) << '\n';
    os << "m = " << (p.rounds.kind == RoundsSchedule::Kind::iteration ? std::string("k") : std::to_string(p.rounds.m))
       << '\n';
    os << "M = " << format_real(p.M) << '\n';
    os << "cg_tol = " << format_real(p.cg_tol) << '\n';
    os << "compressor = " << compressor_text(p.compressor) << '\n';
    os << "max_iters = " << p.max_iters << '\n';
    os << "stop_tol = " << format_real(p.stop_tol) << '\n';
    os << "settle_tol = " << format_real(p.settle_tol) << '\n';
    os << "divergence_threshold = " << format_real(p.divergence_threshold) << '\n';
    if (p.local_phase) {
      os << "local_phase_start = " << p.local_phase->start << '\n';
      os << "local_phase_cg_tol = " << format_real(p.local_phase->cg_tol) << '\n';
    }
  } else {
    const GTConfig& g = c.gt;
    os << "alpha = " << (g.tune ? std::string("tune") : format_real(g.params.alpha)) << '\n';
    os << "m = " << g.params.m << '\n';
    os << "max_iters = " << g.params.max_iters << '\n';
    os << "stop_tol = " << format_real(g.params.stop_tol) << '\n';
    os << "divergence_threshold = " << format_real(g.params.divergence_threshold) << '\n';
    if (g.tune) {
      os << "tune_lo = " << format_real(g.tune_lo) << '\n';
      os << "tune_hi = " << format_real(g.tune_hi) << '\n';
      os << "tune_tol = " << format_real(g.tune_tol) << '\n';
      os << "tune_budget = " << g.tune_budget << '\n';
    }
  }
  os << "\n[run]\n";
  os << "repetitions = " << c.repetitions << '\n';
}

}  // namespace

std::string to_ini(const ExperimentConfig& c) {
  std::ostringstream os;
  write_body(os, c);
  os << "\n[output]\n";
  if (!c.output.label.empty()) os << "label = " << c.output.label << '\n';
  if (!c.output.csv.empty()) os << "csv = " << c.output.csv << '\n';
  if (!c.output.meta.empty()) os << "meta = " << c.output.meta << '\n';
  if (!c.output.dump_dir.empty()) os << "dump_dir = " << c.output.dump_dir << '\n';
  os << "dump_every = " << c.output.dump_every << '\n';
  return os.str();
}

std::uint64_t fnv1a64(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : bytes) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string fingerprint(const ExperimentConfig& c) {
  std::ostringstream body;
  write_body(body, c);
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << fnv1a64(body.str());
  return os.str();
}

void override_seeds(ExperimentConfig& c, std::uint64_t s) {
  c.problem.seed = s;
  c.graph.seed = s + 1;
  c.init.seed = s + 2;
}

bool apply_seed_override(ExperimentConfig& c) {
  const char* v = std::getenv(kSeedEnv);
  if (!v || !*v) return false;
  std::uint64_t s = 0;
  const std::string text(v);
  const auto [p, ec] = std::from_chars(text.data(), text.data() + text.size(), s);
  if (ec != std::errc() || p != text.data() + text.size())
    throw Error(std::string(kSeedEnv) + ": expected a nonnegative integer, got '" + text + "'");
  override_seeds(c, s);
  return true;
}

ExperimentConfig repetition(const ExperimentConfig& c, int r) {
  ExperimentConfig out = c;
  const auto step = static_cast<std::uint64_t>(r);
  out.problem.seed += step;
  out.graph.seed += step;
  out.init.seed += step;
  return out;
}

}  // namespace dnewton::harness
