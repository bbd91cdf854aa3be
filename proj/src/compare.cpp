#include "dnewton/harness/compare.hpp"

#include <filesystem>
#include <fstream>

#include "json.hpp"

#include "dnewton/matrix_io.hpp"
#include "dnewton/trace.hpp"

namespace dnewton::harness {

namespace fs = std::filesystem;

std::vector<SummaryRow> summarize(const std::vector<std::string>& trace_paths, double tol) {
  std::vector<SummaryRow> out;
  for (const auto& path : trace_paths) {
    if (!fs::exists(path)) throw Error("compare: missing trace '" + path + "'");
    Trace t;
    t.rows = read_csv(path);
    if (t.rows.empty()) throw Error("compare: trace '" + path + "' has no rows");

    SummaryRow r;
    r.label = fs::path(path).stem().string();
    r.method = r.label.rfind("gt", 0) == 0 ? "gt" : "newton";
    fs::path meta = path;
    meta.replace_extension(".json");
    if (fs::exists(meta)) {
      std::ifstream is(meta);
      try {
        const auto j = nlohmann::json::parse(is);
        r.label = j.value("label", r.label);
        r.method = j.value("method", r.method);
      } catch (const nlohmann::json::exception& e) {
        throw Error("compare: malformed sidecar '" + meta.string() + "': " + e.what());
      }
    }
    r.final_rel_err = t.final_rel_err();
    r.iterations = t.iterations();
    r.iterations_to_tol = t.iterations_to(tol);
    r.bits_to_tol = t.bits_to(tol);
    r.wall_time = t.rows.back().wall_time;
    out.push_back(r);
  }
  return out;
}

void write_summary(std::ostream& os, const std::vector<SummaryRow>& rows) {
  os << "label,method,final_rel_err,iterations,iterations_to_tol,bits_to_tol,wall_time\n";
  for (const auto& r : rows)
    os << r.label << ',' << r.method << ',' << format_real(r.final_rel_err) << ',' << r.iterations << ','
       << r.iterations_to_tol << ',' << r.bits_to_tol << ',' << format_real(r.wall_time) << '\n';
}

std::vector<SummaryRow> compare(const std::vector<std::string>& trace_paths, double tol, const std::string& out_path) {
  if (trace_paths.size() < 2) throw Error("compare: need at least two traces");
  auto rows = summarize(trace_paths, tol);
  const fs::path parent = fs::path(out_path).parent_path();
  if (!parent.empty()) fs::create_directories(parent);
  std::ofstream os(out_path);
  if (!os) throw Error("cannot open '" + out_path + "' for writing");
  write_summary(os, rows);
  if (!os) throw Error("write to '" + out_path + "' failed");
  return rows;
}

}  // namespace dnewton::harness
