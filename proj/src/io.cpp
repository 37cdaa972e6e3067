#include "qclt/io.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "qclt/errors.hpp"

namespace qclt::io {

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open for reading: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  if (in.bad()) throw IoError("read failed: " + path);
  return buf.str();
}

void write_text_file(const std::string& path, const std::string& text) {
  const std::filesystem::path p(path);
  std::error_code ec;
  if (p.has_parent_path())
    std::filesystem::create_directories(p.parent_path(), ec);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open for writing: " + path);
  out << text;
  out.flush();
  if (!out) throw IoError("write failed: " + path);
}

// ----------------------------------------------------------- kernel shapes

Json kernel_json(const MarkovKernel& kernel) {
  Json j;
  j["states"] = kernel.labels();
  Json rows = Json::array();
  for (const auto& row : kernel.rows()) rows.push_back(row);
  j["rows"] = std::move(rows);
  return j;
}

MarkovKernel kernel_from_json(const Json& j) {
  if (!j.is_object() || !j.contains("rows") || !j["rows"].is_array())
    throw ConfigError("kernel document needs a \"rows\" array");
  Matrix rows;
  for (const auto& row : j["rows"]) {
    if (!row.is_array()) throw ConfigError("kernel rows must be arrays");
    rows.push_back(row.get<std::vector<double>>());
  }
  std::vector<std::string> labels;
  if (j.contains("states")) {
    if (!j["states"].is_array())
      throw ConfigError("kernel \"states\" must be an array of labels");
    labels = j["states"].get<std::vector<std::string>>();
  }
  return build_kernel(rows, std::move(labels));
}

Json ergodicity_json(const ErgodicityReport& report) {
  Json j;
  j["irreducible"] = report.irreducible;
  j["period"] = report.period;
  j["ergodic"] = report.ergodic;
  j["spectral_gap"] = report.spectral_gap;
  j["gap_is_bound"] = report.gap_is_bound;
  j["classes"] = report.classes;
  return j;
}

Json observable_json(const std::vector<double>& values) {
  return Json(values);
}

std::vector<double> doubles_from_json(const Json& j) {
  if (!j.is_array()) throw ConfigError("expected a JSON array of numbers");
  for (const auto& v : j)
    if (!v.is_number()) throw ConfigError("expected a JSON array of numbers");
  return j.get<std::vector<double>>();
}

// ----------------------------------------------------------- report shapes

Json condition_report_json(const ConditionReport& report) {
  Json j;
  j["condition"] = condition_name(report.condition_id);
  j["verdict"] = verdict_name(report.verdict);
  Json seq = Json::array();
  for (const auto& [index, value] : report.sequence)
    seq.push_back(Json::array({index, value}));
  j["sequence"] = std::move(seq);
  j["tolerances"] = report.tolerances;
  j["values"] = report.values;
  j["note"] = report.note;
  return j;
}

Json variance_report_json(const VarianceReport& report) {
  Json j;
  j["sigma_sq"] = report.sigma_sq;
  j["second_moment"] = report.second_moment;
  j["series_terms"] = report.series_terms;
  j["truncation_j"] = report.truncation_j;
  j["tail_bound"] = report.tail_bound;
  j["clamped"] = report.clamped;
  return j;
}

Json bound_check_json(const BoundCheck& check) {
  Json j;
  j["lhs"] = check.lhs;
  j["rhs"] = check.rhs;
  j["holds"] = check.holds;
  return j;
}

Json rio_bound_json(const RioBoundCheck& check) {
  Json j;
  j["exact"] = check.exact;
  j["n"] = check.n;
  j["lhs"] = check.lhs;
  j["lhs_se"] = check.lhs_se;
  j["rhs"] = check.rhs;
  j["holds"] = check.holds;
  return j;
}

Json maximal_bound_json(const MaximalBoundCheck& check) {
  Json j;
  j["n_grid"] = check.n_grid;
  j["estimates"] = check.estimates;
  j["std_errors"] = check.std_errors;
  j["bound"] = check.bound;
  j["holds"] = check.holds;
  return j;
}

Json clt_test_json(const CltTestResult& result) {
  Json j;
  j["degenerate"] = result.degenerate;
  j["ks_distance"] = result.ks_distance;
  j["critical"] = result.critical;
  j["bias_allowance"] = result.bias_allowance;
  j["pass"] = result.pass;
  return j;
}

Json fclt_test_json(const FcltTestResult& result) {
  Json j;
  j["grid"] = result.grid;
  j["ks_per_time"] = result.ks_per_time;
  j["ks_critical"] = result.ks_critical;
  j["marginals_pass"] = result.marginals_pass;
  j["sup_fraction"] = result.sup_fraction;
  j["sup_reference"] = result.sup_reference;
  j["sup_tolerance"] = result.sup_tolerance;
  j["sup_pass"] = result.sup_pass;
  j["increment_correlation"] = result.increment_correlation;
  j["correlation_bound"] = result.correlation_bound;
  j["increments_pass"] = result.increments_pass;
  j["pass"] = result.pass;
  return j;
}

Json ensemble_json(const EnsembleSummary& ensemble) {
  Json j;
  j["n"] = ensemble.n;
  j["count"] = ensemble.count;
  j["master_seed"] = ensemble.master_seed;
  j["start"] = ensemble.start.kind == StartSpec::Kind::fixed
                   ? Json(ensemble.start.state)
                   : Json("stationary");
  j["grid"] = ensemble.grid;
  return j;
}

std::string ensemble_csv(const EnsembleSummary& ensemble) {
  std::string out;
  out.reserve(static_cast<std::size_t>(ensemble.count + 1) * 64);
  out += "path,endpoint,max_abs,max_signed";
  for (double t : ensemble.grid) {
    char head[48];
    std::snprintf(head, sizeof head, ",s[t=%g]", t);
    out += head;
  }
  out += "\n";
  const std::size_t slots = ensemble.grid.size();
  for (long p = 0; p < ensemble.count; ++p) {
    out += std::to_string(p);
    out += ",";
    out += format_double(ensemble.normalized_endpoints[p]);
    out += ",";
    out += format_double(ensemble.max_stats[p]);
    out += ",";
    out += format_double(ensemble.max_signed[p]);
    for (std::size_t s = 0; s < slots; ++s) {
      out += ",";
      out += format_double(
          ensemble.scaled_paths[static_cast<std::size_t>(p) * slots + s]);
    }
    out += "\n";
  }
  return out;
}

Json example_json(const TruncatedExample& ex) {
  Json j;
  j["K"] = ex.K;
  j["a"] = ex.a;
  j["rho"] = ex.rho;
  j["N"] = ex.N;
  j["eps"] = ex.eps;
  j["alpha"] = ex.alpha;
  j["gap"] = ex.gap;
  j["rademacher_seed"] = ex.rademacher_seed;
  Json arcs = Json::array();
  for (int k = 0; k < ex.K; ++k)
    arcs.push_back(Json::array({ex.arc_start[k], ex.arc_len[k]}));
  j["arcs"] = std::move(arcs);
  return j;
}

Json example_invariants_json(const ExampleInvariants& inv) {
  Json j;
  j["lengths_ok"] = inv.lengths_ok;
  j["disjoint"] = inv.disjoint;
  j["total_below_one"] = inv.total_below_one;
  j["symdiff_ok"] = inv.symdiff_ok;
  j["total_length"] = inv.total_length;
  j["min_gap"] = inv.min_gap;
  j["worst_symdiff_ratio"] = inv.worst_symdiff_ratio;
  return j;
}

Json divergent_series_json(const DivergentSeriesEstimate& est) {
  Json j;
  j["value"] = est.value;
  j["lower_bound"] = est.lower_bound;
  j["error_budget"] = est.error_budget;
  j["i_max"] = est.i_max;
  j["multi_level_regions"] = est.multi_level_regions;
  return j;
}

Json bounded_sup_json(const BoundedSupEstimate& est) {
  Json j;
  j["mc_estimate"] = est.mc_estimate;
  j["std_error"] = est.std_error;
  j["upper_bound"] = est.upper_bound;
  j["count"] = est.count;
  return j;
}

Json bounded_sup_exact_json(const BoundedSupExact& est) {
  Json j;
  j["value"] = est.value;
  j["regions"] = est.regions;
  j["upper_bound"] = est.upper_bound;
  return j;
}

}  // namespace qclt::io
