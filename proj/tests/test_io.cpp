// Serialization layer: byte-stable double formatting, text file helpers,
// kernel/observable JSON shapes, report JSON shapes, and the ensemble CSV.

#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "qclt/config.hpp"
#include "qclt/errors.hpp"
#include "qclt/io.hpp"
#include "qclt/kernel.hpp"
#include "qclt/operator_calculus.hpp"
#include "qclt/simulator.hpp"

using namespace qclt;

namespace {

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(s);
  while (std::getline(in, item, sep)) out.push_back(item);
  return out;
}

MarkovKernel canonical() {
  return build_kernel({{0.7, 0.3}, {0.1, 0.9}}, {"lo", "hi"});
}

}  // namespace

TEST_CASE("double formatting: fixed bytes, exact round trip") {
  const double cases[] = {0.0,
                          0.25,
                          0.1,
                          1.0 / 3.0,
                          -2.5e-1,
                          3.141592653589793,
                          1e-300,
                          5e-324,
                          1e100,
                          12345678901234567.0,
                          -0.0};
  for (double v : cases) {
    CAPTURE(v);
    const std::string text = io::format_double(v);
    // strtod, not stod: stod signals the denormal range as out_of_range.
    const double back = std::strtod(text.c_str(), nullptr);
    CHECK(back == v);
    CHECK(std::signbit(back) == std::signbit(v));
    // Same value, same bytes — the determinism the CSVs rely on.
    CHECK(io::format_double(back) == text);
  }
  CHECK(io::format_double(0.25) == "0.25");
  CHECK(io::format_double(1e100) == "1e+100");
  CHECK(io::format_double(-0.0) == "-0");
}

TEST_CASE("text files: round trip, directory creation, and failures") {
  const std::string payload = "line one\nline two\r\nbytes \xc3\xa9 end\n";
  io::write_text_file("io_test_tmp/deep/nested/file.txt", payload);
  CHECK(io::read_text_file("io_test_tmp/deep/nested/file.txt") == payload);

  // Truncation on rewrite.
  io::write_text_file("io_test_tmp/deep/nested/file.txt", "short");
  CHECK(io::read_text_file("io_test_tmp/deep/nested/file.txt") == "short");

  CHECK_THROWS_AS(io::read_text_file("io_test_tmp/absent.txt"), IoError);
  CHECK_THROWS_AS(io::write_text_file("io_test_tmp", "x"), IoError);
}

TEST_CASE("kernel documents: round trip and shape validation") {
  const MarkovKernel k = canonical();
  const io::Json j = io::kernel_json(k);
  CHECK(j["states"] == std::vector<std::string>{"lo", "hi"});
  CHECK(j["rows"][0][1] == 0.3);

  const MarkovKernel back =
      io::kernel_from_json(io::Json::parse(j.dump()));
  CHECK(back.rows() == k.rows());
  CHECK(back.labels() == k.labels());
  CHECK(back.pi()[0] == doctest::Approx(k.pi()[0]).epsilon(1e-15));

  SUBCASE("labels are optional") {
    io::Json bare;
    bare["rows"] = {{0.5, 0.5}, {0.5, 0.5}};
    CHECK(io::kernel_from_json(bare).labels() ==
          std::vector<std::string>{"0", "1"});
  }

  SUBCASE("malformed documents") {
    CHECK_THROWS_AS(io::kernel_from_json(io::Json::parse("[]")), ConfigError);
    CHECK_THROWS_AS(io::kernel_from_json(io::Json::parse("{\"x\": 1}")),
                    ConfigError);
    CHECK_THROWS_AS(
        io::kernel_from_json(io::Json::parse("{\"rows\": [1, 2]}")),
        ConfigError);
    io::Json labeled;
    labeled["rows"] = {{0.5, 0.5}, {0.5, 0.5}};
    labeled["states"] = 7;
    CHECK_THROWS_AS(io::kernel_from_json(labeled), ConfigError);
    // Structurally valid JSON whose chain is unusable fails in the
    // kernel layer, not the parser.
    io::Json frozen;
    frozen["rows"] = {{1.0, 0.0}, {0.0, 1.0}};
    CHECK_THROWS_AS(io::kernel_from_json(frozen), Error);
  }
}

TEST_CASE("ergodicity report JSON carries the certificate fields") {
  const io::Json j = io::ergodicity_json(canonical().ergodicity());
  CHECK(j["irreducible"] == true);
  CHECK(j["period"] == 1);
  CHECK(j["ergodic"] == true);
  CHECK(j["spectral_gap"].is_number());
  CHECK(j["gap_is_bound"].is_boolean());
  CHECK(j["classes"].is_array());
}

TEST_CASE("observable arrays: round trip and validation") {
  const std::vector<double> values = {3.0, -1.0};
  const io::Json j = io::observable_json(values);
  CHECK(io::doubles_from_json(io::Json::parse(j.dump())) == values);
  CHECK_THROWS_AS(io::doubles_from_json(io::Json::parse("{}")), ConfigError);
  CHECK_THROWS_AS(io::doubles_from_json(io::Json::parse("[1, \"x\"]")),
                  ConfigError);
}

TEST_CASE("report JSON shapes: conditions, variance, and bounds") {
  SUBCASE("condition report") {
    ConditionReport r;
    r.condition_id = ConditionId::STRONG;
    r.verdict = Verdict::satisfied;
    r.sequence = {{1.0, 2.7}, {2.0, 1.62}};
    r.tolerances["threshold"] = 0.05;
    r.values["sum"] = 5.0625;
    r.note = "geometric";
    const io::Json j = io::condition_report_json(r);
    CHECK(j["condition"] == "STRONG");
    CHECK(j["verdict"] == "satisfied");
    REQUIRE(j["sequence"].size() == 2);
    CHECK(j["sequence"][1][0] == 2.0);
    CHECK(j["sequence"][1][1] == 1.62);
    CHECK(j["tolerances"]["threshold"] == 0.05);
    CHECK(j["values"]["sum"] == 5.0625);
    CHECK(j["note"] == "geometric");
  }

  SUBCASE("variance report from the calculus") {
    const MarkovKernel k = canonical();
    const Observable f = make_observable(k, {3.0, -1.0});
    const io::Json j = io::variance_report_json(long_run_variance(k, f));
    CHECK(j["sigma_sq"].get<double>() == doctest::Approx(12.0).epsilon(1e-10));
    CHECK(j["second_moment"].get<double>() ==
          doctest::Approx(3.0).epsilon(1e-12));
    CHECK(j["truncation_j"].is_number_integer());
    CHECK(j["tail_bound"].is_number());
    CHECK(j["clamped"] == false);
  }

  SUBCASE("plain and specialized bound checks") {
    const io::Json b = io::bound_check_json({1.8, 6.075, true});
    CHECK(b["lhs"] == 1.8);
    CHECK(b["rhs"] == 6.075);
    CHECK(b["holds"] == true);

    const MarkovKernel k = canonical();
    const Observable f = make_observable(k, {3.0, -1.0});
    const io::Json r = io::rio_bound_json(rio_bound_check(k, f, 1));
    CHECK(r["exact"] == true);
    CHECK(r["n"] == 1);
    CHECK(r["lhs"].get<double>() == doctest::Approx(3.0).epsilon(1e-10));
    CHECK(r["rhs"].get<double>() == doctest::Approx(24.0).epsilon(1e-10));
    CHECK(r["lhs_se"] == 0.0);
    CHECK(r["holds"] == true);

    MaximalBoundCheck m;
    m.n_grid = {500, 2000};
    m.estimates = {11.0, 12.0};
    m.std_errors = {0.5, 0.4};
    m.bound = 180.0;
    m.holds = true;
    const io::Json mj = io::maximal_bound_json(m);
    CHECK(mj["n_grid"][1] == 2000);
    CHECK(mj["estimates"][0] == 11.0);
    CHECK(mj["std_errors"][1] == 0.4);
    CHECK(mj["bound"] == 180.0);
    CHECK(mj["holds"] == true);
  }

  SUBCASE("distribution test results") {
    CltTestResult c;
    c.ks_distance = 0.008;
    c.critical = 0.01;
    c.bias_allowance = 0.002;
    c.pass = true;
    const io::Json cj = io::clt_test_json(c);
    CHECK(cj["degenerate"] == false);
    CHECK(cj["ks_distance"] == 0.008);
    CHECK(cj["critical"] == 0.01);
    CHECK(cj["bias_allowance"] == 0.002);
    CHECK(cj["pass"] == true);

    FcltTestResult f;
    f.grid = {0.5, 1.0};
    f.ks_per_time = {0.006, 0.007};
    f.ks_critical = 0.012;
    f.marginals_pass = true;
    f.sup_fraction = 0.68;
    f.sup_reference = 0.682689492137086;
    f.sup_tolerance = 0.02;
    f.sup_pass = true;
    f.increment_correlation = 0.01;
    f.correlation_bound = 0.05;
    f.increments_pass = true;
    f.pass = true;
    const io::Json fj = io::fclt_test_json(f);
    CHECK(fj["grid"].size() == 2);
    CHECK(fj["ks_per_time"][1] == 0.007);
    CHECK(fj["sup_reference"] == 0.682689492137086);
    CHECK(fj["pass"] == true);
  }
}

TEST_CASE("ensemble artifacts: metadata JSON and the per-path CSV") {
  const MarkovKernel k = canonical();
  const Observable f = make_observable(k, {3.0, -1.0});
  const EnsembleSummary ens =
      quenched_ensemble(k, f, 0, 50, 3, 2024, 1, {0.5, 1.0});

  SUBCASE("metadata") {
    const io::Json j = io::ensemble_json(ens);
    CHECK(j["n"] == 50);
    CHECK(j["count"] == 3);
    CHECK(j["master_seed"] == 2024);
    CHECK(j["start"] == 0);
    CHECK(j["grid"] == std::vector<double>{0.5, 1.0});

    const EnsembleSummary stat =
        annealed_ensemble(k, f, 20, 2, 5, 1);
    CHECK(io::ensemble_json(stat)["start"] == "stationary");
  }

  SUBCASE("CSV layout and parse-back") {
    const std::string csv = io::ensemble_csv(ens);
    const auto lines = split(csv, '\n');
    REQUIRE(lines.size() == 4);  // header + one row per path
    CHECK(lines[0] == "path,endpoint,max_abs,max_signed,s[t=0.5],s[t=1]");
    for (long p = 0; p < 3; ++p) {
      const auto cells = split(lines[static_cast<std::size_t>(p) + 1], ',');
      REQUIRE(cells.size() == 6);
      CHECK(cells[0] == std::to_string(p));
      CHECK(std::stod(cells[1]) == ens.normalized_endpoints[p]);
      CHECK(std::stod(cells[2]) == ens.max_stats[p]);
      CHECK(std::stod(cells[3]) == ens.max_signed[p]);
      CHECK(std::stod(cells[4]) == ens.scaled_paths[p * 2]);
      CHECK(std::stod(cells[5]) == ens.scaled_paths[p * 2 + 1]);
    }
  }

  SUBCASE("worker count never changes a byte") {
    const EnsembleSummary wide =
        quenched_ensemble(k, f, 0, 50, 3, 2024, 4, {0.5, 1.0});
    CHECK(io::ensemble_csv(wide) == io::ensemble_csv(ens));
  }
}

TEST_CASE("rotation system artifacts serialize every certified field") {
  const TruncatedExample ex = build_truncated_example(2);

  const io::Json ej = io::example_json(ex);
  CHECK(ej["K"] == 2);
  CHECK(ej["a"] == 0.25);
  CHECK(ej["N"] == std::vector<long>{4, 16});
  CHECK(ej["alpha"].get<double>() == ex.alpha);
  CHECK(ej["arcs"].size() == 2);
  CHECK(ej["arcs"][0][0].get<double>() == ex.arc_start[0]);
  CHECK(ej["arcs"][0][1].get<double>() == ex.arc_len[0]);

  const io::Json ij = io::example_invariants_json(check_example(ex));
  CHECK(ij["lengths_ok"] == true);
  CHECK(ij["disjoint"] == true);
  CHECK(ij["total_below_one"] == true);
  CHECK(ij["symdiff_ok"] == true);
  CHECK(ij["worst_symdiff_ratio"].get<double>() ==
        doctest::Approx(1.0).epsilon(1e-9));

  const io::Json dj =
      io::divergent_series_json(divergent_series_estimate(ex, 16));
  CHECK(dj["value"].get<double>() ==
        doctest::Approx(1.9287109375).epsilon(1e-12));
  CHECK(dj["lower_bound"].get<double>() ==
        doctest::Approx(1.25).epsilon(1e-12));
  CHECK(dj["i_max"] == 16);
  CHECK(dj["multi_level_regions"] == 0);

  const io::Json bj = io::bounded_sup_json(bounded_sup_estimate(ex, 2000, 9));
  CHECK(bj["count"] == 2000);
  CHECK(bj["mc_estimate"].is_number());
  CHECK(bj["std_error"].get<double>() > 0.0);
  CHECK(bj["upper_bound"].get<double>() == doctest::Approx(1.5).epsilon(1e-12));

  const io::Json xj = io::bounded_sup_exact_json(bounded_sup_exact(ex));
  CHECK(xj["regions"].get<long>() > 0);
  CHECK(xj["value"].get<double>() > 0.0);
  CHECK(xj["upper_bound"].get<double>() == doctest::Approx(1.5).epsilon(1e-12));
}
