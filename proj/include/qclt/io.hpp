#pragma once

#include <string>
#include <vector>

#include "json.hpp"
#include "qclt/counterexample.hpp"
#include "qclt/diagnostics.hpp"
#include "qclt/kernel.hpp"
#include "qclt/operator_calculus.hpp"
#include "qclt/simulator.hpp"

namespace qclt::io {

using Json = nlohmann::json;

// Fixed-format round-trip representation (%.17g): every finite double
// prints the same bytes on every run and parses back to the same value.
std::string format_double(double v);

// Whole-file text helpers; failures surface as IoError with the path.
std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& text);

// ----------------------------------------------------------- kernel shapes

// {"states": [...labels...], "rows": [[...], ...]}
Json kernel_json(const MarkovKernel& kernel);
MarkovKernel kernel_from_json(const Json& j);  // ConfigError on bad shape

Json ergodicity_json(const ErgodicityReport& report);

// Plain JSON array of per-state values.
Json observable_json(const std::vector<double>& values);
std::vector<double> doubles_from_json(const Json& j);  // ConfigError

// ----------------------------------------------------------- report shapes

Json condition_report_json(const ConditionReport& report);
Json variance_report_json(const VarianceReport& report);
Json bound_check_json(const BoundCheck& check);
Json rio_bound_json(const RioBoundCheck& check);
Json maximal_bound_json(const MaximalBoundCheck& check);
Json clt_test_json(const CltTestResult& result);
Json fclt_test_json(const FcltTestResult& result);

Json ensemble_json(const EnsembleSummary& ensemble);  // metadata, no samples

// One row per path: index, start parameters, endpoint and maxima
// statistics, then one column per grid time.  All doubles in %.17g, so
// equal-seed runs produce identical bytes regardless of worker count.
std::string ensemble_csv(const EnsembleSummary& ensemble);

Json example_json(const TruncatedExample& ex);
Json example_invariants_json(const ExampleInvariants& inv);
Json divergent_series_json(const DivergentSeriesEstimate& est);
Json bounded_sup_json(const BoundedSupEstimate& est);
Json bounded_sup_exact_json(const BoundedSupExact& est);

}  // namespace qclt::io
