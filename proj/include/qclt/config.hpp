#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "qclt/io.hpp"
#include "qclt/kernel.hpp"
#include "qclt/operator_calculus.hpp"

namespace qclt {

// ------------------------------------------------------------- TOML subset
// The config reader understands the slice of TOML these experiments use:
// [section] tables, key = value pairs, strings, integers, floats,
// booleans, and (nested, possibly multiline) arrays.  No dotted keys,
// no inline tables, no dates.
namespace toml {

struct Value {
  enum class Type { string, integer, floating, boolean, array };
  Type type = Type::string;
  std::string s;
  long long i = 0;
  double d = 0.0;
  bool b = false;
  std::vector<Value> items;

  double as_number() const;  // integer or floating; ConfigError otherwise
};

// Keys are "key" for top-level entries and "section.key" inside tables.
using Table = std::map<std::string, Value>;

Table parse(const std::string& text);  // ConfigError with line numbers

}  // namespace toml

// -------------------------------------------------------------- experiment

struct KernelSpec {
  enum class Source { rows, file, builder };
  Source source = Source::rows;
  Matrix rows;  // transition rows, or builder input (weights/proposal)
  std::vector<double> target;  // acceptance-ratio builder target weights
  std::vector<std::string> labels;
  std::string file;
  std::string builder;  // "two_state" | "random_walk" | "metropolis" | "lazy"
  std::map<std::string, double> params;
};

struct ObservableSpec {
  enum class Source { values, file, builder };
  Source source = Source::values;
  std::vector<double> values;
  std::string file;
  std::string builder;  // "indicator"
  std::map<std::string, double> params;
};

struct SimulateSpec {
  std::vector<long> n_grid = {1000};
  long count = 1000;
  std::vector<int> m_grid = {1};
  bool quenched = true;
  bool annealed = false;
  std::vector<int> start_states;     // empty means every state
  std::vector<double> time_grid;     // scaled-path capture times
};

struct DiagnoseSpec {
  std::vector<std::string> conditions;
  double eps = 0.1;
  std::vector<int> m_grid = {1, 10, 100, 1000, 3000};
  std::vector<long> n_grid = {1000, 10000};
  long count = 2000;
  int k_max = 50;
  long series_cap = 100000;
  double p_exponent = 2.0;  // conjugate pair (p, p/(p-1)) for the
                            // balance-equation check; may be infinite
  int start_state = 0;
};

struct CounterexampleSpec {
  int K = 3;
  long count = 10000;
};

struct ExperimentConfig {
  bool seed_set = false;
  std::uint64_t seed = 0;  // mandatory in files; never wall-clock derived
  int threads = 0;         // 0 = library decides
  std::string out_dir = "out";

  bool kernel_set = false;
  KernelSpec kernel;
  bool observable_set = false;
  ObservableSpec observable;

  SimulateSpec simulate;
  DiagnoseSpec diagnose;
  CounterexampleSpec counterexample;
};

// Parses and validates the schema (grids nonempty, counts positive,
// seed present).  Field problems throw ConfigError.
ExperimentConfig parse_config_text(const std::string& text);
ExperimentConfig load_config(const std::string& path);  // + IoError

// Instantiates the configured kernel/observable.  Kernel-table problems
// throw the kernel module's errors; missing pieces throw ConfigError.
MarkovKernel realize_kernel(const ExperimentConfig& config);
// The observable as written (uncentered), with its stationary mean
// attached; callers center it where the mathematics requires.
Observable realize_observable(const ExperimentConfig& config,
                              const MarkovKernel& kernel);

// Canonical JSON image of the semantic fields (kernel, observable,
// grids, seed — not threads or output paths, which cannot change any
// sampled byte) and its FNV-1a-64 digest in hex.
io::Json config_json(const ExperimentConfig& config);
std::string config_digest(const ExperimentConfig& config);

inline constexpr const char* kArtifactVersion = "0.1.0";

// Execution record written next to every command's outputs.  Timings
// are wall-clock and vary run to run by design; every sampled artifact
// (CSV/report JSON) is byte-deterministic given (config, seed).
struct RunManifest {
  std::string command;
  std::string config_digest;
  std::uint64_t seed = 0;
  int threads = 0;
  std::vector<std::pair<std::string, double>> timings_ms;
  std::map<std::string, std::string> verdicts;
  int exit_code = 0;

  io::Json to_json() const;
};

}  // namespace qclt
