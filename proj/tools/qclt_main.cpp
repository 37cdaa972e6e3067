// qclt — command-line laboratory for limit-theorem experiments on finite
// Markov chains: kernel inspection, reproducible path ensembles, sufficient-
// condition diagnostics, and the arc-rotation contrast example.

#include <cctype>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "qclt/config.hpp"
#include "qclt/counterexample.hpp"
#include "qclt/diagnostics.hpp"
#include "qclt/errors.hpp"
#include "qclt/io.hpp"
#include "qclt/kernel.hpp"
#include "qclt/operator_calculus.hpp"
#include "qclt/rng.hpp"
#include "qclt/simulator.hpp"

namespace {

using namespace qclt;
namespace fs = std::filesystem;

struct Timer {
  std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
  double ms() const {
    return std::chrono::duration<double, std::milli>(
               std::chrono::steady_clock::now() - t0)
        .count();
  }
};

// Raw option storage for one subcommand; CLI11 Option pointers let us
// distinguish "given" from "default".
struct Args {
  std::string config_path;
  std::uint64_t seed = 0;
  int threads = 0;
  std::string out_dir;
  bool allow_inconclusive = false;
  int K = 0;
  long count = 0;

  CLI::Option* seed_opt = nullptr;
  CLI::Option* threads_opt = nullptr;
  CLI::Option* out_opt = nullptr;
  CLI::Option* k_opt = nullptr;
  CLI::Option* count_opt = nullptr;
};

void add_common_options(CLI::App* sub, Args& a, bool config_required) {
  auto* cfg = sub->add_option("--config", a.config_path,
                              "experiment description (TOML)");
  if (config_required) cfg->required();
  a.seed_opt = sub->add_option("--seed", a.seed,
                               "master seed (overrides the config)");
  a.threads_opt = sub->add_option("--threads", a.threads, "worker count")
                      ->envname("QCLT_THREADS");
  a.out_opt = sub->add_option("--out", a.out_dir, "output directory");
}

// Effective settings after flag/env/config precedence.
struct Run {
  ExperimentConfig cfg;
  std::uint64_t seed = 0;
  int threads = 0;
  fs::path out_dir;
  std::string digest;
};

Run resolve(const Args& a, bool need_seed) {
  Run r;
  if (!a.config_path.empty()) r.cfg = load_config(a.config_path);
  if (a.seed_opt->count() > 0) {
    r.cfg.seed = a.seed;
    r.cfg.seed_set = true;
  }
  if (need_seed && !r.cfg.seed_set)
    throw ConfigError(
        "a master seed is required: set seed= in the config or pass --seed");
  if (a.threads_opt->count() > 0) {
    if (a.threads < 0) throw ConfigError("--threads must be nonnegative");
    r.cfg.threads = a.threads;
  }
  if (a.out_opt->count() > 0) r.cfg.out_dir = a.out_dir;
  r.seed = r.cfg.seed;
  r.threads = r.cfg.threads;
  r.out_dir = r.cfg.out_dir;
  r.digest = config_digest(r.cfg);
  return r;
}

void write_json(const fs::path& path, const io::Json& j) {
  io::write_text_file(path.string(), j.dump(2) + "\n");
}

void write_manifest(const fs::path& dir, RunManifest man) {
  write_json(dir / "manifest.json", man.to_json());
}

std::string lower(std::string s) {
  for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

// ----------------------------------------------------------------- kernel

int cmd_kernel(const Args& a) {
  Run r = resolve(a, /*need_seed=*/false);
  Timer timer;
  const MarkovKernel kernel = realize_kernel(r.cfg);
  const ErgodicityReport& erg = kernel.ergodicity();
  double violation = 0.0;
  const bool reversible = check_reversible(kernel, 1e-12, &violation);

  std::printf("states: %d\n", kernel.size());
  std::printf("pi:");
  for (double p : kernel.pi()) std::printf(" %.12g", p);
  std::printf("\n");
  std::printf("ergodic: %s (period %d, spectral gap %.12g%s)\n",
              erg.ergodic ? "yes" : "no", erg.period, erg.spectral_gap,
              erg.gap_is_bound ? ", lower bound" : "");
  std::printf("reversible: %s (max detailed-balance violation %.3g)\n",
              reversible ? "yes" : "no", violation);

  io::Json rep;
  rep["kernel"] = io::kernel_json(kernel);
  rep["pi"] = kernel.pi();
  rep["ergodicity"] = io::ergodicity_json(erg);
  rep["reversible"] = reversible;
  rep["reversibility_max_violation"] = violation;
  const fs::path dir = r.out_dir / "kernel";
  write_json(dir / "report.json", rep);

  RunManifest man;
  man.command = "kernel";
  man.config_digest = r.digest;
  man.seed = r.seed;
  man.threads = r.threads;
  man.timings_ms.emplace_back("inspect", timer.ms());
  man.exit_code = 0;
  write_manifest(dir, std::move(man));
  return 0;
}

// --------------------------------------------------------------- simulate

int cmd_simulate(const Args& a) {
  Run r = resolve(a, /*need_seed=*/true);
  const SimulateSpec& spec = r.cfg.simulate;
  if (spec.count < 1) throw ConfigError("simulate.count must be >= 1");
  const MarkovKernel kernel = realize_kernel(r.cfg);
  const Observable raw = realize_observable(r.cfg, kernel);
  const Observable f = center(kernel, raw.values);

  std::vector<int> starts = spec.start_states;
  if (starts.empty())
    for (int x = 0; x < kernel.size(); ++x) starts.push_back(x);
  for (int x : starts)
    if (x < 0 || x >= kernel.size())
      throw ConfigError("simulate.start_states entry out of range");

  RunManifest man;
  man.command = "simulate";
  man.config_digest = r.digest;
  man.seed = r.seed;
  man.threads = r.threads;

  const fs::path dir = r.out_dir / "simulate";
  std::uint64_t combo = 0;
  char name[64];
  for (long n : spec.n_grid) {
    if (spec.quenched) {
      for (int x : starts) {
        const std::uint64_t seed_i = rng::derive_seed(r.seed, combo++);
        Timer timer;
        const EnsembleSummary ens = quenched_ensemble(
            kernel, f, x, n, spec.count, seed_i, r.threads, spec.time_grid);
        std::snprintf(name, sizeof name, "quenched_x%d_n%ld", x, n);
        io::write_text_file((dir / (std::string(name) + ".csv")).string(),
                            io::ensemble_csv(ens));
        write_json(dir / (std::string(name) + ".json"), io::ensemble_json(ens));
        man.timings_ms.emplace_back(name, timer.ms());
        std::printf("wrote %s (count %ld)\n",
                    (dir / (std::string(name) + ".csv")).c_str(), spec.count);
      }
    }
    if (spec.annealed) {
      const std::uint64_t seed_i = rng::derive_seed(r.seed, combo++);
      Timer timer;
      const EnsembleSummary ens = annealed_ensemble(
          kernel, f, n, spec.count, seed_i, r.threads, spec.time_grid);
      std::snprintf(name, sizeof name, "annealed_n%ld", n);
      io::write_text_file((dir / (std::string(name) + ".csv")).string(),
                          io::ensemble_csv(ens));
      write_json(dir / (std::string(name) + ".json"), io::ensemble_json(ens));
      man.timings_ms.emplace_back(name, timer.ms());
      std::printf("wrote %s (count %ld)\n",
                  (dir / (std::string(name) + ".csv")).c_str(), spec.count);
    }
  }
  man.exit_code = 0;
  write_manifest(dir, std::move(man));
  return 0;
}

// --------------------------------------------------------------- diagnose

int cmd_diagnose(const Args& a) {
  Run r = resolve(a, /*need_seed=*/true);
  const DiagnoseSpec& d = r.cfg.diagnose;
  if (d.conditions.empty())
    throw ConfigError("diagnose.conditions must list at least one condition");
  const MarkovKernel kernel = realize_kernel(r.cfg);
  const Observable raw = realize_observable(r.cfg, kernel);
  const Observable f = center(kernel, raw.values);
  if (d.start_state < 0 || d.start_state >= kernel.size())
    throw ConfigError("diagnose.start_state out of range");

  const double p = d.p_exponent;
  const double q = std::isinf(p) ? 1.0 : p / (p - 1.0);
  const std::vector<double> levels = {1.0, 2.0, 4.0, 8.0, 16.0, 32.0};

  std::optional<CoboundaryCheck> cobo;      // computed once if needed
  std::optional<std::pair<ConditionReport, ConditionReport>> conj;

  RunManifest man;
  man.command = "diagnose";
  man.config_digest = r.digest;
  man.seed = r.seed;
  man.threads = r.threads;

  const fs::path dir = r.out_dir / "diagnose";
  bool any_violated = false;
  bool any_inconclusive = false;
  std::uint64_t idx = 0;
  for (const std::string& name : d.conditions) {
    const ConditionId id = condition_from_name(name);
    const std::uint64_t seed_i = rng::derive_seed(r.seed, idx++);
    Timer timer;
    ConditionReport rep;
    switch (id) {
      case ConditionId::NEGL_CLT:
        rep = negligibility_probe(kernel, f, d.start_state, d.m_grid, d.n_grid,
                                  d.eps, d.count, seed_i, /*functional=*/false,
                                  r.threads);
        break;
      case ConditionId::NEGL_FCLT:
        rep = negligibility_probe(kernel, f, d.start_state, d.m_grid, d.n_grid,
                                  d.eps, d.count, seed_i, /*functional=*/true,
                                  r.threads);
        break;
      case ConditionId::UI_FMGF:
        rep = ui_probe(kernel, f, d.m_grid, levels);
        break;
      case ConditionId::STRONG:
        rep = strong_condition_series(kernel, f, d.m_grid, d.series_cap);
        break;
      case ConditionId::LQ_GF:
        if (!cobo) cobo = coboundary_check(kernel, f, p, q, d.m_grid);
        rep = cobo->lq_gf;
        break;
      case ConditionId::COBOUNDARY:
        if (!cobo) cobo = coboundary_check(kernel, f, p, q, d.m_grid);
        rep = cobo->coboundary;
        break;
      case ConditionId::PROJECTIVE:
        rep = projective_series(kernel, f, d.series_cap);
        break;
      case ConditionId::CONJ_DR:
        if (!conj) conj = conjecture_series(kernel, f, d.series_cap);
        rep = conj->first;
        break;
      case ConditionId::CONJ_KV:
        if (!conj) conj = conjecture_series(kernel, f, d.series_cap);
        rep = conj->second;
        break;
      case ConditionId::MIXING_RIO:
        rep = mixing_clt_condition(kernel, f, d.k_max);
        break;
    }
    write_json(dir / (lower(name) + ".json"), io::condition_report_json(rep));
    man.timings_ms.emplace_back(name, timer.ms());
    const std::string verdict = verdict_name(rep.verdict);
    man.verdicts[name] = verdict;
    std::printf("%s: %s%s%s\n", name.c_str(), verdict.c_str(),
                rep.note.empty() ? "" : " — ", rep.note.c_str());
    if (rep.verdict == Verdict::violated) any_violated = true;
    if (rep.verdict == Verdict::inconclusive) any_inconclusive = true;
  }

  int code = 0;
  if (any_violated)
    code = 1;
  else if (any_inconclusive && !a.allow_inconclusive)
    code = 5;
  man.exit_code = code;
  write_manifest(dir, std::move(man));
  return code;
}

// --------------------------------------------------------- counterexample

int cmd_counterexample(const Args& a) {
  Run r = resolve(a, /*need_seed=*/true);
  const int K = a.k_opt->count() > 0 ? a.K : r.cfg.counterexample.K;
  const long count =
      a.count_opt->count() > 0 ? a.count : r.cfg.counterexample.count;
  if (K < 1 || K > 6)
    throw ConfigError("K must lie in 1..6 (the widest window is 4^6 = 4096)");
  if (count < 1000)
    throw ConfigError("count must be >= 1000 for a usable standard error");

  RunManifest man;
  man.command = "counterexample";
  man.config_digest = r.digest;
  man.seed = r.seed;
  man.threads = r.threads;

  io::Json out;
  out["levels"] = io::Json::array();
  std::printf("level   series value   lower bound   regions\n");
  TruncatedExample top = build_truncated_example(K);
  for (int k = 1; k <= K; ++k) {
    Timer timer;
    const TruncatedExample ex =
        (k == K) ? top : build_truncated_example(k);
    const ExampleInvariants inv = check_example(ex);
    const DivergentSeriesEstimate div =
        divergent_series_estimate(ex, ex.max_window());
    io::Json level;
    level["K"] = k;
    level["example"] = io::example_json(ex);
    level["invariants"] = io::example_invariants_json(inv);
    level["divergent_series"] = io::divergent_series_json(div);
    out["levels"].push_back(std::move(level));
    char label[32];
    std::snprintf(label, sizeof label, "series_K%d", k);
    man.timings_ms.emplace_back(label, timer.ms());
    std::printf("K=%-4d  %12.6f  %12.6f  %8ld\n", k, div.value,
                div.lower_bound, div.multi_level_regions);
  }

  Timer timer;
  const BoundedSupEstimate sup = bounded_sup_estimate(top, count, r.seed);
  man.timings_ms.emplace_back("bounded_sup", timer.ms());
  out["bounded_sup"] = io::bounded_sup_json(sup);
  std::printf(
      "conditional-expectation sup at K=%d: %.6f ± %.6f (%ld draws, "
      "upper bound %.6f)\n",
      K, sup.mc_estimate, sup.std_error, count, sup.upper_bound);
  std::printf(
      "the series grows one unit per level while the sup stays bounded\n");

  const fs::path dir = r.out_dir / "counterexample";
  write_json(dir / "contrast.json", out);
  man.exit_code = 0;
  write_manifest(dir, std::move(man));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "limit-theorem laboratory for finite-state Markov chains: exact "
      "operator calculus, reproducible path ensembles, sufficient-condition "
      "diagnostics, and a bounded-vs-divergent contrast example"};
  app.require_subcommand(1);

  Args a_kernel, a_sim, a_diag, a_ce;

  CLI::App* sub_kernel = app.add_subcommand(
      "kernel", "inspect a kernel: stationary law, ergodicity, reversibility");
  add_common_options(sub_kernel, a_kernel, /*config_required=*/true);

  CLI::App* sub_sim = app.add_subcommand(
      "simulate", "sample scaled partial-sum ensembles to CSV + JSON");
  add_common_options(sub_sim, a_sim, /*config_required=*/true);

  CLI::App* sub_diag = app.add_subcommand(
      "diagnose", "evaluate sufficient conditions and write reports");
  add_common_options(sub_diag, a_diag, /*config_required=*/true);
  sub_diag->add_flag("--allow-inconclusive", a_diag.allow_inconclusive,
                     "exit 0 even when some verdicts are inconclusive");

  CLI::App* sub_ce = app.add_subcommand(
      "counterexample",
      "contrast a divergent conditional-expectation series with its bounded "
      "supremum");
  add_common_options(sub_ce, a_ce, /*config_required=*/false);
  a_ce.k_opt = sub_ce->add_option("-K,--levels", a_ce.K,
                                  "number of construction levels (1..6)");
  a_ce.count_opt =
      sub_ce->add_option("--count", a_ce.count, "Monte Carlo draw count");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 4;
  }

  try {
    if (sub_kernel->parsed()) return cmd_kernel(a_kernel);
    if (sub_sim->parsed()) return cmd_simulate(a_sim);
    if (sub_diag->parsed()) return cmd_diagnose(a_diag);
    if (sub_ce->parsed()) return cmd_counterexample(a_ce);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 4;
  } catch (const IoError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  } catch (const ArcsDontFit& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 4;
  } catch (const NonStochasticRow& e) {
    std::fprintf(stderr, "invalid kernel: %s\n", e.what());
    return 2;
  } catch (const NotErgodic& e) {
    std::fprintf(stderr, "invalid kernel: %s\n", e.what());
    return 2;
  } catch (const Disconnected& e) {
    std::fprintf(stderr, "invalid kernel: %s\n", e.what());
    return 2;
  } catch (const ZeroTargetWeight& e) {
    std::fprintf(stderr, "invalid kernel: %s\n", e.what());
    return 2;
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
