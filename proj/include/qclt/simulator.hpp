#pragma once

#include <cstdint>
#include <vector>

#include "qclt/kernel.hpp"
#include "qclt/operator_calculus.hpp"
#include "qclt/rng.hpp"

namespace qclt {

// Where a path begins: a fixed state, or a fresh draw from the
// stationary law using the path's own random stream.
struct StartSpec {
  enum class Kind { fixed, stationary };
  Kind kind = Kind::fixed;
  int state = 0;

  static StartSpec at(int state) { return {Kind::fixed, state}; }
  static StartSpec from_pi() { return {Kind::stationary, 0}; }
};

// Identifies one path's random stream; the stream seed is a pure
// function of this record, so any worker partition reproduces it.
struct SeedRecord {
  std::uint64_t master_seed = 0;
  std::uint64_t path_index = 0;
};

// One realized trajectory with its additive functional split into the
// martingale part and the remainder:
//   S_k = sum_{i<=k} f(xi_i)
//   M_k = sum_{i<=k} d(xi_i, xi_{i+1})      (scheme difference table)
//   R_k = theta(xi_1) - theta(xi_{k+1}) + rbar_k,
//   rbar_k = sum_{i<=k} f_m(xi_i)
// States run xi_0 .. xi_{n+1}; the extra state feeds d at step n.
// Invariant: S_k = M_k + R_k for every k (exact up to rounding).
struct PathSample {
  int start_state = 0;
  int m = 0;
  SeedRecord seed;
  std::vector<int> states;         // xi_0 .. xi_{n+1}
  std::vector<double> partial_sums;  // S_1 .. S_n
  std::vector<double> martingale;    // M_1 .. M_n
  std::vector<double> remainder;     // R_1 .. R_n
  std::vector<double> rbar;          // rbar_1 .. rbar_n

  long n() const { return static_cast<long>(partial_sums.size()); }
};

// Draws one full path and fills the decomposition along it.
PathSample sample_path(const MarkovKernel& kernel, const Observable& f,
                       const MartingaleScheme& scheme, StartSpec start, long n,
                       SeedRecord seed);

// max_k |seq_k| / sqrt(n) over the stored horizon; applies to any of the
// per-step series carried by PathSample.
double max_abs_scaled(const std::vector<double>& seq);

// Per-path reductions of the scaled partial-sum process of a centered
// observable.  Vectors are indexed by path; scaled_paths is row-major
// with one row of grid.size() entries per path holding S_{[n t]}/sqrt(n).
// Every value is a pure function of (master_seed, path index), so the
// contents are byte-stable under any thread count.
struct EnsembleSummary {
  long n = 0;
  long count = 0;
  std::uint64_t master_seed = 0;
  StartSpec start;
  std::vector<double> grid;
  std::vector<double> normalized_endpoints;  // S_n / sqrt(n)
  std::vector<double> max_stats;             // max_{0<=k<=n} |S_k| / sqrt(n)
  std::vector<double> max_signed;            // max_{0<=k<=n} S_k / sqrt(n)
  std::vector<double> scaled_paths;

  double scaled_at(long path, std::size_t slot) const {
    return scaled_paths[static_cast<std::size_t>(path) * grid.size() + slot];
  }
};

// `count` independent paths started at the fixed state x, reduced on
// the fly (no raw states are kept).  threads <= 0 picks the hardware
// concurrency.  Grid entries are fractions of n in [0, 1].
EnsembleSummary quenched_ensemble(const MarkovKernel& kernel,
                                  const Observable& f, int x, long n,
                                  long count, std::uint64_t master_seed,
                                  int threads = 0,
                                  std::vector<double> grid = {});

// Same reductions with each path's start drawn from the stationary law
// using the path's own stream.
EnsembleSummary annealed_ensemble(const MarkovKernel& kernel,
                                  const Observable& f, long n, long count,
                                  std::uint64_t master_seed, int threads = 0,
                                  std::vector<double> grid = {});

// Generic form taking an explicit StartSpec.
EnsembleSummary simulate_ensemble(const MarkovKernel& kernel,
                                  const Observable& f, StartSpec start,
                                  long n, long count,
                                  std::uint64_t master_seed, int threads = 0,
                                  std::vector<double> grid = {});

// Stationary mixture assembled from per-state ensembles whose path
// counts follow largest-remainder rounding of pi * count, with a
// distinct derived sub-stream per state.  Used to check that the
// stationary-start law equals the pi-weighted mixture of fixed-start
// laws.
EnsembleSummary mixture_of_fixed_starts(const MarkovKernel& kernel,
                                        const Observable& f, long n,
                                        long count, std::uint64_t master_seed,
                                        int threads = 0,
                                        std::vector<double> grid = {});

// Running maxima of the scaled partial sums of several observables at
// several horizons, one sweep per path.  For observable slot m and
// horizon slot i of path p:
//   max_value(p, m, i) = max_{0<=k<=n_i} |sum_{j<=k} g_m(xi_j)| / sqrt(n_i)
//   end_value(p, m, i) = |sum_{j<=n_i} g_m(xi_j)| / sqrt(n_i)
struct RemainderMaxima {
  long count = 0;
  std::vector<long> horizons;
  std::size_t tracks = 0;
  std::vector<double> max_values;  // count x tracks x horizons
  std::vector<double> end_values;

  double max_value(long p, std::size_t m, std::size_t i) const {
    return max_values[(static_cast<std::size_t>(p) * tracks + m) *
                          horizons.size() +
                      i];
  }
  double end_value(long p, std::size_t m, std::size_t i) const {
    return end_values[(static_cast<std::size_t>(p) * tracks + m) *
                          horizons.size() +
                      i];
  }
};
RemainderMaxima remainder_maxima(const MarkovKernel& kernel,
                                 const std::vector<std::vector<double>>& tracks,
                                 StartSpec start, std::vector<long> horizons,
                                 long count, std::uint64_t master_seed,
                                 int threads = 0);

// Re-derives the decomposition from the stored states alone and reports
// the worst relative mismatch of S_k = M_k + R_k over k <= n, plus the
// final components.  Independent of the arrays carried by the path.
struct DecompositionCheck {
  double max_relative_residual = 0.0;
  double s_n = 0.0;
  double martingale_n = 0.0;
  double remainder_n = 0.0;
};
DecompositionCheck decomposition_check(const MarkovKernel& kernel,
                                       const Observable& f,
                                       const MartingaleScheme& scheme,
                                       const PathSample& path);

// Empirical distributional check of the scaled endpoint against a
// centered normal with the supplied variance.  A zero variance switches
// to a concentration test: the fraction of |endpoint| above n^{-1/4}
// must not exceed alpha (plus allowance).
struct CltTestResult {
  bool degenerate = false;
  double ks_distance = 0.0;  // or tail fraction in the degenerate branch
  double critical = 0.0;
  double bias_allowance = 0.0;
  bool pass = false;
};
CltTestResult clt_test(const std::vector<double>& endpoints, long n,
                       double sigma_sq, double alpha = 0.05,
                       double bias_allowance = 0.005);
CltTestResult clt_test(const EnsembleSummary& ensemble, double sigma_sq,
                       double alpha = 0.05, double bias_allowance = 0.005);

// Functional counterpart: marginal check at every grid time against
// variance sigma_sq * [n t]/n, a running-maximum functional check
// against the reflection value P(sup <= 1) = 2 Phi(1) - 1, and an
// independence check of the first- and second-half increments when the
// grid contains t = 0.5 and t = 1.
struct FcltTestResult {
  std::vector<double> grid;
  std::vector<double> ks_per_time;
  double ks_critical = 0.0;
  bool marginals_pass = false;

  double sup_fraction = 0.0;   // empirical P(max_k S_k / (sigma sqrt n) <= 1)
  double sup_reference = 0.0;  // 2 Phi(1) - 1
  double sup_tolerance = 0.0;
  bool sup_pass = false;

  double increment_correlation = 0.0;
  double correlation_bound = 0.0;
  bool increments_pass = false;

  bool pass = false;
};
FcltTestResult fclt_test(const EnsembleSummary& ensemble, double sigma_sq,
                         double alpha = 0.05, double bias_allowance = 0.005,
                         double sup_tolerance = 0.01);

}  // namespace qclt
