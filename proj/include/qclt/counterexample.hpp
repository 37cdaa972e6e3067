#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <vector>

#include "qclt/errors.hpp"

namespace qclt {

// A finite-level product system on circle x sign sequence: K disjoint
// arcs A_k of length rho_k = a^k placed left to right with a uniform
// guard gap, a rotation by a small angle alpha = min_k eps_k / (2 N_k),
// and one Rademacher sign per nonpositive index.  The observable is
// f = sum_k e_{-N_k} 1_{A_k}.  The lag-i predictor of the shifted
// observable given time-zero information is
//   sum_k e_{-N_k+i} 1{i <= N_k} 1{A_k - i alpha},
// and the point of the construction is the contrast between the
// divergent weighted series of these predictors and the bounded
// expectation of their running supremum.
struct TruncatedExample {
  int K = 0;
  double a = 0.25;
  std::vector<double> rho;    // per level, rho_k = a^k
  std::vector<long> N;        // per-level window lengths
  std::vector<double> eps;    // per-level drift budgets
  std::vector<double> arc_start;  // left endpoints, ascending
  std::vector<double> arc_len;    // construction sets arc_len[k] = rho[k]
  double alpha = 0.0;             // rotation angle
  double gap = 0.0;               // guard space inserted before every arc
  std::uint64_t rademacher_seed = 0;

  long max_window() const {
    long widest = 0;
    for (long nk : N) widest = std::max(widest, nk);
    return widest;
  }
};

// Lays out the K-level system.  Default rules: N_k = 4^k, eps_k = 8^-k.
// The guard gap is alpha * max_k N_k, so a window-limited rotation of an
// arc never reaches the previous arc.  Throws ArcsDontFit when the arcs
// plus guard gaps exceed the circle.
TruncatedExample build_truncated_example(
    int K, double a = 0.25, const std::function<long(int)>& N_rule = {},
    const std::function<double(int)>& eps_rule = {},
    std::uint64_t rademacher_seed = 0);

// Re-derives the construction guarantees from the stored arcs: lengths
// within [(2/3) rho_k, rho_k], pairwise disjointness, total length below
// one, and the rotated-arc symmetric differences within eps_k across
// each level's window (exact interval arithmetic: the lag-d difference
// of an interval against itself measures 2 min(d alpha, length)).
struct ExampleInvariants {
  bool lengths_ok = false;
  bool disjoint = false;
  bool total_below_one = false;
  bool symdiff_ok = false;
  double total_length = 0.0;
  double min_gap = 0.0;            // smallest spacing between arcs
  double worst_symdiff_ratio = 0.0;  // max over levels of symdiff / eps_k
};
ExampleInvariants check_example(const TruncatedExample& ex);

// Sign history at nonpositive indices: signs[j] is the value at index
// -j, so signs[0] is the time-zero sign.  Values must be +-1.
struct RademacherHistory {
  std::vector<int> signs;
  int at_nonpositive(long index) const;  // requires index <= 0, in range
};

// The lag-i predictor as an evaluatable function of (circle point, sign
// history).  Exact: rotated-arc membership plus table lookup.  For
// i > max_k N_k the function is identically zero; i = N_k uses the
// time-zero sign on level k.
std::function<double(double, const RademacherHistory&)>
conditional_expectation(const TruncatedExample& ex, long i);

// Exact value of sum_{i <= i_max} E| f * predictor_i | by region
// decomposition: circle segments on which every arc membership is
// constant, Rademacher factors integrated by enumerating the sign
// patterns of the involved index set.  lower_bound is the pen-and-paper
// display sum_k N_k len(A_k) - sum_k N_k eps_k, and error_budget its
// subtracted term.  multi_level_regions counts segments where more than
// one level interacts (zero under the default guarded layout).
struct DivergentSeriesEstimate {
  double value = 0.0;
  double lower_bound = 0.0;
  double error_budget = 0.0;
  long i_max = 0;
  long multi_level_regions = 0;
};
DivergentSeriesEstimate divergent_series_estimate(const TruncatedExample& ex,
                                                  long i_max);

// Monte Carlo estimate over (uniform circle point, sign draws) of
//   sup_{1 <= n <= max N_k} | sum_{i <= n} predictor_i |,
// with the comparison value upper_bound = sum_k sqrt(N_k) len(A_k)
//                                           + sum_k N_k eps_k.
// Deterministic given the seed: draw d uses its own derived stream,
// circle point first, then signs for indices 0, -1, -2, ...
struct BoundedSupEstimate {
  double mc_estimate = 0.0;
  double std_error = 0.0;
  double upper_bound = 0.0;
  long count = 0;
};
BoundedSupEstimate bounded_sup_estimate(const TruncatedExample& ex, long count,
                                        std::uint64_t seed);

// Exact expectation of the same running supremum by full region x sign
// enumeration; feasible while max N_k <= 16 (throws TooLargeForExact
// beyond that).  regions reports the segment count.
struct BoundedSupExact {
  double value = 0.0;
  long regions = 0;
  double upper_bound = 0.0;
};
BoundedSupExact bounded_sup_exact(const TruncatedExample& ex);

}  // namespace qclt
