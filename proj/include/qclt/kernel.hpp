#pragma once

#include <string>
#include <vector>

#include "qclt/errors.hpp"

namespace qclt {

using Matrix = std::vector<std::vector<double>>;

// Structural diagnosis of a transition table.  Produced by check_ergodic,
// which accepts arbitrary stochastic tables (including reducible and
// periodic ones) so callers can report *why* a construction was rejected.
struct ErgodicityReport {
  bool irreducible = false;
  // gcd of cycle lengths through state 0's class; 1 means aperiodic.
  // For reducible tables this is the period of the class containing
  // state 0.
  int period = 0;
  bool ergodic = false;  // irreducible && period == 1
  // 1 - |second largest eigenvalue modulus| for small tables, otherwise a
  // Dobrushin contraction-coefficient lower bound (see gap_is_bound).
  double spectral_gap = 0.0;
  bool gap_is_bound = false;
  // Communicating classes as lists of state indices, in discovery order.
  std::vector<std::vector<int>> classes;
};

// Validated, immutable finite-state transition kernel.
//
// Construction succeeds only for ergodic (irreducible + aperiodic)
// tables.  Rows are renormalized to sum to one within 1e-12, the
// stationary law is solved eagerly and checked to satisfy pi Q = pi and
// sum(pi) = 1 within 1e-12 with every entry strictly positive.  All
// state is private and const-accessed, so a kernel can be shared across
// worker threads freely.
class MarkovKernel {
 public:
  // rows[x][y] = P(next = y | current = x).  Labels default to "0".."n-1".
  static MarkovKernel from_rows(const Matrix& rows,
                                std::vector<std::string> labels = {});

  int size() const { return n_; }
  double at(int x, int y) const { return p_[static_cast<std::size_t>(x) * n_ + y]; }
  const std::vector<double>& pi() const { return pi_; }
  const std::vector<std::string>& labels() const { return labels_; }
  const ErgodicityReport& ergodicity() const { return ergodicity_; }
  Matrix rows() const;

  // (Qf)(x) = sum_y Q(x,y) f(y).
  std::vector<double> apply(const std::vector<double>& f) const;

  // E_pi[f] = sum_x pi(x) f(x).
  double mean_under_pi(const std::vector<double>& f) const;

  // One transition by inverse-CDF lookup: the next state is the smallest
  // y with cdf(x, y) >= u, for u in (0, 1].  Boundary hits resolve to the
  // lower index and zero-probability states are never selected.
  int step(int x, double u) const;

 private:
  MarkovKernel() = default;

  int n_ = 0;
  std::vector<double> p_;    // row-major, renormalized
  std::vector<double> cdf_;  // row-major running sums, last entry forced to 1
  std::vector<double> pi_;
  std::vector<std::string> labels_;
  ErgodicityReport ergodicity_;
};

// Validates and builds a kernel from raw rows.  Throws NonStochasticRow
// if a row has a negative entry or sums away from one by more than 1e-9,
// NotErgodic if the table is reducible or periodic.
MarkovKernel build_kernel(const Matrix& rows,
                          std::vector<std::string> labels = {});

// Diagnoses an arbitrary stochastic table without constructing a kernel.
// Throws only NonStochasticRow.
ErgodicityReport check_ergodic(const Matrix& rows);

// Unique stationary law of an ergodic table: direct linear solve up to
// 64 states, averaged power iteration beyond.  Throws NotErgodic or
// NoConvergence.
std::vector<double> stationary_distribution(const Matrix& rows);

// 1 - |lambda_2| via a dense eigensolve up to 64 states; for larger
// tables returns the Dobrushin lower bound 1 - delta(Q) where delta is
// the maximal total-variation distance between rows.
double spectral_gap_estimate(const Matrix& rows, bool* is_bound = nullptr);

// Detailed balance pi(x) Q(x,y) = pi(y) Q(y,x) within tol, reported as
// the maximal absolute violation.
bool check_reversible(const MarkovKernel& kernel, double tol = 1e-12,
                      double* max_violation = nullptr);

// Random walk on a weighted undirected graph: Q(x,y) = w(x,y) / deg(x),
// with stationary law proportional to degree and detailed balance by
// construction.  `hold` in [0, 1) mixes in a self-loop probability,
// which leaves the stationary law untouched but makes bipartite graphs
// aperiodic.  Throws Disconnected for a disconnected weight graph.
MarkovKernel random_walk_kernel(const Matrix& weights, double hold = 0.0);

// Metropolis chain for a target law under a symmetric proposal table.
// Throws ZeroTargetWeight if the target has a zero or negative entry.
MarkovKernel metropolis_kernel(const std::vector<double>& target,
                               const Matrix& proposal);

// Lazy version hold * I + (1 - hold) * Q: same stationary law, strictly
// positive holding probability.  Requires hold in (0, 1).
MarkovKernel lazy(const MarkovKernel& kernel, double hold);

}  // namespace qclt
