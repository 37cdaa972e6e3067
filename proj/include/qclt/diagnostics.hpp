#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "qclt/kernel.hpp"
#include "qclt/operator_calculus.hpp"
#include "qclt/simulator.hpp"

namespace qclt {

// The sufficient conditions and inequalities this module evaluates.
// Limit statements are operationalized as finite-grid trend rules with
// documented thresholds; each evaluator's comment states its rule.
enum class ConditionId {
  NEGL_CLT,    // endpoint remainder negligibility
  NEGL_FCLT,   // running-maximum remainder negligibility
  UI_FMGF,     // decay (and uniform integrability) of f_m * g_f
  STRONG,      // summed cross-covariances of Q^m f against all lags
  LQ_GF,       // q-th moment of the sup of partial sums
  COBOUNDARY,  // balance-equation solvability with Holder control
  PROJECTIVE,  // summability of E_pi |f Q^j f|
  CONJ_DR,     // L1 convergence of f * (I + Q + ... + Q^n) f
  CONJ_KV,     // convergence of E_pi(f * (I + Q + ... + Q^n) f)
  MIXING_RIO,  // summability of the quantile-integral mixing series
};

const char* condition_name(ConditionId id);
ConditionId condition_from_name(const std::string& name);  // throws ConfigError

enum class Verdict { satisfied, violated, inconclusive };
const char* verdict_name(Verdict v);

struct ConditionReport {
  ConditionId condition_id = ConditionId::UI_FMGF;
  Verdict verdict = Verdict::inconclusive;
  // The sequence backing the verdict, as (index, value) pairs; the
  // index is m, n, j, or k depending on the condition.
  std::vector<std::pair<double, double>> sequence;
  std::map<std::string, double> tolerances;  // thresholds the verdict used
  std::map<std::string, double> values;      // extra named scalars
  std::string note;
};

// ----------------------------------------------------------- mixing profile

// Step-function quantile of |f| under pi: value vals[i] on
// [cuts[i-1], cuts[i]) with cuts[-1] = 0; cuts.back() = 1; vals
// nonincreasing.  q(u) = 0 for u >= 1.
struct QuantileFn {
  std::vector<double> cuts;
  std::vector<double> vals;
};
QuantileFn quantile_fn(const MarkovKernel& kernel,
                       const std::vector<double>& f);
double quantile_value(const QuantileFn& q, double u);
// Piecewise-exact integral of q^2 over [0, u]; u must lie in [0, 1].
double quantile_integral(const QuantileFn& q, double u);

// Mean absolute deviation between the conditional and unconditional
// distribution functions of f(xi_k) given xi_0, maximized over
// thresholds in the finite value set of f (where the supremum of the
// piecewise-constant deviation is attained).
double alpha_bar(const MarkovKernel& kernel, const std::vector<double>& f,
                 int k);

struct MixingProfile {
  std::vector<double> alpha_bars;  // lag 1 .. k_max
  QuantileFn quantile;
  std::vector<double> integrals;  // integral of q^2 over [0, alpha_bar_k]
};
MixingProfile mixing_profile(const MarkovKernel& kernel,
                             const std::vector<double>& f, int k_max);

// -------------------------------------------------------- condition probes

// Monte Carlo estimate of P^x(max_{j<=n} |rbar_j^m| / sqrt(n) > eps) for
// every (m, n) on the grids, where rbar^m is the running sum of the
// averaged remainder f_m.  With functional=false the endpoint
// |rbar_n^m| / sqrt(n) is used instead (the weaker endpoint condition).
// Verdict: satisfied when the per-m sup over the n grid is <= 0.05 at
// the largest m and does not grow across the m grid; violated when the
// sup grows and ends above the threshold; inconclusive otherwise.
ConditionReport negligibility_probe(const MarkovKernel& kernel,
                                    const Observable& f, int x,
                                    const std::vector<int>& m_grid,
                                    const std::vector<long>& n_grid,
                                    double eps, long count,
                                    std::uint64_t seed, bool functional = true,
                                    int threads = 0);

// Exact values E_pi|f_m g_f| per m plus tail expectations
// E_pi[|f_m g_f| 1{|f_m g_f| > M}] per (m, M) from level_grid.
// Verdict: satisfied when the value at the largest m is
// <= 1e-3 * E_pi|f g_f| and the trend is nonincreasing; violated when
// the trend grows above the threshold; inconclusive otherwise.
ConditionReport ui_probe(const MarkovKernel& kernel, const Observable& f,
                         const std::vector<int>& m_grid,
                         const std::vector<double>& level_grid);

// S(m) = sum_{j=1..j_max} E_pi|(Q^m f)(Q^j f)| plus a certified
// geometric tail.  Verdict: satisfied when S at the largest m is
// <= 1e-3 * S(1); trend rules as above.
ConditionReport strong_condition_series(const MarkovKernel& kernel,
                                        const Observable& f,
                                        const std::vector<int>& m_grid,
                                        long j_max = 100000);

// Partial sums of E_pi|f Q^j f| from j = 0 with a certified tail;
// always finite on finite ergodic spaces, so the verdict is satisfied
// with the limiting value reported.
ConditionReport projective_series(const MarkovKernel& kernel,
                                  const Observable& f, long j_max = 100000);

// a_n = E_pi|f v_{n+1}| and b_n = E_pi(f v_{n+1}) with
// v_{n+1} = (I + Q + ... + Q^n) f, for n <= n_max, with Cauchy-tail
// diagnostics (certified bounds on the remaining increments).  Reports
// only whether each sequence is certified convergent; no claim beyond
// the condition itself.
std::pair<ConditionReport, ConditionReport> conjecture_series(
    const MarkovKernel& kernel, const Observable& f, long n_max = 10000);

// Partial sums of the quantile-integral mixing series
// sum_j integral_0^{alpha_bar_j} q^2 du, with the tail certified from
// the geometric decay of alpha_bar_j.  Satisfied when certified finite.
ConditionReport mixing_clt_condition(const MarkovKernel& kernel,
                                     const Observable& f, int k_max = 200);

// lhs = E_pi|f Q^k f|; rhs = 3 * integral_0^{alpha_bar_k} q^2 du.
struct BoundCheck {
  double lhs = 0.0;
  double rhs = 0.0;
  bool holds = false;
};
BoundCheck covariance_bound_check(const MarkovKernel& kernel,
                                  const Observable& f, int k);

// E(max_{1<=k<=n} S_k^2) under the stationary start against
// 8 n E_pi f^2 + 16 sum_{k<n} E_pi|f sum_{i<=n-k} Q^i f|.  Exact path
// enumeration when |S|^{n+1} is small enough, Monte Carlo otherwise
// (then `holds` compares the estimate plus 3 standard errors).
// force_exact throws TooLargeForExact instead of falling back.
struct RioBoundCheck {
  bool exact = false;
  long n = 0;
  double lhs = 0.0;
  double lhs_se = 0.0;  // zero in exact mode
  double rhs = 0.0;
  bool holds = false;
};
RioBoundCheck rio_bound_check(const MarkovKernel& kernel, const Observable& f,
                              long n, long count = 20000,
                              std::uint64_t seed = 0x9D2C5680u,
                              bool force_exact = false, int threads = 0);

// Monte Carlo E^x(max_{1<=k<=n} S_k^2)/n across the horizon grid against
// the exact bound 24 E_pi|f g_f|; holds when the estimate at the
// largest horizon sits below the bound by at least 3 standard errors.
struct MaximalBoundCheck {
  std::vector<long> n_grid;
  std::vector<double> estimates;
  std::vector<double> std_errors;
  double bound = 0.0;
  bool holds = false;
};
MaximalBoundCheck maximal_bound_check(const MarkovKernel& kernel,
                                      const Observable& f, int x,
                                      const std::vector<long>& n_grid,
                                      long count, std::uint64_t seed,
                                      int threads = 0);

// (1/n) sum_{k=1..n} (Q^k h)(x) against E_pi h.
struct HopfCheck {
  double average = 0.0;
  double limit = 0.0;
  double gap = 0.0;
};
HopfCheck hopf_average_check(const MarkovKernel& kernel, const Observable& h,
                             int x, long n);

// Solves the balance equation h = (I - Q)^{-1} f and evaluates the
// Holder products (E|f_m|^p)^{1/p} (E|g_f|^q)^{1/q} across the m grid
// (sup norm when p is infinite).  The first report carries the product
// trend (satisfied when it decays to <= 1e-3 of its first value); the
// second reports the q-th moment of g_f, always finite here, with the
// sup-iterate ratio E(sup_n |Q^n h|^q)/E(|h|^q) recorded but never
// asserted against any bound.
struct CoboundaryCheck {
  ConditionReport coboundary;
  ConditionReport lq_gf;
};
CoboundaryCheck coboundary_check(const MarkovKernel& kernel,
                                 const Observable& f, double p, double q,
                                 const std::vector<int>& m_grid = {1, 10, 100,
                                                                   1000,
                                                                   3000});

}  // namespace qclt
