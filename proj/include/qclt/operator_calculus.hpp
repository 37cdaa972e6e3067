#pragma once

#include <functional>
#include <vector>

#include "qclt/kernel.hpp"

namespace qclt {

// A function on states, tagged with its stationary mean so centering
// status is explicit rather than re-derived at every call site.
struct Observable {
  std::vector<double> values;
  double mean_under_pi = 0.0;

  bool centered(double tol = 1e-12) const {
    return std::abs(mean_under_pi) <= tol;
  }
};

// Attaches the stationary mean to raw values.
Observable make_observable(const MarkovKernel& kernel,
                           std::vector<double> values);

// Subtracts the stationary mean; the result has mean zero within 1e-12.
Observable center(const MarkovKernel& kernel, const std::vector<double>& raw);

// Q^j f by repeated application.
std::vector<double> iterate_Q(const MarkovKernel& kernel,
                              const std::vector<double>& f, int j);

// v_k = (I + Q + ... + Q^{k-1}) f, the k-term partial sum of operator
// iterates starting at the identity.
std::vector<double> partial_sum_v(const MarkovKernel& kernel,
                                  const std::vector<double>& f, int k);

// f_m = (1/m) (Q + Q^2 + ... + Q^m) f, the averaged remainder observable.
std::vector<double> averaged_remainder(const MarkovKernel& kernel,
                                       const std::vector<double>& f, int m);

// Proof that a nonnegative scalar series was truncated safely: from
// truncation_j on, terms were observed to shrink by at least `ratio`
// per step over a stabilization window, giving the geometric tail bound.
struct TailCertificate {
  long truncation_j = 0;
  double ratio = 0.0;
  double tail_bound = 0.0;
};

// One truncated series: the accumulated terms, their exact sum, and the
// certificate bounding everything dropped after the last term.
struct CertifiedSeries {
  std::vector<double> terms;
  double sum = 0.0;
  TailCertificate certificate;
};

// Sums term(j) for j = first_j, first_j + 1, ... until the geometric
// tail of dominator(j) (a nonnegative bound with |term(j)| <=
// dominator(j)) is certified below tail_tol * max(1, |sum|).  Both
// callbacks are invoked once per index in increasing order — term(j)
// first, dominator(j) second — so they may share iterate state.  An
// empty dominator defaults to |term(j)|.  scale_hint tells the
// certifier the series' natural leading magnitude when first_j skips
// it, so a series that opens at rounding level can still close.
// Throws NoGeometricCertificate once term_cap terms fail to certify.
CertifiedSeries sum_certified(
    long first_j, double tail_tol, const std::function<double(long)>& term,
    const std::function<double(long)>& dominator = {},
    long term_cap = 1000000, double scale_hint = 0.0);

// g(x) = sup_{n >= 0} | sum_{j=0}^{n} (Q^j f)(x) |, evaluated pointwise
// with a certified truncation of the iterate series.  Requires centered
// f.  Throws NoGeometricCertificate if the term sequence never certifies
// a decaying tail before the cap.
struct SupPartialSums {
  std::vector<double> values;
  TailCertificate certificate;
};
SupPartialSums sup_partial_sums(const MarkovKernel& kernel,
                                const Observable& f);

// Solution of (I - Q) h = f with E_pi[h] = 0, for centered f.  Direct
// dense solve up to 512 states, certified iterate series beyond.
// Residual is verified to 1e-10.  Throws SolveFailed.
std::vector<double> poisson_solve(const MarkovKernel& kernel,
                                  const Observable& f);

// sigma^2 = E_pi[f^2] + 2 sum_{j>=1} E_pi[f Q^j f], with the series
// truncated under a certified geometric tail.  The reported sigma_sq
// equals second_moment + 2 * sum(series_terms) exactly; tail_bound
// bounds the dropped mass.  Values in (-1e-9, 0) are clamped to zero;
// anything lower throws NegativeVariance.
struct VarianceReport {
  double sigma_sq = 0.0;
  double second_moment = 0.0;
  std::vector<double> series_terms;  // E_pi[f Q^j f] for j = 1..truncation_j
  long truncation_j = 0;
  double tail_bound = 0.0;
  bool clamped = false;
};
VarianceReport long_run_variance(const MarkovKernel& kernel,
                                 const Observable& f);

// The m-averaged martingale construction: theta = (1/m) sum_{k=1}^m v_k,
// difference table d(x, y) = theta(y) - (Q theta)(x), exact one-step
// variance sigma_m_sq = sum_x pi(x) sum_y Q(x,y) d(x,y)^2, and the
// averaged remainder f_m.  The identity theta - Q theta = f - f_m is
// verified at construction to 1e-12.
class MartingaleScheme {
 public:
  MartingaleScheme(const MarkovKernel& kernel, const Observable& f, int m);

  int m() const { return m_; }
  const std::vector<double>& theta() const { return theta_; }
  const std::vector<double>& q_theta() const { return q_theta_; }
  const std::vector<double>& remainder() const { return f_m_; }
  double sigma_m_sq() const { return sigma_m_sq_; }

  // Martingale difference contributed by the transition x -> y.
  double d(int x, int y) const { return theta_[y] - q_theta_[x]; }

  // Dense n-by-n difference table; intended for small state spaces.
  Matrix d_table() const;

 private:
  int m_ = 0;
  int n_ = 0;
  std::vector<double> theta_;
  std::vector<double> q_theta_;
  std::vector<double> f_m_;
  double sigma_m_sq_ = 0.0;
};

}  // namespace qclt
