#include "qclt/operator_calculus.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <deque>
#include <sstream>

namespace qclt {
namespace {

constexpr long kTermCap = 1000000;  // hard cap on iterate series length
constexpr int kRatioWindow = 10;    // consecutive ratios needed to certify
constexpr int kDirectSolveLimit = 512;

double sup_norm(const std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

void require_centered(const Observable& f, const char* what) {
  if (!f.centered(1e-10)) {
    std::ostringstream msg;
    msg << what << " requires a centered observable (stationary mean is "
        << f.mean_under_pi << ")";
    throw std::invalid_argument(msg.str());
  }
}

// Watches the sup norms t_j of an iterate sequence and certifies a
// geometric tail once the term-to-term ratios sit below one and agree
// with each other for a full window.  A block-maximum variant covers
// sequences whose per-term ratios oscillate (complex second eigenvalue)
// while the block envelope still decays cleanly.
class GeometricTailTracker {
 public:
  void feed(double t) {
    ++count_;
    last_ = t;
    scale_ = std::max(scale_, t);
    if (t <= 1e-300) {  // series died out exactly; nothing left to bound
      certified_ = true;
      ratio_ = 0.0;
      tail_ = 0.0;
      prev_ = -1.0;
      return;
    }
    if (t <= scale_ * 1e-14) {
      // The term sits at the rounding floor of the series' leading
      // magnitude (e.g. operator iterates of an observable on an exact
      // null eigenline leave ~1e-16-scale junk).  The continuation is
      // numerically indistinguishable from zero at double resolution;
      // the tail reports one sub-resolution quantum, not a bound on an
      // indefinitely extended junk sum — consumers stop at
      // certification, so exactly one decision rests on it.
      certified_ = true;
      ratio_ = 0.0;
      tail_ = scale_ * 1e-13;
      prev_ = -1.0;
      return;
    }
    if (prev_ > 0.0) {
      ratios_.push_back(t / prev_);
      if (static_cast<int>(ratios_.size()) > kRatioWindow)
        ratios_.pop_front();
    }
    prev_ = t;

    block_max_ = std::max(block_max_, t);
    if (count_ % kBlock == 0) {
      if (prev_block_ > 0.0) {
        block_ratios_.push_back(block_max_ / prev_block_);
        if (static_cast<int>(block_ratios_.size()) > 3)
          block_ratios_.pop_front();
      }
      prev_block_ = block_max_;
      block_max_ = 0.0;
    }
    update_certificate();
  }

  // Raises the junk-floor reference when the series' natural leading
  // magnitude is known but never fed (series that start at j >= 1 may
  // open directly at the rounding floor).
  void prime_scale(double s) { scale_ = std::max(scale_, s); }

  bool certified() const { return certified_; }
  double ratio() const { return ratio_; }
  long count() const { return count_; }

  // Bound on the sum of all terms after the most recently fed one.
  double tail_bound() const { return tail_; }

 private:
  void update_certificate() {
    certified_ = false;
    if (static_cast<int>(ratios_.size()) == kRatioWindow) {
      double lo = ratios_[0], hi = ratios_[0];
      for (double r : ratios_) {
        lo = std::min(lo, r);
        hi = std::max(hi, r);
      }
      if (hi < 1.0 - 1e-9 && hi - lo <= 1e-3 * hi + 1e-15) {
        ratio_ = std::min(hi * (1.0 + 1e-6), 1.0 - 1e-9);
        tail_ = last_ * ratio_ / (1.0 - ratio_);
        certified_ = true;
        return;
      }
    }
    if (static_cast<int>(block_ratios_.size()) == 3) {
      double hi = *std::max_element(block_ratios_.begin(), block_ratios_.end());
      if (hi < 1.0 - 1e-9) {
        const double beta = std::min(hi * (1.0 + 1e-6), 1.0 - 1e-9);
        // Future whole blocks are bounded by the last block's peak times
        // decaying powers of beta; kBlock terms per block.
        ratio_ = beta;
        tail_ = kBlock * prev_block_ * beta / (1.0 - beta) +
                kBlock * prev_block_;  // partial current block, conservatively
        certified_ = true;
      }
    }
  }

  static constexpr int kBlock = 10;
  std::deque<double> ratios_;
  std::deque<double> block_ratios_;
  double prev_ = -1.0;
  double scale_ = 0.0;
  double last_ = 0.0;
  double block_max_ = 0.0;
  double prev_block_ = -1.0;
  long count_ = 0;
  bool certified_ = false;
  double ratio_ = 0.0;
  double tail_ = 0.0;
};

Eigen::MatrixXd kernel_matrix(const MarkovKernel& k) {
  const int n = k.size();
  Eigen::MatrixXd q(n, n);
  for (int x = 0; x < n; ++x)
    for (int y = 0; y < n; ++y) q(x, y) = k.at(x, y);
  return q;
}

// Exact removal of the residual stationary mean before iterating.  A
// no-op up to rounding for a centered observable, but essential for the
// geometric certificates: the iterate sequence converges to (pi f) * 1,
// and any residual mean would put a constant plateau under the decay.
std::vector<double> recentered(const MarkovKernel& kernel,
                               std::vector<double> values) {
  const double mean = kernel.mean_under_pi(values);
  for (double& v : values) v -= mean;
  return values;
}

}  // namespace

Observable make_observable(const MarkovKernel& kernel,
                           std::vector<double> values) {
  if (static_cast<int>(values.size()) != kernel.size())
    throw std::invalid_argument("observable size does not match state count");
  Observable f;
  f.mean_under_pi = kernel.mean_under_pi(values);
  f.values = std::move(values);
  return f;
}

Observable center(const MarkovKernel& kernel, const std::vector<double>& raw) {
  Observable f = make_observable(kernel, raw);
  for (double& v : f.values) v -= f.mean_under_pi;
  f.mean_under_pi = kernel.mean_under_pi(f.values);
  return f;
}

std::vector<double> iterate_Q(const MarkovKernel& kernel,
                              const std::vector<double>& f, int j) {
  if (j < 0) throw std::invalid_argument("iterate count must be nonnegative");
  std::vector<double> out = f;
  for (int i = 0; i < j; ++i) out = kernel.apply(out);
  return out;
}

std::vector<double> partial_sum_v(const MarkovKernel& kernel,
                                  const std::vector<double>& f, int k) {
  if (k < 1) throw std::invalid_argument("partial sum needs k >= 1");
  std::vector<double> acc = f;
  std::vector<double> power = f;
  for (int j = 1; j < k; ++j) {
    power = kernel.apply(power);
    for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += power[i];
  }
  return acc;
}

std::vector<double> averaged_remainder(const MarkovKernel& kernel,
                                       const std::vector<double>& f, int m) {
  if (m < 1) throw std::invalid_argument("averaging window needs m >= 1");
  std::vector<double> power = f;
  std::vector<double> acc(f.size(), 0.0);
  for (int j = 1; j <= m; ++j) {
    power = kernel.apply(power);
    for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += power[i];
  }
  for (double& v : acc) v /= m;
  return acc;
}

CertifiedSeries sum_certified(long first_j, double tail_tol,
                              const std::function<double(long)>& term,
                              const std::function<double(long)>& dominator,
                              long term_cap, double scale_hint) {
  if (tail_tol <= 0.0)
    throw std::invalid_argument("tail tolerance must be positive");
  CertifiedSeries out;
  GeometricTailTracker tracker;
  if (scale_hint > 0.0) tracker.prime_scale(scale_hint);
  for (long j = first_j;; ++j) {
    const double t = term(j);
    const double dom = dominator ? dominator(j) : std::abs(t);
    out.terms.push_back(t);
    out.sum += t;
    tracker.feed(dom);
    if (tracker.certified() &&
        tracker.tail_bound() <= tail_tol * std::max(1.0, std::abs(out.sum)))
      break;
    if (tracker.count() >= std::min(term_cap, kTermCap))
      throw NoGeometricCertificate(
          "series never certified a geometric tail before the term cap");
  }
  out.certificate = {first_j + static_cast<long>(out.terms.size()) - 1,
                     tracker.ratio(), tracker.tail_bound()};
  return out;
}

SupPartialSums sup_partial_sums(const MarkovKernel& kernel,
                                const Observable& f) {
  require_centered(f, "sup of partial sums");
  const int n = kernel.size();
  std::vector<double> partial =
      recentered(kernel, f.values);        // sum_{j<=J} Q^j f, J = 0
  std::vector<double> power = partial;
  std::vector<double> sup(n);
  for (int x = 0; x < n; ++x) sup[x] = std::abs(partial[x]);

  GeometricTailTracker tracker;
  tracker.feed(sup_norm(power));
  while (true) {
    const double scale = std::max(1.0, sup_norm(sup));
    if (tracker.certified() && tracker.tail_bound() <= 1e-12 * scale) break;
    if (tracker.count() >= kTermCap)
      throw NoGeometricCertificate(
          "iterate series never certified a geometric tail");
    power = kernel.apply(power);
    for (int x = 0; x < n; ++x) {
      partial[x] += power[x];
      sup[x] = std::max(sup[x], std::abs(partial[x]));
    }
    tracker.feed(sup_norm(power));
  }

  SupPartialSums out;
  out.values = std::move(sup);
  out.certificate = {tracker.count() - 1, tracker.ratio(),
                     tracker.tail_bound()};
  return out;
}

std::vector<double> poisson_solve(const MarkovKernel& kernel,
                                  const Observable& f) {
  require_centered(f, "the balance equation");
  const int n = kernel.size();

  std::vector<double> h(n, 0.0);
  if (n <= kDirectSolveLimit) {
    // (I - Q + 1 pi^T) h = f has the centered solution of (I - Q) h = f
    // as its unique solution.
    Eigen::MatrixXd a =
        Eigen::MatrixXd::Identity(n, n) - kernel_matrix(kernel);
    for (int x = 0; x < n; ++x)
      for (int y = 0; y < n; ++y) a(x, y) += kernel.pi()[y];
    Eigen::VectorXd b(n);
    for (int x = 0; x < n; ++x) b(x) = f.values[x];
    auto lu = a.partialPivLu();
    Eigen::VectorXd sol = lu.solve(b);
    sol += lu.solve(b - a * sol);  // one iterative refinement step
    for (int x = 0; x < n; ++x) h[x] = sol(x);
  } else {
    // Iterate series h = sum_j Q^j f under a certified geometric tail.
    std::vector<double> power = recentered(kernel, f.values);
    GeometricTailTracker tracker;
    tracker.feed(sup_norm(power));
    for (int x = 0; x < n; ++x) h[x] += power[x];
    while (!(tracker.certified() &&
             tracker.tail_bound() <= 1e-11 * std::max(1.0, sup_norm(h)))) {
      if (tracker.count() >= kTermCap)
        throw NoGeometricCertificate(
            "iterate series never certified a geometric tail");
      power = kernel.apply(power);
      for (int x = 0; x < n; ++x) h[x] += power[x];
      tracker.feed(sup_norm(power));
    }
  }

  // Exact centering followed by a residual check.
  const double mean = kernel.mean_under_pi(h);
  for (double& v : h) v -= mean;
  std::vector<double> qh = kernel.apply(h);
  double residual = 0.0;
  for (int x = 0; x < n; ++x)
    residual = std::max(residual, std::abs(h[x] - qh[x] - f.values[x]));
  if (residual > 1e-10) {
    std::ostringstream msg;
    msg << "balance equation residual " << residual << " exceeds 1e-10";
    throw SolveFailed(msg.str());
  }
  return h;
}

VarianceReport long_run_variance(const MarkovKernel& kernel,
                                 const Observable& f) {
  require_centered(f, "long-run variance");
  const int n = kernel.size();
  VarianceReport report;
  for (int x = 0; x < n; ++x)
    report.second_moment += kernel.pi()[x] * f.values[x] * f.values[x];

  double abs_mean = 0.0;
  for (int x = 0; x < n; ++x)
    abs_mean += kernel.pi()[x] * std::abs(f.values[x]);

  const double scale = std::max(1.0, report.second_moment);
  std::vector<double> power = recentered(kernel, f.values);
  GeometricTailTracker tracker;
  // The series is fed from j = 1; prime the junk floor with the j = 0
  // dominator so a series that opens at rounding level still certifies.
  tracker.prime_scale(abs_mean * sup_norm(power));
  double series_sum = 0.0;
  while (true) {
    power = kernel.apply(power);
    double term = 0.0;
    for (int x = 0; x < n; ++x)
      term += kernel.pi()[x] * f.values[x] * power[x];
    report.series_terms.push_back(term);
    series_sum += term;
    // |E_pi[f Q^j f]| <= E_pi|f| * sup|Q^j f| dominates the series.
    tracker.feed(abs_mean * sup_norm(power));
    if (tracker.certified() && tracker.tail_bound() <= 1e-12 * scale) break;
    if (tracker.count() >= kTermCap)
      throw NoGeometricCertificate(
          "covariance series never certified a geometric tail");
  }
  report.truncation_j = static_cast<long>(report.series_terms.size());
  report.tail_bound = tracker.tail_bound();
  report.sigma_sq = report.second_moment + 2.0 * series_sum;

  if (report.sigma_sq < 0.0) {
    if (report.sigma_sq <= -1e-9) {
      std::ostringstream msg;
      msg << "long-run variance evaluated to " << report.sigma_sq;
      throw NegativeVariance(msg.str());
    }
    report.sigma_sq = 0.0;
    report.clamped = true;
  }
  return report;
}

MartingaleScheme::MartingaleScheme(const MarkovKernel& kernel,
                                   const Observable& f, int m)
    : m_(m), n_(kernel.size()) {
  if (m < 1) throw std::invalid_argument("averaging window needs m >= 1");
  require_centered(f, "the martingale construction");

  // Accumulate v_k = (I + ... + Q^{k-1}) f and theta = (1/m) sum_k v_k
  // in one sweep; after the loop `power` holds Q^{m-1} f.
  std::vector<double> power = f.values;
  std::vector<double> v = f.values;
  theta_ = f.values;  // k = 1 contribution
  for (int k = 2; k <= m; ++k) {
    power = kernel.apply(power);
    for (int x = 0; x < n_; ++x) {
      v[x] += power[x];
      theta_[x] += v[x];
    }
  }
  for (double& t : theta_) t /= m;

  q_theta_ = kernel.apply(theta_);

  // f_m = (v_m + Q^m f - f) / m reuses the final iterate.
  power = kernel.apply(power);  // now Q^m f
  f_m_.resize(n_);
  for (int x = 0; x < n_; ++x)
    f_m_[x] = (v[x] + power[x] - f.values[x]) / m;

  // Construction identity theta - Q theta = f - f_m.
  const double tol =
      1e-12 * std::max(1.0, sup_norm(theta_));
  for (int x = 0; x < n_; ++x) {
    const double lhs = theta_[x] - q_theta_[x];
    const double rhs = f.values[x] - f_m_[x];
    if (std::abs(lhs - rhs) > tol)
      throw std::logic_error(
          "martingale construction identity failed; averaging is inconsistent");
  }

  for (int x = 0; x < n_; ++x) {
    double row = 0.0;
    for (int y = 0; y < n_; ++y) {
      const double diff = theta_[y] - q_theta_[x];
      row += kernel.at(x, y) * diff * diff;
    }
    sigma_m_sq_ += kernel.pi()[x] * row;
  }
}

Matrix MartingaleScheme::d_table() const {
  Matrix out(n_, std::vector<double>(n_));
  for (int x = 0; x < n_; ++x)
    for (int y = 0; y < n_; ++y) out[x][y] = d(x, y);
  return out;
}

}  // namespace qclt
