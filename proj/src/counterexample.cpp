#include "qclt/counterexample.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "qclt/rng.hpp"

namespace qclt {
namespace {

double frac(double x) {
  double f = x - std::floor(x);
  return (f >= 1.0) ? f - 1.0 : f;
}

bool in_arc(const TruncatedExample& ex, int k, double x) {
  return x >= ex.arc_start[k] && x < ex.arc_start[k] + ex.arc_len[k];
}

// Exact mean of |(sum of signs at ia) * (sum of signs at ib)| over
// independent fair signs, by enumerating the union's sign patterns.
// Shared indices (the same sign appearing in both factors) are handled
// by construction.
double abs_product_mean(const std::vector<long>& ia,
                        const std::vector<long>& ib) {
  std::vector<long> all = ia;
  all.insert(all.end(), ib.begin(), ib.end());
  std::sort(all.begin(), all.end());
  all.erase(std::unique(all.begin(), all.end()), all.end());
  const int r = static_cast<int>(all.size());
  if (r > 24) throw TooLargeForExact("sign pattern enumeration too large");
  auto position = [&](long idx) {
    return static_cast<int>(
        std::lower_bound(all.begin(), all.end(), idx) - all.begin());
  };
  double acc = 0.0;
  const unsigned long patterns = 1ul << r;
  for (unsigned long mask = 0; mask < patterns; ++mask) {
    double sa = 0.0, sb = 0.0;
    for (long idx : ia)
      sa += ((mask >> position(idx)) & 1ul) ? 1.0 : -1.0;
    for (long idx : ib)
      sb += ((mask >> position(idx)) & 1ul) ? 1.0 : -1.0;
    acc += std::abs(sa * sb);
  }
  return acc / static_cast<double>(patterns);
}

}  // namespace

TruncatedExample build_truncated_example(
    int K, double a, const std::function<long(int)>& N_rule,
    const std::function<double(int)>& eps_rule,
    std::uint64_t rademacher_seed) {
  if (K < 1) throw std::invalid_argument("level count must be >= 1");
  if (!(a > 0.0 && a < 1.0))
    throw std::invalid_argument("base must lie in (0, 1)");

  TruncatedExample ex;
  ex.K = K;
  ex.a = a;
  ex.rademacher_seed = rademacher_seed;
  long n_max = 0;
  for (int k = 1; k <= K; ++k) {
    const double rho = std::pow(a, k);
    const long nk = N_rule ? N_rule(k)
                           : static_cast<long>(std::llround(std::pow(4.0, k)));
    const double ek = eps_rule ? eps_rule(k) : std::pow(8.0, -k);
    if (nk < 1) throw std::invalid_argument("window rule produced N_k < 1");
    if (!(ek > 0.0))
      throw std::invalid_argument("drift rule produced eps_k <= 0");
    ex.rho.push_back(rho);
    ex.N.push_back(nk);
    ex.eps.push_back(ek);
    n_max = std::max(n_max, nk);
  }

  double alpha = ex.eps[0] / (2.0 * static_cast<double>(ex.N[0]));
  for (int k = 1; k < K; ++k)
    alpha = std::min(alpha, ex.eps[k] / (2.0 * static_cast<double>(ex.N[k])));
  ex.alpha = alpha;
  ex.gap = alpha * static_cast<double>(n_max);

  double cursor = 0.0;
  for (int k = 0; k < K; ++k) {
    cursor += ex.gap;
    ex.arc_start.push_back(cursor);
    ex.arc_len.push_back(ex.rho[k]);
    cursor += ex.rho[k];
  }
  if (cursor > 1.0) {
    std::ostringstream msg;
    msg << "arcs plus guard gaps need measure " << cursor
        << " but the circle has measure 1";
    throw ArcsDontFit(msg.str());
  }
  return ex;
}

ExampleInvariants check_example(const TruncatedExample& ex) {
  ExampleInvariants inv;
  inv.lengths_ok = true;
  inv.disjoint = true;
  inv.symdiff_ok = true;
  for (int k = 0; k < ex.K; ++k) {
    const double len = ex.arc_len[k];
    inv.total_length += len;
    if (!(len >= (2.0 / 3.0) * ex.rho[k] && len <= ex.rho[k]))
      inv.lengths_ok = false;
    if (k + 1 < ex.K) {
      const double space = ex.arc_start[k + 1] - (ex.arc_start[k] + len);
      if (space <= 0.0) inv.disjoint = false;
      inv.min_gap = (k == 0) ? space : std::min(inv.min_gap, space);
    }
  }
  const double wrap = (1.0 - (ex.arc_start.back() + ex.arc_len.back())) +
                      ex.arc_start.front();
  inv.min_gap = (ex.K == 1) ? wrap : std::min(inv.min_gap, wrap);
  if (ex.arc_start.front() < 0.0 ||
      ex.arc_start.back() + ex.arc_len.back() > 1.0)
    inv.disjoint = false;
  inv.total_below_one = inv.total_length < 1.0;

  // Rotating an interval by d alpha against itself differs on a set of
  // measure 2 min(d alpha, length); the window maximum is at d = N_k.
  for (int k = 0; k < ex.K; ++k) {
    for (long d = 1; d <= ex.N[k]; ++d) {
      const double sym =
          2.0 * std::min(static_cast<double>(d) * ex.alpha, ex.arc_len[k]);
      const double ratio = sym / ex.eps[k];
      inv.worst_symdiff_ratio = std::max(inv.worst_symdiff_ratio, ratio);
      if (ratio > 1.0 + 1e-12) inv.symdiff_ok = false;
    }
  }
  return inv;
}

int RademacherHistory::at_nonpositive(long index) const {
  if (index > 0)
    throw std::invalid_argument("sign history covers nonpositive indices");
  const long j = -index;
  if (j >= static_cast<long>(signs.size()))
    throw std::invalid_argument("sign history shorter than requested index");
  return signs[static_cast<std::size_t>(j)];
}

std::function<double(double, const RademacherHistory&)>
conditional_expectation(const TruncatedExample& ex, long i) {
  if (i < 1) throw std::invalid_argument("lag must be >= 1");
  return [ex, i](double c, const RademacherHistory& history) {
    const double rotated = frac(frac(c) + static_cast<double>(i) * ex.alpha);
    double total = 0.0;
    for (int k = 0; k < ex.K; ++k) {
      if (i <= ex.N[k] && in_arc(ex, k, rotated))
        total += history.at_nonpositive(i - ex.N[k]);
    }
    return total;
  };
}

DivergentSeriesEstimate divergent_series_estimate(const TruncatedExample& ex,
                                                  long i_max) {
  if (i_max < ex.max_window())
    throw std::invalid_argument(
        "i_max must cover the largest level window (later terms vanish)");

  DivergentSeriesEstimate out;
  out.i_max = i_max;
  for (int k = 0; k < ex.K; ++k) {
    const double budget =
        static_cast<double>(ex.N[k]) * ex.eps[k];
    out.lower_bound += static_cast<double>(ex.N[k]) * ex.arc_len[k] - budget;
    out.error_budget += budget;
  }

  long n_max = 0;
  for (long nk : ex.N) n_max = std::max(n_max, nk);

  std::vector<double> pts;
  std::vector<int> hit_f, hit_p;
  for (long i = 1; i <= std::min(i_max, n_max); ++i) {
    // Segment the circle by every boundary of A_u and of A_k - i alpha
    // (the latter only for windows still active at lag i).
    pts.clear();
    pts.push_back(0.0);
    pts.push_back(1.0);
    for (int u = 0; u < ex.K; ++u) {
      pts.push_back(ex.arc_start[u]);
      pts.push_back(ex.arc_start[u] + ex.arc_len[u]);
      if (i <= ex.N[u]) {
        pts.push_back(frac(ex.arc_start[u] - static_cast<double>(i) * ex.alpha));
        pts.push_back(
            frac(ex.arc_start[u] + ex.arc_len[u] - static_cast<double>(i) * ex.alpha));
      }
    }
    std::sort(pts.begin(), pts.end());
    pts.erase(std::unique(pts.begin(), pts.end()), pts.end());

    for (std::size_t s = 0; s + 1 < pts.size(); ++s) {
      const double lo = pts[s], hi = pts[s + 1];
      const double len = hi - lo;
      if (len <= 0.0) continue;
      const double mid = lo + 0.5 * len;
      const double rotated = frac(mid + static_cast<double>(i) * ex.alpha);

      hit_f.clear();
      hit_p.clear();
      for (int k = 0; k < ex.K; ++k) {
        if (in_arc(ex, k, mid)) hit_f.push_back(k);
        if (i <= ex.N[k] && in_arc(ex, k, rotated)) hit_p.push_back(k);
      }
      if (hit_f.empty() || hit_p.empty()) continue;

      double weight;
      if (hit_f.size() == 1 && hit_p.size() == 1) {
        // A product of two signs has absolute value one whether or not
        // the indices coincide.
        weight = 1.0;
        if (hit_f[0] != hit_p[0]) ++out.multi_level_regions;
      } else {
        ++out.multi_level_regions;
        std::vector<long> ia, ib;
        for (int u : hit_f) ia.push_back(-ex.N[u]);
        for (int k : hit_p) ib.push_back(i - ex.N[k]);
        weight = abs_product_mean(ia, ib);
      }
      out.value += len * weight;
    }
  }
  return out;
}

namespace {

double sup_upper_bound(const TruncatedExample& ex) {
  double bound = 0.0;
  for (int k = 0; k < ex.K; ++k)
    bound += std::sqrt(static_cast<double>(ex.N[k])) * ex.arc_len[k] +
             static_cast<double>(ex.N[k]) * ex.eps[k];
  return bound;
}

}  // namespace

BoundedSupEstimate bounded_sup_estimate(const TruncatedExample& ex, long count,
                                        std::uint64_t seed) {
  if (count < 1000)
    throw std::invalid_argument("supremum estimate needs at least 1000 draws");

  long widest = 0;
  for (long nk : ex.N) widest = std::max(widest, nk);

  BoundedSupEstimate out;
  out.count = count;
  out.upper_bound = sup_upper_bound(ex);

  std::vector<int> signs(static_cast<std::size_t>(widest));
  double mean = 0.0, sq = 0.0;
  for (long d = 0; d < count; ++d) {
    rng::PathRng rng(seed, static_cast<std::uint64_t>(d));
    double c = rng.next_unit();
    if (c >= 1.0) c = 0.0;
    // signs[j] is the sign at index -j; e_0 is drawn first.
    for (long j = 0; j < widest; ++j)
      signs[static_cast<std::size_t>(j)] = rng.next_unit() > 0.5 ? 1 : -1;

    double running = 0.0, sup = 0.0;
    for (long i = 1; i <= widest; ++i) {
      const double rotated = frac(c + static_cast<double>(i) * ex.alpha);
      double v = 0.0;
      for (int k = 0; k < ex.K; ++k) {
        if (i <= ex.N[k] && in_arc(ex, k, rotated))
          v += signs[static_cast<std::size_t>(ex.N[k] - i)];
      }
      running += v;
      sup = std::max(sup, std::abs(running));
    }
    mean += sup;
    sq += sup * sup;
  }
  mean /= static_cast<double>(count);
  const double var =
      std::max(0.0, sq / static_cast<double>(count) - mean * mean);
  out.mc_estimate = mean;
  out.std_error = std::sqrt(var / static_cast<double>(count));
  return out;
}

BoundedSupExact bounded_sup_exact(const TruncatedExample& ex) {
  long widest = 0;
  for (long nk : ex.N) widest = std::max(widest, nk);
  if (widest > 16)
    throw TooLargeForExact(
        "exact supremum enumeration needs max N_k <= 16 sign draws");

  BoundedSupExact out;
  out.upper_bound = sup_upper_bound(ex);

  // Circle segments on which every step's arc memberships are constant.
  std::vector<double> pts = {0.0, 1.0};
  for (int k = 0; k < ex.K; ++k) {
    for (long i = 1; i <= ex.N[k]; ++i) {
      pts.push_back(frac(ex.arc_start[k] - static_cast<double>(i) * ex.alpha));
      pts.push_back(frac(ex.arc_start[k] + ex.arc_len[k] -
                         static_cast<double>(i) * ex.alpha));
    }
  }
  std::sort(pts.begin(), pts.end());
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());

  const unsigned long patterns = 1ul << widest;
  std::vector<std::vector<int>> active(static_cast<std::size_t>(widest) + 1);
  for (std::size_t s = 0; s + 1 < pts.size(); ++s) {
    const double lo = pts[s], hi = pts[s + 1];
    const double len = hi - lo;
    if (len <= 0.0) continue;
    const double mid = lo + 0.5 * len;

    bool any = false;
    for (long i = 1; i <= widest; ++i) {
      auto& row = active[static_cast<std::size_t>(i)];
      row.clear();
      const double rotated = frac(mid + static_cast<double>(i) * ex.alpha);
      for (int k = 0; k < ex.K; ++k)
        if (i <= ex.N[k] && in_arc(ex, k, rotated)) {
          row.push_back(static_cast<int>(ex.N[k] - i));
          any = true;
        }
    }
    ++out.regions;
    if (!any) continue;  // masked walk is identically zero here

    double seg_mean = 0.0;
    for (unsigned long mask = 0; mask < patterns; ++mask) {
      double running = 0.0, sup = 0.0;
      for (long i = 1; i <= widest; ++i) {
        for (int j : active[static_cast<std::size_t>(i)])
          running += ((mask >> j) & 1ul) ? 1.0 : -1.0;
        sup = std::max(sup, std::abs(running));
      }
      seg_mean += sup;
    }
    seg_mean /= static_cast<double>(patterns);
    out.value += len * seg_mean;
  }
  return out;
}

}  // namespace qclt
