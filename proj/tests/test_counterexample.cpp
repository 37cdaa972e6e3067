// The rotation/sign product system: construction invariants, the exact
// divergent-series values, the bounded running supremum, and the
// contrast between them.
//
// Closed forms used below for the default rules (a = 1/4, N_k = 4^k,
// eps_k = 8^-k):
//   alpha_K = 0.5 * 32^-K (the binding level is k = K),
//   series value = K - alpha_K * sum_k N_k (N_k + 1) / 2,
//   lower bound  = K - (1 - 2^-K),
//   sup bound    = sum_k (sqrt(N_k) rho_k + N_k eps_k) = 2 (1 - 2^-K).

#include <cmath>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <vector>

#include "doctest.h"
#include "qclt/counterexample.hpp"
#include "qclt/errors.hpp"

using namespace qclt;

namespace {

double default_alpha(int K) { return 0.5 * std::pow(32.0, -K); }

double series_value_formula(int K) {
  double sum = 0.0;
  for (int k = 1; k <= K; ++k) {
    const double nk = std::pow(4.0, k);
    sum += nk * (nk + 1.0) / 2.0;
  }
  return K - default_alpha(K) * sum;
}

}  // namespace

TEST_CASE("construction: levels, rotation angle, and guarded layout") {
  for (int K = 1; K <= 6; ++K) {
    CAPTURE(K);
    const TruncatedExample ex = build_truncated_example(K);
    REQUIRE(ex.K == K);
    REQUIRE(ex.rho.size() == static_cast<std::size_t>(K));

    for (int k = 1; k <= K; ++k) {
      CHECK(ex.rho[k - 1] == doctest::Approx(std::pow(0.25, k)).epsilon(1e-15));
      CHECK(ex.N[k - 1] == static_cast<long>(std::pow(4.0, k)));
      CHECK(ex.eps[k - 1] == doctest::Approx(std::pow(8.0, -k)).epsilon(1e-15));
      CHECK(ex.arc_len[k - 1] == ex.rho[k - 1]);
    }
    CHECK(ex.alpha == doctest::Approx(default_alpha(K)).epsilon(1e-15));
    CHECK(ex.gap ==
          doctest::Approx(default_alpha(K) * std::pow(4.0, K)).epsilon(1e-15));
    CHECK(ex.max_window() == static_cast<long>(std::pow(4.0, K)));

    // Arcs march left to right, one guard gap before each.
    double cursor = 0.0;
    for (int k = 0; k < K; ++k) {
      cursor += ex.gap;
      CHECK(ex.arc_start[k] == doctest::Approx(cursor).epsilon(1e-14));
      cursor += ex.rho[k];
    }
    CHECK(cursor <= 1.0);
  }
}

TEST_CASE("construction invariants: lengths, disjointness, and drift "
          "control certify for every level count") {
  for (int K = 1; K <= 6; ++K) {
    CAPTURE(K);
    const TruncatedExample ex = build_truncated_example(K);
    const ExampleInvariants inv = check_example(ex);
    CHECK(inv.lengths_ok);
    CHECK(inv.disjoint);
    CHECK(inv.total_below_one);
    CHECK(inv.symdiff_ok);
    // Total arc measure is (1 - 4^-K) / 3.
    CHECK(inv.total_length ==
          doctest::Approx((1.0 - std::pow(0.25, K)) / 3.0).epsilon(1e-12));
    CHECK(inv.min_gap > 0.0);
    // The binding level k = K attains its drift budget exactly:
    // 2 N_K alpha = eps_K.
    CHECK(inv.worst_symdiff_ratio == doctest::Approx(1.0).epsilon(1e-9));
  }
}

TEST_CASE("construction: custom rules and failure modes") {
  SUBCASE("custom window and drift rules are honored") {
    const TruncatedExample ex = build_truncated_example(
        3, 0.25, [](int k) { return static_cast<long>(k); },
        [](int k) { return std::pow(10.0, -k); });
    CHECK(ex.N == std::vector<long>{1, 2, 3});
    CHECK(ex.eps[2] == doctest::Approx(1e-3).epsilon(1e-12));
    // alpha = min_k eps_k / (2 N_k) = 1e-3 / 6.
    CHECK(ex.alpha == doctest::Approx(1e-3 / 6.0).epsilon(1e-12));
    const ExampleInvariants inv = check_example(ex);
    CHECK(inv.disjoint);
    CHECK(inv.symdiff_ok);
  }

  SUBCASE("oversized drift budgets push the guard gaps past the circle") {
    CHECK_THROWS_AS(build_truncated_example(
                        2, 0.25, [](int) { return 1L; },
                        [](int) { return 0.9; }),
                    ArcsDontFit);
  }

  SUBCASE("parameter validation") {
    CHECK_THROWS_AS(build_truncated_example(0), std::invalid_argument);
    CHECK_THROWS_AS(build_truncated_example(2, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(build_truncated_example(2, 1.0), std::invalid_argument);
    CHECK_THROWS_AS(build_truncated_example(2, 0.25, [](int) { return 0L; }),
                    std::invalid_argument);
    CHECK_THROWS_AS(build_truncated_example(2, 0.25, {},
                                            [](int) { return 0.0; }),
                    std::invalid_argument);
  }
}

TEST_CASE("sign history: indexing convention and bounds") {
  RademacherHistory h;
  h.signs = {1, -1, -1, 1};  // indices 0, -1, -2, -3
  CHECK(h.at_nonpositive(0) == 1);
  CHECK(h.at_nonpositive(-1) == -1);
  CHECK(h.at_nonpositive(-3) == 1);
  CHECK_THROWS_AS(h.at_nonpositive(1), std::invalid_argument);
  CHECK_THROWS_AS(h.at_nonpositive(-4), std::invalid_argument);
}

TEST_CASE("lag predictors: membership, sign lookup, and the window cutoff") {
  const TruncatedExample ex = build_truncated_example(1);
  RademacherHistory h;
  h.signs = {1, -1, 1, -1};  // index 0 holds +1, index -1 holds -1, ...

  const double mid = ex.arc_start[0] + 0.5 * ex.arc_len[0];
  for (long i = 1; i <= 4; ++i) {
    CAPTURE(i);
    auto phi = conditional_expectation(ex, i);
    // Start i alpha to the left of the arc middle: the rotated point
    // lands in the arc and the predictor reads the sign at i - 4.
    const double c = mid - static_cast<double>(i) * ex.alpha;
    CHECK(phi(c, h) == static_cast<double>(h.at_nonpositive(i - 4)));
    // A point in the guard zone left of the arc, too far to rotate in,
    // contributes nothing.
    CHECK(phi(0.5 * ex.gap - static_cast<double>(i) * ex.alpha, h) == 0.0);
  }

  // Lag equal to the window reads the time-zero sign.
  auto at_window = conditional_expectation(ex, 4);
  CHECK(at_window(mid - 4.0 * ex.alpha, h) == 1.0);

  // Beyond the window the predictor vanishes identically.
  auto beyond = conditional_expectation(ex, 5);
  for (double c : {0.0, mid, 0.5, 0.99}) CHECK(beyond(c, h) == 0.0);

  CHECK_THROWS_AS(conditional_expectation(ex, 0), std::invalid_argument);

  SUBCASE("disjoint arcs keep every predictor in [-1, 1]") {
    const TruncatedExample two = build_truncated_example(2);
    RademacherHistory hist;
    hist.signs.assign(17, 1);
    for (int j = 0; j < 17; ++j) hist.signs[j] = (j % 3 == 0) ? 1 : -1;
    for (long i : {1L, 3L, 4L, 5L, 16L}) {
      auto phi = conditional_expectation(two, i);
      for (int g = 0; g < 200; ++g) {
        const double c = (g + 0.5) / 200.0;
        CHECK(std::abs(phi(c, hist)) <= 1.0);
      }
    }
  }
}

TEST_CASE("divergent series: exact values, growth per level, and lower "
          "bounds") {
  // Frozen decimals for the first three levels; the general closed form
  // covers the rest.
  const double frozen[] = {0.84375, 1.9287109375, 2.966033935546875};
  std::vector<double> values;
  for (int K = 1; K <= 5; ++K) {
    CAPTURE(K);
    const TruncatedExample ex = build_truncated_example(K);
    const DivergentSeriesEstimate est =
        divergent_series_estimate(ex, ex.max_window());
    values.push_back(est.value);

    CHECK(est.value == doctest::Approx(series_value_formula(K)).epsilon(1e-12));
    if (K <= 3)
      CHECK(est.value == doctest::Approx(frozen[K - 1]).epsilon(1e-12));

    // lower_bound = K - (1 - 2^-K) and the exact value clears it.
    CHECK(est.lower_bound ==
          doctest::Approx(K - (1.0 - std::pow(2.0, -K))).epsilon(1e-12));
    CHECK(est.error_budget ==
          doctest::Approx(1.0 - std::pow(2.0, -K)).epsilon(1e-12));
    CHECK(est.value >= est.lower_bound);

    // The guarded layout never lets levels interact.
    CHECK(est.multi_level_regions == 0);
  }

  // One unit of growth per level, within the shrinking correction.
  for (int K = 2; K <= 5; ++K) {
    CAPTURE(K);
    const double inc = values[K - 1] - values[K - 2];
    CHECK(std::abs(inc - 1.0) <= std::pow(2.0, -(K + 1)));
  }

  SUBCASE("terms beyond the widest window vanish") {
    const TruncatedExample ex = build_truncated_example(2);
    const double at_window =
        divergent_series_estimate(ex, ex.max_window()).value;
    const double beyond = divergent_series_estimate(ex, 1000).value;
    CHECK(at_window == beyond);
  }

  SUBCASE("the horizon must cover the widest window") {
    const TruncatedExample ex = build_truncated_example(2);
    CHECK_THROWS_AS(divergent_series_estimate(ex, ex.max_window() - 1),
                    std::invalid_argument);
  }
}

TEST_CASE("bounded supremum: exact enumeration against an independent grid "
          "quadrature") {
  const TruncatedExample ex = build_truncated_example(1);
  const BoundedSupExact exact = bounded_sup_exact(ex);
  CHECK(exact.upper_bound == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(exact.regions > 0);
  CHECK(exact.value > 0.0);
  CHECK(exact.value <= exact.upper_bound);

  // Independent oracle: integrate E sup_n |masked walk| over the circle
  // with a uniform midpoint grid, enumerating all 2^4 sign patterns.
  // Grid error is bounded by the boundary-cell count times the maximum
  // supremum (4), far below the tolerance used.
  const long grid = 200000;
  double quad = 0.0;
  for (long g = 0; g < grid; ++g) {
    const double c = (static_cast<double>(g) + 0.5) / grid;
    int active[5] = {0, 0, 0, 0, 0};  // sign index used at step i, or -1
    bool any = false;
    for (long i = 1; i <= 4; ++i) {
      double rot = c + static_cast<double>(i) * ex.alpha;
      rot -= std::floor(rot);
      const bool in =
          rot >= ex.arc_start[0] && rot < ex.arc_start[0] + ex.arc_len[0];
      active[i] = in ? static_cast<int>(4 - i) : -1;
      any = any || in;
    }
    if (!any) continue;
    double mean = 0.0;
    for (unsigned mask = 0; mask < 16; ++mask) {
      double running = 0.0, sup = 0.0;
      for (long i = 1; i <= 4; ++i) {
        if (active[i] >= 0)
          running += ((mask >> active[i]) & 1u) ? 1.0 : -1.0;
        sup = std::max(sup, std::abs(running));
      }
      mean += sup;
    }
    quad += mean / 16.0;
  }
  quad /= static_cast<double>(grid);
  CHECK(exact.value == doctest::Approx(quad).epsilon(1e-3).scale(1.0));

  // Interior points activate the full four-step walk, whose expected
  // running maximum is 2.125; boundary slivers only lower the mean.
  CHECK(exact.value <= 2.125 * (ex.arc_len[0] + 4.0 * ex.alpha) + 1e-12);

  SUBCASE("enumeration refuses windows beyond sixteen signs") {
    CHECK_THROWS_AS(bounded_sup_exact(build_truncated_example(3)),
                    TooLargeForExact);
  }
}

TEST_CASE("bounded supremum: Monte Carlo agrees with the exact value and is "
          "seed-stable") {
  for (int K : {1, 2}) {
    CAPTURE(K);
    const TruncatedExample ex = build_truncated_example(K);
    const BoundedSupExact exact = bounded_sup_exact(ex);
    const BoundedSupEstimate mc = bounded_sup_estimate(ex, 20000, 13);
    CHECK(mc.count == 20000);
    CHECK(mc.upper_bound == doctest::Approx(exact.upper_bound).epsilon(1e-12));
    CHECK(mc.std_error > 0.0);
    CHECK(std::abs(mc.mc_estimate - exact.value) <=
          4.0 * mc.std_error + 1e-9);

    const BoundedSupEstimate again = bounded_sup_estimate(ex, 20000, 13);
    CHECK(again.mc_estimate == mc.mc_estimate);
    const BoundedSupEstimate other = bounded_sup_estimate(ex, 20000, 14);
    CHECK(other.mc_estimate != mc.mc_estimate);
  }
  CHECK_THROWS_AS(
      bounded_sup_estimate(build_truncated_example(1), 999, 1),
      std::invalid_argument);
}

TEST_CASE("contrast: the series outgrows every level while the supremum "
          "stays under its fixed ceiling") {
  // The running supremum's ceiling 2 (1 - 2^-K) never reaches 2, while
  // the series passes any fixed height after enough levels.
  double prev_series = 0.0;
  for (int K = 1; K <= 5; ++K) {
    CAPTURE(K);
    const TruncatedExample ex = build_truncated_example(K);
    const DivergentSeriesEstimate series =
        divergent_series_estimate(ex, ex.max_window());
    const double ub = 2.0 * (1.0 - std::pow(2.0, -K));

    CHECK(series.value > prev_series);
    CHECK(series.value >= K - 1.0);
    prev_series = series.value;

    const BoundedSupEstimate mc = bounded_sup_estimate(ex, 5000, 4096);
    CHECK(mc.upper_bound == doctest::Approx(ub).epsilon(1e-12));
    CHECK(mc.upper_bound < 2.0);
    CHECK(mc.mc_estimate <= mc.upper_bound + 4.0 * mc.std_error);
  }
}
