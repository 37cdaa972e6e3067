// Path sampling, ensemble reductions, and the distributional checks:
// stream reproducibility, the exact pathwise decomposition, ergodic
// averages, endpoint laws, and the stationary-mixture identity.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "corpus.hpp"
#include "doctest.h"
#include "qclt/operator_calculus.hpp"
#include "qclt/rng.hpp"
#include "qclt/simulator.hpp"
#include "qclt/stats.hpp"

using namespace qclt;

namespace {

// Deterministic centered normal draws (Box-Muller over our own stream),
// so the distributional calibration tests are bit-stable everywhere.
std::vector<double> normal_draws(std::uint64_t master, std::uint64_t stream,
                                 std::size_t n, double sd) {
  rng::PathRng rng(master, stream);
  std::vector<double> out;
  out.reserve(n + 1);
  const double two_pi = 2.0 * std::acos(-1.0);
  while (out.size() < n) {
    const double u1 = rng.next_unit();  // in (0, 1], so log is safe
    const double u2 = rng.next_unit();
    const double r = std::sqrt(-2.0 * std::log(u1));
    out.push_back(sd * r * std::cos(two_pi * u2));
    out.push_back(sd * r * std::sin(two_pi * u2));
  }
  out.resize(n);
  return out;
}

}  // namespace

TEST_CASE("path sampling: stream identity, shapes, and the seed record") {
  const MarkovKernel k = corpus::canonical_kernel();
  const Observable f = corpus::canonical_f();
  const MartingaleScheme scheme(k, f, 1);

  const SeedRecord seed{920203, 17};
  const PathSample a = sample_path(k, f, scheme, StartSpec::at(0), 64, seed);
  const PathSample b = sample_path(k, f, scheme, StartSpec::at(0), 64, seed);

  CHECK(a.states.size() == 66);  // xi_0 .. xi_{n+1}
  CHECK(a.partial_sums.size() == 64);
  CHECK(a.martingale.size() == 64);
  CHECK(a.remainder.size() == 64);
  CHECK(a.rbar.size() == 64);
  CHECK(a.n() == 64);
  CHECK(a.start_state == 0);
  CHECK(a.m == 1);
  CHECK(a.seed.master_seed == seed.master_seed);
  CHECK(a.seed.path_index == seed.path_index);

  // Same record, same path — exactly.
  CHECK(a.states == b.states);
  CHECK(a.partial_sums == b.partial_sums);
  CHECK(a.martingale == b.martingale);

  // A different path index diverges.
  const PathSample c =
      sample_path(k, f, scheme, StartSpec::at(0), 64, SeedRecord{920203, 18});
  CHECK(a.states != c.states);

  // Partial sums really are the running sums of f along the states.
  double s = 0.0;
  for (long i = 1; i <= a.n(); ++i) {
    s += f.values[static_cast<std::size_t>(a.states[static_cast<std::size_t>(i)])];
    CHECK(a.partial_sums[static_cast<std::size_t>(i - 1)] == s);
  }

  SUBCASE("validation") {
    CHECK_THROWS_AS(sample_path(k, f, scheme, StartSpec::at(2), 10, seed),
                    std::invalid_argument);
    CHECK_THROWS_AS(sample_path(k, f, scheme, StartSpec::at(-1), 10, seed),
                    std::invalid_argument);
    CHECK_THROWS_AS(sample_path(k, f, scheme, StartSpec::at(0), 0, seed),
                    std::invalid_argument);
  }
}

TEST_CASE("pathwise split: additive functional equals martingale plus "
          "remainder at every step") {
  // The identity is algebraic, so it must hold to rounding for every
  // averaging window and every chain.
  for (const auto& c : {corpus::all_cases()[0], corpus::all_cases()[8]}) {
    CAPTURE(c.name);
    for (int m : {1, 5, 25, 125}) {
      const MartingaleScheme scheme(c.kernel, c.f, m);
      for (long p = 0; p < 50; ++p) {
        const PathSample path = sample_path(c.kernel, c.f, scheme,
                                            StartSpec::at(0), 1000,
                                            SeedRecord{555, std::uint64_t(p)});
        // Arrays carried by the path agree slot by slot.
        for (long i = 0; i < path.n(); ++i) {
          const auto idx = static_cast<std::size_t>(i);
          const double lhs = path.partial_sums[idx];
          const double rhs = path.martingale[idx] + path.remainder[idx];
          CHECK(std::abs(lhs - rhs) <= 1e-9 * std::max(1.0, std::abs(lhs)));
        }
        // And the independent replay from the stored states agrees too.
        const DecompositionCheck check =
            decomposition_check(c.kernel, c.f, scheme, path);
        CHECK(check.max_relative_residual <= 1e-9);
        CHECK(check.s_n ==
              doctest::Approx(path.partial_sums.back()).epsilon(1e-12));
        CHECK(check.martingale_n + check.remainder_n ==
              doctest::Approx(check.s_n).epsilon(1e-9).scale(1.0));
      }
    }
  }
}

TEST_CASE("martingale increments: empirical quadratic variation matches the "
          "scheme variance") {
  const MarkovKernel k = corpus::canonical_kernel();
  const Observable f = corpus::canonical_f();
  for (int m : {1, 7}) {
    CAPTURE(m);
    const MartingaleScheme scheme(k, f, m);
    const PathSample path = sample_path(k, f, scheme, StartSpec::at(0), 200000,
                                        SeedRecord{31337, 0});
    double sum_sq = 0.0;
    double prev = 0.0;
    for (double mk : path.martingale) {
      const double d = mk - prev;
      sum_sq += d * d;
      prev = mk;
    }
    const double empirical = sum_sq / static_cast<double>(path.n());
    CHECK(empirical ==
          doctest::Approx(scheme.sigma_m_sq()).epsilon(0.03));
  }
}

TEST_CASE("ergodic averages: time means settle at the stationary values") {
  const MarkovKernel k = corpus::canonical_kernel();
  const Observable f = corpus::canonical_f();
  const MartingaleScheme scheme(k, f, 1);
  const long n = 1000000;
  const PathSample path =
      sample_path(k, f, scheme, StartSpec::at(1), n, SeedRecord{246810, 3});

  // Centered observable: the Birkhoff mean collapses to zero.
  const double time_mean = path.partial_sums.back() / static_cast<double>(n);
  CHECK(std::abs(time_mean) < 0.02);

  // Occupation frequency of state 0 against pi(0) = 0.25.
  long visits = 0;
  for (long i = 1; i <= n; ++i)
    if (path.states[static_cast<std::size_t>(i)] == 0) ++visits;
  const double freq = static_cast<double>(visits) / static_cast<double>(n);
  CHECK(std::abs(freq - 0.25) < 0.005);
}

TEST_CASE("ensembles: reductions are pure functions of seed and index") {
  const MarkovKernel k = corpus::canonical_kernel();
  const Observable f = corpus::canonical_f();
  const std::vector<double> grid{0.25, 0.5, 1.0};

  const EnsembleSummary one =
      quenched_ensemble(k, f, 0, 400, 600, 777, /*threads=*/1, grid);
  const EnsembleSummary four =
      quenched_ensemble(k, f, 0, 400, 600, 777, /*threads=*/4, grid);

  // Bit-identical under any worker partition.
  CHECK(one.normalized_endpoints == four.normalized_endpoints);
  CHECK(one.max_stats == four.max_stats);
  CHECK(one.max_signed == four.max_signed);
  CHECK(one.scaled_paths == four.scaled_paths);

  const EnsembleSummary ann1 =
      annealed_ensemble(k, f, 400, 600, 777, /*threads=*/1, grid);
  const EnsembleSummary ann4 =
      annealed_ensemble(k, f, 400, 600, 777, /*threads=*/4, grid);
  CHECK(ann1.normalized_endpoints == ann4.normalized_endpoints);
  CHECK(ann1.scaled_paths == ann4.scaled_paths);

  const EnsembleSummary mix1 =
      mixture_of_fixed_starts(k, f, 400, 600, 777, /*threads=*/1, grid);
  const EnsembleSummary mix4 =
      mixture_of_fixed_starts(k, f, 400, 600, 777, /*threads=*/4, grid);
  CHECK(mix1.normalized_endpoints == mix4.normalized_endpoints);
  CHECK(mix1.max_stats == mix4.max_stats);

  // Each ensemble row replays the dedicated path sampler exactly.
  const MartingaleScheme scheme(k, f, 1);
  for (long p : {0L, 7L, 599L}) {
    const PathSample path = sample_path(k, f, scheme, StartSpec::at(0), 400,
                                        SeedRecord{777, std::uint64_t(p)});
    const double scale = 1.0 / std::sqrt(400.0);
    CHECK(one.normalized_endpoints[static_cast<std::size_t>(p)] ==
          path.partial_sums.back() * scale);
    double hi = 0.0;
    for (double s : path.partial_sums) hi = std::max(hi, std::abs(s));
    CHECK(one.max_stats[static_cast<std::size_t>(p)] == hi * scale);
    // Grid captures sit at S_{floor(n t)} / sqrt(n).
    CHECK(one.scaled_at(p, 0) == path.partial_sums[99] * scale);
    CHECK(one.scaled_at(p, 1) == path.partial_sums[199] * scale);
    CHECK(one.scaled_at(p, 2) == path.partial_sums[399] * scale);
  }

  SUBCASE("grid slots follow the caller's order, not the step order") {
    const EnsembleSummary sorted_grid =
        quenched_ensemble(k, f, 0, 100, 40, 12, 1, {0.25, 1.0});
    const EnsembleSummary reversed_grid =
        quenched_ensemble(k, f, 0, 100, 40, 12, 1, {1.0, 0.25});
    for (long p = 0; p < 40; ++p) {
      CHECK(sorted_grid.scaled_at(p, 0) == reversed_grid.scaled_at(p, 1));
      CHECK(sorted_grid.scaled_at(p, 1) == reversed_grid.scaled_at(p, 0));
    }
  }

  SUBCASE("validation") {
    CHECK_THROWS_AS(quenched_ensemble(k, f, 0, 100, 0, 1), std::invalid_argument);
    CHECK_THROWS_AS(quenched_ensemble(k, f, 5, 100, 10, 1),
                    std::invalid_argument);
    CHECK_THROWS_AS(quenched_ensemble(k, f, 0, 100, 10, 1, 1, {1.5}),
                    std::invalid_argument);
    CHECK_THROWS_AS(quenched_ensemble(k, f, 0, 100, 10, 1, 1, {-0.1}),
                    std::invalid_argument);
  }
}

TEST_CASE("stationary starts: draw frequencies follow pi") {
  const MarkovKernel k = corpus::canonical_kernel();
  const Observable f = corpus::canonical_f();
  const MartingaleScheme scheme(k, f, 1);
  const long count = 2000;
  long at_zero = 0;
  for (long p = 0; p < count; ++p) {
    const PathSample path = sample_path(k, f, scheme, StartSpec::from_pi(), 1,
                                        SeedRecord{5150, std::uint64_t(p)});
    CHECK(path.start_state == path.states[0]);
    if (path.start_state == 0) ++at_zero;
  }
  const double freq = static_cast<double>(at_zero) / count;
  const double tol = 4.0 * std::sqrt(0.25 * 0.75 / count);
  CHECK(std::abs(freq - 0.25) <= tol);
}

TEST_CASE("endpoint law: mean drift and variance match the exact values") {
  const MarkovKernel k = corpus::canonical_kernel();
  const Observable f = corpus::canonical_f();
  const long n = 5000;
  const long count = 4000;
  const EnsembleSummary ens = quenched_ensemble(k, f, 0, n, count, 424242, 0);

  // Conditional drift of S_n from a fixed start is sum_{j>=1} (Q^j f)(x),
  // i.e. (Q h)(x) for the balance-equation solution h, up to a
  // geometrically small remainder.
  const std::vector<double> h = poisson_solve(k, f);
  const double drift = k.apply(h)[0] / std::sqrt(static_cast<double>(n));
  const double sigma_sq = long_run_variance(k, f).sigma_sq;

  const double mean = stats::mean(ens.normalized_endpoints);
  const double mean_tol = 4.0 * std::sqrt(sigma_sq / count);
  CHECK(std::abs(mean - drift) <= mean_tol);

  const double var = stats::sample_variance(ens.normalized_endpoints);
  CHECK(var == doctest::Approx(sigma_sq).epsilon(0.05));
}

TEST_CASE("endpoint normality test: calibration and power") {
  // Calibration: on exact normal samples the pass rate stays near the
  // nominal level.
  const double sigma_sq = 12.0;
  int passed = 0;
  const int reps = 200;
  for (int rep = 0; rep < reps; ++rep) {
    const std::vector<double> xs =
        normal_draws(8888, std::uint64_t(rep), 1500, std::sqrt(sigma_sq));
    if (clt_test(xs, 1000, sigma_sq).pass) ++passed;
  }
  CHECK(static_cast<double>(passed) / reps >= 1.0 - 0.05 - 0.02);

  // Power: a wrong variance must be rejected.
  const std::vector<double> xs =
      normal_draws(8888, 9999, 1500, std::sqrt(sigma_sq));
  CHECK_FALSE(clt_test(xs, 1000, 9.0).pass);
  CHECK_FALSE(clt_test(xs, 1000, 16.0).pass);

  SUBCASE("validation") {
    CHECK_THROWS_AS(clt_test(std::vector<double>{}, 10, 1.0),
                    std::invalid_argument);
    CHECK_THROWS_AS(clt_test(std::vector<double>{0.0}, 10, -1.0),
                    std::invalid_argument);
  }
}

TEST_CASE("degenerate observable: endpoints concentrate and the zero-variance "
          "branch passes") {
  const MarkovKernel k = corpus::canonical_kernel();
  const Observable zero = center(k, {0.0, 0.0});
  const EnsembleSummary ens = quenched_ensemble(k, zero, 0, 100, 500, 9);
  for (double e : ens.normalized_endpoints) CHECK(e == 0.0);

  const CltTestResult r = clt_test(ens, 0.0);
  CHECK(r.degenerate);
  CHECK(r.ks_distance == 0.0);
  CHECK(r.pass);
}

TEST_CASE("scaled-path law: marginals, running maximum, and increments") {
  const MarkovKernel k = corpus::canonical_kernel();
  const Observable f = corpus::canonical_f();
  const double sigma_sq = long_run_variance(k, f).sigma_sq;
  const EnsembleSummary ens = quenched_ensemble(
      k, f, 0, 8192, 6000, 616161, 0, {0.25, 0.5, 0.75, 1.0});

  const FcltTestResult r =
      fclt_test(ens, sigma_sq, 0.05, 0.005, /*sup_tolerance=*/0.02);
  CHECK(r.grid == std::vector<double>{0.25, 0.5, 0.75, 1.0});
  CHECK(r.ks_per_time.size() == 4);
  for (double d : r.ks_per_time) CHECK(d <= r.ks_critical);
  CHECK(r.marginals_pass);
  CHECK(r.sup_reference == doctest::Approx(0.682689492137086).epsilon(1e-12));
  CHECK(std::abs(r.sup_fraction - r.sup_reference) <= 0.02);
  CHECK(r.sup_pass);
  CHECK(std::abs(r.increment_correlation) <= r.correlation_bound);
  CHECK(r.increments_pass);
  CHECK(r.pass);

  SUBCASE("validation") {
    const EnsembleSummary no_grid = quenched_ensemble(k, f, 0, 50, 20, 1);
    CHECK_THROWS_AS(fclt_test(no_grid, sigma_sq), std::invalid_argument);
    CHECK_THROWS_AS(fclt_test(ens, 0.0), std::invalid_argument);
  }
}

TEST_CASE("stationary mixture: annealed law equals the pi-weighted mixture of "
          "fixed starts") {
  const MarkovKernel k = corpus::canonical_kernel();
  const Observable f = corpus::canonical_f();
  const long n = 500;
  const long count = 20000;

  const EnsembleSummary annealed = annealed_ensemble(k, f, n, count, 27182, 0);
  const EnsembleSummary mixture =
      mixture_of_fixed_starts(k, f, n, count, 31415, 0);
  CHECK(mixture.normalized_endpoints.size() == static_cast<std::size_t>(count));

  const double crit = stats::ks_critical_two_sample(
      0.01, static_cast<std::size_t>(count), static_cast<std::size_t>(count));
  CHECK(stats::ks_distance(annealed.normalized_endpoints,
                           mixture.normalized_endpoints) < crit);
  // The whole path functional agrees too, not just the endpoint.
  CHECK(stats::ks_distance(annealed.max_stats, mixture.max_stats) < crit);
}

TEST_CASE("running maxima of tracked observables: exact replay and shape") {
  const MarkovKernel k = corpus::canonical_kernel();
  const Observable f = corpus::canonical_f();
  const MartingaleScheme scheme(k, f, 1);
  const std::vector<std::vector<double>> tracks{
      f.values, averaged_remainder(k, f.values, 3)};
  const std::vector<long> horizons{50, 200};
  const long count = 100;

  const RemainderMaxima rm = remainder_maxima(k, tracks, StartSpec::at(0),
                                              horizons, count, 99991, 0);
  CHECK(rm.count == count);
  CHECK(rm.tracks == 2);
  CHECK(rm.horizons == horizons);
  CHECK(rm.max_values.size() == static_cast<std::size_t>(count) * 4);

  for (long p = 0; p < count; ++p) {
    // The sweep shares the path sampler's stream discipline, so the
    // same seed record reproduces its states.
    const PathSample path = sample_path(k, f, scheme, StartSpec::at(0), 200,
                                        SeedRecord{99991, std::uint64_t(p)});
    for (std::size_t m = 0; m < tracks.size(); ++m) {
      double sum = 0.0;
      double high = 0.0;
      std::size_t hslot = 0;
      for (long kk = 1; kk <= 200; ++kk) {
        sum += tracks[m][static_cast<std::size_t>(
            path.states[static_cast<std::size_t>(kk)])];
        high = std::max(high, std::abs(sum));
        if (hslot < horizons.size() && horizons[hslot] == kk) {
          const double scale = 1.0 / std::sqrt(static_cast<double>(kk));
          CHECK(rm.max_value(p, m, hslot) == high * scale);
          CHECK(rm.end_value(p, m, hslot) == std::abs(sum) * scale);
          ++hslot;
        }
      }
    }
    for (std::size_t m = 0; m < tracks.size(); ++m)
      for (std::size_t i = 0; i < horizons.size(); ++i)
        CHECK(rm.max_value(p, m, i) >= rm.end_value(p, m, i));
  }

  SUBCASE("validation") {
    CHECK_THROWS_AS(
        remainder_maxima(k, {}, StartSpec::at(0), horizons, 10, 1),
        std::invalid_argument);
    CHECK_THROWS_AS(remainder_maxima(k, tracks, StartSpec::at(0), {}, 10, 1),
                    std::invalid_argument);
    CHECK_THROWS_AS(
        remainder_maxima(k, tracks, StartSpec::at(0), {0}, 10, 1),
        std::invalid_argument);
  }
}

TEST_CASE("scaled maximum helper") {
  CHECK(max_abs_scaled({}) == 0.0);
  CHECK(max_abs_scaled({1.0, -3.0, 2.0}) ==
        doctest::Approx(3.0 / std::sqrt(3.0)).epsilon(1e-15));
}
