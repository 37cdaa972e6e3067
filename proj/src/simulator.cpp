#include "qclt/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <thread>

#include "qclt/stats.hpp"

namespace qclt {
namespace {

int resolve_threads(int threads) {
  if (threads > 0) return threads;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

// Runs fn over contiguous chunks of [0, count).  Chunking never affects
// results because every path writes only to its own preallocated slots.
template <class Fn>
void parallel_paths(long count, int threads, Fn&& fn) {
  threads = static_cast<int>(
      std::min<long>(resolve_threads(threads), std::max<long>(count, 1)));
  if (threads <= 1) {
    fn(0, count);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(threads);
  const long chunk = (count + threads - 1) / threads;
  for (int t = 0; t < threads; ++t) {
    const long lo = t * chunk;
    const long hi = std::min(count, lo + chunk);
    if (lo >= hi) break;
    pool.emplace_back([&fn, lo, hi] { fn(lo, hi); });
  }
  for (auto& th : pool) th.join();
}

std::vector<double> stationary_cdf(const MarkovKernel& kernel) {
  std::vector<double> cdf(kernel.pi().size());
  double run = 0.0;
  for (std::size_t x = 0; x < cdf.size(); ++x) {
    run += kernel.pi()[x];
    cdf[x] = run;
  }
  cdf.back() = 1.0;
  return cdf;
}

int pick_from_cdf(const std::vector<double>& cdf, double u) {
  return static_cast<int>(std::lower_bound(cdf.begin(), cdf.end(), u) -
                          cdf.begin());
}

void validate_run(const MarkovKernel& kernel, StartSpec start, long n,
                  long count) {
  if (n < 1) throw std::invalid_argument("path length must be at least 1");
  if (count < 1) throw std::invalid_argument("path count must be at least 1");
  if (start.kind == StartSpec::Kind::fixed &&
      (start.state < 0 || start.state >= kernel.size()))
    throw std::invalid_argument("start state out of range");
}

}  // namespace

PathSample sample_path(const MarkovKernel& kernel, const Observable& f,
                       const MartingaleScheme& scheme, StartSpec start, long n,
                       SeedRecord seed) {
  validate_run(kernel, start, n, 1);
  if (static_cast<int>(f.values.size()) != kernel.size())
    throw std::invalid_argument("observable size does not match state count");

  rng::PathRng rng(seed.master_seed, seed.path_index);
  PathSample path;
  path.m = scheme.m();
  path.seed = seed;
  path.states.resize(n + 2);
  path.partial_sums.resize(n);
  path.martingale.resize(n);
  path.remainder.resize(n);
  path.rbar.resize(n);

  int x = start.kind == StartSpec::Kind::fixed
              ? start.state
              : pick_from_cdf(stationary_cdf(kernel), rng.next_unit());
  path.start_state = x;
  path.states[0] = x;
  for (long k = 1; k <= n + 1; ++k) {
    x = kernel.step(x, rng.next_unit());
    path.states[k] = x;
  }

  const auto& theta = scheme.theta();
  const auto& q_theta = scheme.q_theta();
  const auto& f_m = scheme.remainder();
  const double theta_first = theta[path.states[1]];
  double s = 0.0, mart = 0.0, rsum = 0.0;
  for (long k = 1; k <= n; ++k) {
    const int xk = path.states[k];
    const int xk1 = path.states[k + 1];
    s += f.values[xk];
    mart += theta[xk1] - q_theta[xk];
    rsum += f_m[xk];
    path.partial_sums[k - 1] = s;
    path.martingale[k - 1] = mart;
    path.rbar[k - 1] = rsum;
    path.remainder[k - 1] = theta_first - theta[xk1] + rsum;
  }
  return path;
}

double max_abs_scaled(const std::vector<double>& seq) {
  if (seq.empty()) return 0.0;
  double hi = 0.0;
  for (double v : seq) hi = std::max(hi, std::abs(v));
  return hi / std::sqrt(static_cast<double>(seq.size()));
}

EnsembleSummary simulate_ensemble(const MarkovKernel& kernel,
                                  const Observable& f, StartSpec start, long n,
                                  long count, std::uint64_t master_seed,
                                  int threads, std::vector<double> grid) {
  validate_run(kernel, start, n, count);
  if (static_cast<int>(f.values.size()) != kernel.size())
    throw std::invalid_argument("observable size does not match state count");
  for (double t : grid)
    if (!(t >= 0.0 && t <= 1.0))
      throw std::invalid_argument("grid times must lie in [0, 1]");

  EnsembleSummary out;
  out.n = n;
  out.count = count;
  out.master_seed = master_seed;
  out.start = start;
  out.grid = std::move(grid);
  out.normalized_endpoints.resize(count);
  out.max_stats.resize(count);
  out.max_signed.resize(count);
  out.scaled_paths.resize(static_cast<std::size_t>(count) * out.grid.size());

  // Capture step for each grid slot; slots are visited in step order.
  const std::size_t slots = out.grid.size();
  std::vector<std::pair<long, std::size_t>> captures(slots);
  for (std::size_t g = 0; g < slots; ++g)
    captures[g] = {static_cast<long>(std::floor(n * out.grid[g])), g};
  std::sort(captures.begin(), captures.end());

  const std::vector<double> pi_cdf = stationary_cdf(kernel);
  const double scale = 1.0 / std::sqrt(static_cast<double>(n));
  const std::vector<double>& fv = f.values;

  parallel_paths(count, threads, [&](long lo, long hi) {
    for (long p = lo; p < hi; ++p) {
      rng::PathRng rng(master_seed, static_cast<std::uint64_t>(p));
      int x = start.kind == StartSpec::Kind::fixed
                  ? start.state
                  : pick_from_cdf(pi_cdf, rng.next_unit());
      double s = 0.0;
      double hi_abs = 0.0;
      double hi_signed = 0.0;
      std::size_t next_capture = 0;
      double* grid_row =
          out.scaled_paths.data() + static_cast<std::size_t>(p) * slots;
      while (next_capture < slots && captures[next_capture].first <= 0) {
        grid_row[captures[next_capture].second] = 0.0;
        ++next_capture;
      }
      for (long k = 1; k <= n; ++k) {
        x = kernel.step(x, rng.next_unit());
        s += fv[x];
        const double a = std::abs(s);
        if (a > hi_abs) hi_abs = a;
        if (s > hi_signed) hi_signed = s;
        while (next_capture < slots && captures[next_capture].first == k) {
          grid_row[captures[next_capture].second] = s * scale;
          ++next_capture;
        }
      }
      out.normalized_endpoints[p] = s * scale;
      out.max_stats[p] = hi_abs * scale;
      out.max_signed[p] = hi_signed * scale;
    }
  });
  return out;
}

EnsembleSummary quenched_ensemble(const MarkovKernel& kernel,
                                  const Observable& f, int x, long n,
                                  long count, std::uint64_t master_seed,
                                  int threads, std::vector<double> grid) {
  return simulate_ensemble(kernel, f, StartSpec::at(x), n, count, master_seed,
                           threads, std::move(grid));
}

EnsembleSummary annealed_ensemble(const MarkovKernel& kernel,
                                  const Observable& f, long n, long count,
                                  std::uint64_t master_seed, int threads,
                                  std::vector<double> grid) {
  return simulate_ensemble(kernel, f, StartSpec::from_pi(), n, count,
                           master_seed, threads, std::move(grid));
}

EnsembleSummary mixture_of_fixed_starts(const MarkovKernel& kernel,
                                        const Observable& f, long n,
                                        long count, std::uint64_t master_seed,
                                        int threads,
                                        std::vector<double> grid) {
  validate_run(kernel, StartSpec::at(0), n, count);
  const int states = kernel.size();

  // Largest-remainder apportionment of count across states by pi.
  std::vector<long> quota(states);
  std::vector<std::pair<double, int>> remainders(states);
  long assigned = 0;
  for (int x = 0; x < states; ++x) {
    const double exact = kernel.pi()[x] * static_cast<double>(count);
    quota[x] = static_cast<long>(std::floor(exact));
    assigned += quota[x];
    remainders[x] = {exact - std::floor(exact), x};
  }
  std::sort(remainders.begin(), remainders.end(), [](auto a, auto b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second < b.second;  // deterministic tie order
  });
  for (long i = 0; i < count - assigned; ++i)
    ++quota[remainders[static_cast<std::size_t>(i) % states].second];

  EnsembleSummary out;
  out.n = n;
  out.count = count;
  out.master_seed = master_seed;
  out.start = StartSpec::from_pi();
  out.grid = grid;
  out.normalized_endpoints.reserve(count);
  out.max_stats.reserve(count);
  out.max_signed.reserve(count);
  out.scaled_paths.reserve(static_cast<std::size_t>(count) * grid.size());

  for (int x = 0; x < states; ++x) {
    if (quota[x] == 0) continue;
    const std::uint64_t sub_seed =
        rng::mix64(master_seed ^ rng::mix64(0x517CC1B727220A95ull +
                                            static_cast<std::uint64_t>(x)));
    EnsembleSummary part = simulate_ensemble(kernel, f, StartSpec::at(x), n,
                                             quota[x], sub_seed, threads, grid);
    out.normalized_endpoints.insert(out.normalized_endpoints.end(),
                                    part.normalized_endpoints.begin(),
                                    part.normalized_endpoints.end());
    out.max_stats.insert(out.max_stats.end(), part.max_stats.begin(),
                         part.max_stats.end());
    out.max_signed.insert(out.max_signed.end(), part.max_signed.begin(),
                          part.max_signed.end());
    out.scaled_paths.insert(out.scaled_paths.end(), part.scaled_paths.begin(),
                            part.scaled_paths.end());
  }
  return out;
}

DecompositionCheck decomposition_check(const MarkovKernel& kernel,
                                       const Observable& f,
                                       const MartingaleScheme& scheme,
                                       const PathSample& path) {
  if (path.states.size() < 3)
    throw std::invalid_argument("path too short to decompose");
  (void)kernel;
  const long n = static_cast<long>(path.states.size()) - 2;
  const auto& theta = scheme.theta();
  const auto& q_theta = scheme.q_theta();
  const auto& f_m = scheme.remainder();

  DecompositionCheck check;
  double s = 0.0, mart = 0.0, rem_sum = 0.0;
  const double theta_first = theta[path.states[1]];
  for (long k = 1; k <= n; ++k) {
    const int xk = path.states[k];
    const int xk1 = path.states[k + 1];
    s += f.values[xk];
    mart += theta[xk1] - q_theta[xk];
    rem_sum += f_m[xk];
    const double r = theta_first - theta[xk1] + rem_sum;
    const double residual =
        std::abs(s - (mart + r)) / std::max(1.0, std::abs(s));
    check.max_relative_residual =
        std::max(check.max_relative_residual, residual);
    if (k == n) {
      check.s_n = s;
      check.martingale_n = mart;
      check.remainder_n = r;
    }
  }
  return check;
}

RemainderMaxima remainder_maxima(const MarkovKernel& kernel,
                                 const std::vector<std::vector<double>>& tracks,
                                 StartSpec start, std::vector<long> horizons,
                                 long count, std::uint64_t master_seed,
                                 int threads) {
  if (tracks.empty()) throw std::invalid_argument("no observables to track");
  if (horizons.empty()) throw std::invalid_argument("no horizons given");
  std::sort(horizons.begin(), horizons.end());
  if (horizons.front() < 1)
    throw std::invalid_argument("horizons must be at least 1");
  validate_run(kernel, start, horizons.back(), count);
  for (const auto& g : tracks)
    if (static_cast<int>(g.size()) != kernel.size())
      throw std::invalid_argument("observable size does not match state count");

  RemainderMaxima out;
  out.count = count;
  out.horizons = horizons;
  out.tracks = tracks.size();
  const std::size_t cells = tracks.size() * horizons.size();
  out.max_values.resize(static_cast<std::size_t>(count) * cells);
  out.end_values.resize(static_cast<std::size_t>(count) * cells);

  const std::vector<double> pi_cdf = stationary_cdf(kernel);
  const long n_max = horizons.back();
  const std::size_t m_count = tracks.size();

  parallel_paths(count, threads, [&](long lo, long hi) {
    std::vector<double> sums(m_count), highs(m_count);
    for (long p = lo; p < hi; ++p) {
      rng::PathRng rng(master_seed, static_cast<std::uint64_t>(p));
      int x = start.kind == StartSpec::Kind::fixed
                  ? start.state
                  : pick_from_cdf(pi_cdf, rng.next_unit());
      std::fill(sums.begin(), sums.end(), 0.0);
      std::fill(highs.begin(), highs.end(), 0.0);
      std::size_t next_h = 0;
      double* max_row =
          out.max_values.data() + static_cast<std::size_t>(p) * cells;
      double* end_row =
          out.end_values.data() + static_cast<std::size_t>(p) * cells;
      for (long k = 1; k <= n_max; ++k) {
        x = kernel.step(x, rng.next_unit());
        for (std::size_t m = 0; m < m_count; ++m) {
          sums[m] += tracks[m][x];
          highs[m] = std::max(highs[m], std::abs(sums[m]));
        }
        while (next_h < horizons.size() && horizons[next_h] == k) {
          const double scale =
              1.0 / std::sqrt(static_cast<double>(horizons[next_h]));
          for (std::size_t m = 0; m < m_count; ++m) {
            max_row[m * horizons.size() + next_h] = highs[m] * scale;
            end_row[m * horizons.size() + next_h] = std::abs(sums[m]) * scale;
          }
          ++next_h;
        }
      }
    }
  });
  return out;
}

CltTestResult clt_test(const std::vector<double>& endpoints, long n,
                       double sigma_sq, double alpha, double bias_allowance) {
  if (sigma_sq < 0.0) throw std::invalid_argument("variance must be >= 0");
  if (endpoints.empty()) throw std::invalid_argument("empty sample");
  CltTestResult result;
  result.bias_allowance = bias_allowance;
  if (sigma_sq == 0.0) {
    // Degenerate limit: the scaled endpoint must concentrate at zero.
    result.degenerate = true;
    const double threshold = std::pow(static_cast<double>(n), -0.25);
    std::vector<double> abs_ends(endpoints.size());
    for (std::size_t i = 0; i < abs_ends.size(); ++i)
      abs_ends[i] = std::abs(endpoints[i]);
    result.ks_distance = stats::tail_fraction(abs_ends, threshold);
    result.critical = alpha;
    result.pass = result.ks_distance <= alpha + bias_allowance;
    return result;
  }
  result.ks_distance = stats::ks_distance_normal(endpoints, sigma_sq);
  result.critical = stats::ks_critical(alpha, endpoints.size());
  result.pass = result.ks_distance <= result.critical + bias_allowance;
  return result;
}

CltTestResult clt_test(const EnsembleSummary& ensemble, double sigma_sq,
                       double alpha, double bias_allowance) {
  return clt_test(ensemble.normalized_endpoints, ensemble.n, sigma_sq, alpha,
                  bias_allowance);
}

FcltTestResult fclt_test(const EnsembleSummary& ensemble, double sigma_sq,
                         double alpha, double bias_allowance,
                         double sup_tolerance) {
  if (!(sigma_sq > 0.0))
    throw std::invalid_argument(
        "functional check requires strictly positive variance");
  if (ensemble.grid.empty())
    throw std::invalid_argument("ensemble carries no grid captures");

  FcltTestResult result;
  result.grid = ensemble.grid;
  result.ks_critical =
      stats::ks_critical(alpha, ensemble.count) + bias_allowance;
  result.marginals_pass = true;
  for (std::size_t g = 0; g < ensemble.grid.size(); ++g) {
    // The realized capture fraction [n t]/n sets the marginal variance.
    const long step =
        static_cast<long>(std::floor(ensemble.n * ensemble.grid[g]));
    if (step == 0) {
      result.ks_per_time.push_back(0.0);
      continue;
    }
    std::vector<double> column(ensemble.count);
    for (long p = 0; p < ensemble.count; ++p)
      column[p] = ensemble.scaled_at(p, g);
    const double var =
        sigma_sq * static_cast<double>(step) / static_cast<double>(ensemble.n);
    const double d = stats::ks_distance_normal(column, var);
    result.ks_per_time.push_back(d);
    if (d > result.ks_critical) result.marginals_pass = false;
  }

  // Running-maximum functional against the reflection identity.
  const double sd = std::sqrt(sigma_sq);
  std::size_t below = 0;
  for (double m : ensemble.max_signed)
    if (m / sd <= 1.0) ++below;
  result.sup_fraction =
      static_cast<double>(below) / static_cast<double>(ensemble.count);
  result.sup_reference = 2.0 * stats::normal_cdf(1.0) - 1.0;
  result.sup_tolerance = sup_tolerance;
  result.sup_pass =
      std::abs(result.sup_fraction - result.sup_reference) <= sup_tolerance;

  // Increment independence when the grid exposes both halves.
  auto find_time = [&](double t) -> long {
    for (std::size_t g = 0; g < ensemble.grid.size(); ++g)
      if (std::abs(ensemble.grid[g] - t) < 1e-12) return static_cast<long>(g);
    return -1;
  };
  const long half = find_time(0.5);
  const long full = find_time(1.0);
  result.increments_pass = true;
  if (half >= 0 && full >= 0) {
    std::vector<double> first(ensemble.count), second(ensemble.count);
    for (long p = 0; p < ensemble.count; ++p) {
      first[p] = ensemble.scaled_at(p, half);
      second[p] = ensemble.scaled_at(p, full) - first[p];
    }
    result.increment_correlation = stats::pearson_correlation(first, second);
    result.correlation_bound =
        3.0 / std::sqrt(static_cast<double>(ensemble.count));
    result.increments_pass =
        std::abs(result.increment_correlation) <= result.correlation_bound;
  }

  result.pass =
      result.marginals_pass && result.sup_pass && result.increments_pass;
  return result;
}

}  // namespace qclt
