#include "qclt/kernel.hpp"

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <queue>
#include <sstream>

namespace qclt {
namespace {

constexpr double kRowSumTol = 1e-9;
constexpr double kEdgeEps = 0.0;  // any strictly positive entry is an edge

int validated_size(const Matrix& rows) {
  const std::size_t n = rows.size();
  if (n == 0) throw NonStochasticRow("transition table is empty");
  for (std::size_t x = 0; x < n; ++x) {
    if (rows[x].size() != n) {
      std::ostringstream msg;
      msg << "row " << x << " has " << rows[x].size() << " entries, expected "
          << n;
      throw NonStochasticRow(msg.str());
    }
    double sum = 0.0;
    for (double v : rows[x]) {
      if (!(v >= 0.0) || !std::isfinite(v)) {
        std::ostringstream msg;
        msg << "row " << x << " has a negative or non-finite entry";
        throw NonStochasticRow(msg.str());
      }
      sum += v;
    }
    if (std::abs(sum - 1.0) > kRowSumTol) {
      std::ostringstream msg;
      msg << "row " << x << " sums to " << sum;
      throw NonStochasticRow(msg.str());
    }
  }
  return static_cast<int>(n);
}

std::vector<std::vector<int>> adjacency(const Matrix& rows) {
  const int n = static_cast<int>(rows.size());
  std::vector<std::vector<int>> adj(n);
  for (int x = 0; x < n; ++x)
    for (int y = 0; y < n; ++y)
      if (rows[x][y] > kEdgeEps) adj[x].push_back(y);
  return adj;
}

// Kosaraju strongly connected components, in discovery order.
std::vector<std::vector<int>> strong_components(
    const std::vector<std::vector<int>>& adj) {
  const int n = static_cast<int>(adj.size());
  std::vector<std::vector<int>> radj(n);
  for (int x = 0; x < n; ++x)
    for (int y : adj[x]) radj[y].push_back(x);

  std::vector<int> order;
  order.reserve(n);
  std::vector<char> seen(n, 0);
  // Iterative DFS for finish order.
  for (int s = 0; s < n; ++s) {
    if (seen[s]) continue;
    std::vector<std::pair<int, std::size_t>> stack{{s, 0}};
    seen[s] = 1;
    while (!stack.empty()) {
      auto& [v, idx] = stack.back();
      if (idx < adj[v].size()) {
        int w = adj[v][idx++];
        if (!seen[w]) {
          seen[w] = 1;
          stack.emplace_back(w, 0);
        }
      } else {
        order.push_back(v);
        stack.pop_back();
      }
    }
  }

  std::vector<std::vector<int>> classes;
  std::vector<char> assigned(n, 0);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    if (assigned[*it]) continue;
    std::vector<int> comp;
    std::vector<int> stack{*it};
    assigned[*it] = 1;
    while (!stack.empty()) {
      int v = stack.back();
      stack.pop_back();
      comp.push_back(v);
      for (int w : radj[v])
        if (!assigned[w]) {
          assigned[w] = 1;
          stack.push_back(w);
        }
    }
    std::sort(comp.begin(), comp.end());
    classes.push_back(std::move(comp));
  }
  return classes;
}

// Period of the strongly connected class containing `root`: gcd of
// d(u) + 1 - d(v) over edges u -> v inside the class, where d is BFS
// depth from root.
int class_period(const std::vector<std::vector<int>>& adj,
                 const std::vector<int>& members, int root) {
  const int n = static_cast<int>(adj.size());
  std::vector<char> in_class(n, 0);
  for (int v : members) in_class[v] = 1;
  std::vector<int> depth(n, -1);
  depth[root] = 0;
  std::queue<int> bfs;
  bfs.push(root);
  int g = 0;
  while (!bfs.empty()) {
    int u = bfs.front();
    bfs.pop();
    for (int v : adj[u]) {
      if (!in_class[v]) continue;
      if (depth[v] < 0) {
        depth[v] = depth[u] + 1;
        bfs.push(v);
      }
      g = std::gcd(g, std::abs(depth[u] + 1 - depth[v]));
    }
  }
  return g == 0 ? 1 : g;
}

Eigen::MatrixXd to_eigen(const Matrix& rows) {
  const int n = static_cast<int>(rows.size());
  Eigen::MatrixXd q(n, n);
  for (int x = 0; x < n; ++x)
    for (int y = 0; y < n; ++y) q(x, y) = rows[x][y];
  return q;
}

// Stationary law by replacing one balance equation with the
// normalization constraint: solve (Q^T - I) pi = 0, sum pi = 1.
std::vector<double> stationary_direct(const Matrix& rows) {
  const int n = static_cast<int>(rows.size());
  Eigen::MatrixXd a = to_eigen(rows).transpose() - Eigen::MatrixXd::Identity(n, n);
  for (int y = 0; y < n; ++y) a(n - 1, y) = 1.0;
  Eigen::VectorXd b = Eigen::VectorXd::Zero(n);
  b(n - 1) = 1.0;
  Eigen::VectorXd pi = a.partialPivLu().solve(b);
  // One refinement step keeps the balance residual near machine level.
  Eigen::VectorXd r = b - a * pi;
  pi += a.partialPivLu().solve(r);
  return {pi.data(), pi.data() + n};
}

// Averaged power iteration for large tables; requires ergodicity, which
// the caller has already established.
std::vector<double> stationary_power(const Matrix& rows) {
  const int n = static_cast<int>(rows.size());
  std::vector<double> pi(n, 1.0 / n), next(n);
  const long max_iters = 200000;
  for (long it = 0; it < max_iters; ++it) {
    std::fill(next.begin(), next.end(), 0.0);
    for (int x = 0; x < n; ++x) {
      const double w = pi[x];
      if (w == 0.0) continue;
      const auto& row = rows[x];
      for (int y = 0; y < n; ++y) next[y] += w * row[y];
    }
    double diff = 0.0;
    for (int y = 0; y < n; ++y) diff += std::abs(next[y] - pi[y]);
    pi.swap(next);
    if (diff < 1e-14) {
      double total = std::accumulate(pi.begin(), pi.end(), 0.0);
      for (double& v : pi) v /= total;
      return pi;
    }
  }
  throw NoConvergence(
      "stationary distribution power iteration hit its iteration cap");
}

}  // namespace

ErgodicityReport check_ergodic(const Matrix& rows) {
  const int n = validated_size(rows);
  ErgodicityReport report;
  const auto adj = adjacency(rows);
  report.classes = strong_components(adj);
  report.irreducible = report.classes.size() == 1;

  // Period of state 0's class (the whole chain when irreducible).
  const std::vector<int>* home = nullptr;
  for (const auto& c : report.classes)
    if (std::find(c.begin(), c.end(), 0) != c.end()) home = &c;
  report.period = class_period(adj, *home, 0);
  report.ergodic = report.irreducible && report.period == 1;
  report.spectral_gap = spectral_gap_estimate(rows, &report.gap_is_bound);
  (void)n;
  return report;
}

double spectral_gap_estimate(const Matrix& rows, bool* is_bound) {
  const int n = validated_size(rows);
  if (n <= 64) {
    Eigen::EigenSolver<Eigen::MatrixXd> solver(to_eigen(rows), false);
    // Drop exactly one unit eigenvalue (the Perron root); the gap is one
    // minus the largest remaining modulus.
    std::vector<double> mods(n);
    for (int i = 0; i < n; ++i) mods[i] = std::abs(solver.eigenvalues()(i));
    auto top = std::max_element(mods.begin(), mods.end());
    mods.erase(top);
    double second = mods.empty() ? 0.0 : *std::max_element(mods.begin(), mods.end());
    if (is_bound) *is_bound = false;
    return 1.0 - std::min(second, 1.0);
  }
  // Dobrushin contraction coefficient: max over row pairs of the
  // total-variation distance.  1 - delta(Q) lower-bounds the gap.
  double delta = 0.0;
  for (int x = 0; x < n; ++x)
    for (int z = x + 1; z < n; ++z) {
      double tv = 0.0;
      for (int y = 0; y < n; ++y) tv += std::abs(rows[x][y] - rows[z][y]);
      delta = std::max(delta, 0.5 * tv);
    }
  if (is_bound) *is_bound = true;
  return 1.0 - delta;
}

std::vector<double> stationary_distribution(const Matrix& rows) {
  const int n = validated_size(rows);
  ErgodicityReport report = check_ergodic(rows);
  if (!report.ergodic)
    throw NotErgodic(report.irreducible
                         ? "chain is periodic"
                         : "chain is reducible");
  std::vector<double> pi =
      n <= 64 ? stationary_direct(rows) : stationary_power(rows);

  // Eager validation: positivity, normalization, and balance.
  double total = 0.0;
  for (int x = 0; x < n; ++x) {
    if (!(pi[x] > 0.0)) {
      std::ostringstream msg;
      msg << "stationary weight of state " << x << " is not strictly positive";
      throw NotErgodic(msg.str());
    }
    total += pi[x];
  }
  if (std::abs(total - 1.0) > 1e-12)
    throw NoConvergence("stationary distribution failed to normalize");
  for (int y = 0; y < n; ++y) {
    double balance = -pi[y];
    for (int x = 0; x < n; ++x) balance += pi[x] * rows[x][y];
    if (std::abs(balance) > 1e-12)
      throw NoConvergence("stationary distribution failed the balance check");
  }
  return pi;
}

MarkovKernel MarkovKernel::from_rows(const Matrix& rows,
                                     std::vector<std::string> labels) {
  const int n = validated_size(rows);
  if (!labels.empty() && static_cast<int>(labels.size()) != n)
    throw NonStochasticRow("label count does not match state count");

  MarkovKernel k;
  k.n_ = n;
  k.ergodicity_ = check_ergodic(rows);
  if (!k.ergodicity_.ergodic)
    throw NotErgodic(k.ergodicity_.irreducible ? "chain is periodic"
                                               : "chain is reducible");

  // Renormalize rows so downstream sums see row totals exact to 1e-12.
  k.p_.resize(static_cast<std::size_t>(n) * n);
  k.cdf_.resize(static_cast<std::size_t>(n) * n);
  Matrix normalized(rows);
  for (int x = 0; x < n; ++x) {
    double sum = std::accumulate(rows[x].begin(), rows[x].end(), 0.0);
    double run = 0.0;
    for (int y = 0; y < n; ++y) {
      const double v = rows[x][y] / sum;
      normalized[x][y] = v;
      k.p_[static_cast<std::size_t>(x) * n + y] = v;
      run += v;
      k.cdf_[static_cast<std::size_t>(x) * n + y] = run;
    }
    // Force the last running sum so u = 1 always lands on a valid state.
    k.cdf_[static_cast<std::size_t>(x) * n + (n - 1)] = 1.0;
  }

  k.pi_ = stationary_distribution(normalized);

  if (labels.empty()) {
    labels.resize(n);
    for (int x = 0; x < n; ++x) labels[x] = std::to_string(x);
  }
  k.labels_ = std::move(labels);
  return k;
}

Matrix MarkovKernel::rows() const {
  Matrix out(n_, std::vector<double>(n_));
  for (int x = 0; x < n_; ++x)
    for (int y = 0; y < n_; ++y) out[x][y] = at(x, y);
  return out;
}

std::vector<double> MarkovKernel::apply(const std::vector<double>& f) const {
  if (static_cast<int>(f.size()) != n_)
    throw std::invalid_argument("observable size does not match state count");
  std::vector<double> out(n_, 0.0);
  for (int x = 0; x < n_; ++x) {
    const double* row = p_.data() + static_cast<std::size_t>(x) * n_;
    double acc = 0.0;
    for (int y = 0; y < n_; ++y) acc += row[y] * f[y];
    out[x] = acc;
  }
  return out;
}

double MarkovKernel::mean_under_pi(const std::vector<double>& f) const {
  if (static_cast<int>(f.size()) != n_)
    throw std::invalid_argument("observable size does not match state count");
  double acc = 0.0;
  for (int x = 0; x < n_; ++x) acc += pi_[x] * f[x];
  return acc;
}

int MarkovKernel::step(int x, double u) const {
  const double* cdf = cdf_.data() + static_cast<std::size_t>(x) * n_;
  const double* hit = std::lower_bound(cdf, cdf + n_, u);
  return static_cast<int>(hit - cdf);
}

MarkovKernel build_kernel(const Matrix& rows, std::vector<std::string> labels) {
  return MarkovKernel::from_rows(rows, std::move(labels));
}

bool check_reversible(const MarkovKernel& kernel, double tol,
                      double* max_violation) {
  const int n = kernel.size();
  const auto& pi = kernel.pi();
  double worst = 0.0;
  for (int x = 0; x < n; ++x)
    for (int y = x + 1; y < n; ++y)
      worst = std::max(
          worst, std::abs(pi[x] * kernel.at(x, y) - pi[y] * kernel.at(y, x)));
  if (max_violation) *max_violation = worst;
  return worst <= tol;
}

MarkovKernel random_walk_kernel(const Matrix& weights, double hold) {
  const int n = static_cast<int>(weights.size());
  if (n == 0) throw NonStochasticRow("weight table is empty");
  if (!(hold >= 0.0 && hold < 1.0))
    throw std::invalid_argument("hold probability must lie in [0, 1)");
  for (int x = 0; x < n; ++x) {
    if (static_cast<int>(weights[x].size()) != n)
      throw NonStochasticRow("weight table is not square");
    for (int y = 0; y < n; ++y) {
      if (!(weights[x][y] >= 0.0) || !std::isfinite(weights[x][y]))
        throw NonStochasticRow("edge weights must be finite and nonnegative");
      if (std::abs(weights[x][y] - weights[y][x]) > 1e-12)
        throw NonStochasticRow("edge weights must be symmetric");
    }
  }

  // Connectivity of the weight graph.
  std::vector<char> seen(n, 0);
  std::vector<int> stack{0};
  seen[0] = 1;
  int reached = 1;
  while (!stack.empty()) {
    int x = stack.back();
    stack.pop_back();
    for (int y = 0; y < n; ++y)
      if (weights[x][y] > 0.0 && !seen[y]) {
        seen[y] = 1;
        ++reached;
        stack.push_back(y);
      }
  }
  if (reached != n) throw Disconnected("weight graph is not connected");

  Matrix rows(n, std::vector<double>(n, 0.0));
  for (int x = 0; x < n; ++x) {
    double degree = std::accumulate(weights[x].begin(), weights[x].end(), 0.0);
    if (degree <= 0.0) throw Disconnected("state has zero total weight");
    for (int y = 0; y < n; ++y)
      rows[x][y] = (1.0 - hold) * weights[x][y] / degree;
    rows[x][x] += hold;
  }
  return MarkovKernel::from_rows(rows);
}

MarkovKernel metropolis_kernel(const std::vector<double>& target,
                               const Matrix& proposal) {
  const int n = static_cast<int>(target.size());
  if (n == 0) throw ZeroTargetWeight("target distribution is empty");
  for (double w : target)
    if (!(w > 0.0) || !std::isfinite(w))
      throw ZeroTargetWeight("target weights must be strictly positive");
  if (static_cast<int>(proposal.size()) != n)
    throw NonStochasticRow("proposal size does not match target");
  for (int x = 0; x < n; ++x)
    for (int y = 0; y < n; ++y)
      if (std::abs(proposal[x][y] - proposal[y][x]) > 1e-12)
        throw NonStochasticRow("proposal table must be symmetric");
  (void)validated_size(proposal);

  Matrix rows(n, std::vector<double>(n, 0.0));
  for (int x = 0; x < n; ++x) {
    double reject = 0.0;
    for (int y = 0; y < n; ++y) {
      if (y == x) continue;
      const double accept = std::min(1.0, target[y] / target[x]);
      rows[x][y] = proposal[x][y] * accept;
      reject += proposal[x][y] * (1.0 - accept);
    }
    rows[x][x] = proposal[x][x] + reject;
  }
  return MarkovKernel::from_rows(rows);
}

MarkovKernel lazy(const MarkovKernel& kernel, double hold) {
  if (!(hold > 0.0 && hold < 1.0))
    throw std::invalid_argument("hold probability must lie in (0, 1)");
  const int n = kernel.size();
  Matrix rows(n, std::vector<double>(n, 0.0));
  for (int x = 0; x < n; ++x) {
    for (int y = 0; y < n; ++y) rows[x][y] = (1.0 - hold) * kernel.at(x, y);
    rows[x][x] += hold;
  }
  return MarkovKernel::from_rows(rows, kernel.labels());
}

}  // namespace qclt
