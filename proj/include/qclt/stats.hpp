#pragma once

#include <vector>

namespace qclt::stats {

double normal_cdf(double x);             // standard normal
double normal_cdf(double x, double sd);  // centered with scale sd

// Kolmogorov-Smirnov distance between the empirical law of `samples`
// and a centered normal with variance sigma_sq.  sigma_sq must be
// strictly positive.
double ks_distance_normal(std::vector<double> samples, double sigma_sq);

// Two-sample Kolmogorov-Smirnov distance.
double ks_distance(std::vector<double> a, std::vector<double> b);

// Asymptotic one-sample critical value c(alpha) / sqrt(n) with
// c(alpha) = sqrt(-ln(alpha / 2) / 2); alpha = 0.05 gives 1.358 and
// alpha = 0.01 gives 1.628 for the coefficient.
double ks_critical(double alpha, std::size_t n);

// Two-sample analogue c(alpha) * sqrt((n + m) / (n m)).
double ks_critical_two_sample(double alpha, std::size_t n, std::size_t m);

double mean(const std::vector<double>& xs);
double sample_variance(const std::vector<double>& xs);  // unbiased
double standard_error(const std::vector<double>& xs);
double pearson_correlation(const std::vector<double>& xs,
                           const std::vector<double>& ys);

// Fraction of samples strictly above the threshold.
double tail_fraction(const std::vector<double>& xs, double threshold);

}  // namespace qclt::stats
