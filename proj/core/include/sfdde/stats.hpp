#pragma once

#include <cstddef>
#include <span>
#include <utility>

#include <Eigen/Dense>

namespace sfdde::stats {

struct MeanStderr {
  double mean = 0.0;
  double stderr_of_mean = 0.0;
  double sample_variance = 0.0;
  std::size_t count = 0;
};

/// Plain Monte Carlo summary; stderr = sample sd / sqrt(n).
MeanStderr summarize(std::span<const double> samples);

struct LineFit {
  double intercept = 0.0;
  double slope = 0.0;
  double r_squared = 0.0;
};

LineFit fit_line(std::span<const double> x, std::span<const double> y);

/// Ordinary least squares for the overdetermined system design * beta = y.
Eigen::VectorXd least_squares(const Eigen::MatrixXd& design, const Eigen::VectorXd& y);

/// Two-sided chi-square confidence interval for a normal variance given the
/// sample variance of n observations.
std::pair<double, double> variance_interval(double sample_variance, std::size_t n, double confidence);

/// Two-sided normal confidence half-width multiplier, e.g. 2.5758 for 0.99.
double normal_two_sided_quantile(double confidence);

/// Welch two-sample t statistic and its two-sided p-value.
std::pair<double, double> welch_t_test(const MeanStderr& a, const MeanStderr& b);

/// One-sample Kolmogorov-Smirnov statistic of sorted-or-unsorted samples
/// against a CDF, and the asymptotic p-value.
template <class Cdf>
std::pair<double, double> kolmogorov_smirnov(std::span<const double> samples, Cdf&& cdf);

double kolmogorov_pvalue(double statistic, std::size_t n);

/// Upper-tail p-value of a chi-square statistic.
double chi_square_pvalue(double statistic, double dof);

}  // namespace sfdde::stats

#include <algorithm>
#include <vector>

namespace sfdde::stats {

template <class Cdf>
std::pair<double, double> kolmogorov_smirnov(std::span<const double> samples, Cdf&& cdf) {
  std::vector<double> sorted(samples.begin(), samples.end());
  std::sort(sorted.begin(), sorted.end());
  const double n = static_cast<double>(sorted.size());
  double d = 0.0;
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    const double f = cdf(sorted[i]);
    d = std::max({d, f - static_cast<double>(i) / n, static_cast<double>(i + 1) / n - f});
  }
  return {d, kolmogorov_pvalue(d, sorted.size())};
}

}  // namespace sfdde::stats
