#include "sfdde/stats.hpp"

#include <algorithm>
#include <cmath>

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>

#include "sfdde/error.hpp"

namespace sfdde::stats {

MeanStderr summarize(std::span<const double> samples) {
  MeanStderr out;
  out.count = samples.size();
  if (samples.empty()) return out;
  double sum = 0.0;
  for (double v : samples) sum += v;
  out.mean = sum / static_cast<double>(samples.size());
  if (samples.size() > 1) {
    double ss = 0.0;
    for (double v : samples) ss += (v - out.mean) * (v - out.mean);
    out.sample_variance = ss / static_cast<double>(samples.size() - 1);
    out.stderr_of_mean = std::sqrt(out.sample_variance / static_cast<double>(samples.size()));
  }
  return out;
}

LineFit fit_line(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) {
    throw Error(ErrorCode::InvalidArgument, "fit_line needs at least two paired points");
  }
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  LineFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  fit.r_squared = syy > 0.0 ? (sxy * sxy) / (sxx * syy) : 1.0;
  return fit;
}

Eigen::VectorXd least_squares(const Eigen::MatrixXd& design, const Eigen::VectorXd& y) {
  return design.colPivHouseholderQr().solve(y);
}

std::pair<double, double> variance_interval(double sample_variance, std::size_t n, double confidence) {
  const double dof = static_cast<double>(n - 1);
  const boost::math::chi_squared dist(dof);
  const double alpha = 1.0 - confidence;
  const double upper_q = boost::math::quantile(dist, 1.0 - alpha / 2.0);
  const double lower_q = boost::math::quantile(dist, alpha / 2.0);
  return {dof * sample_variance / upper_q, dof * sample_variance / lower_q};
}

double normal_two_sided_quantile(double confidence) {
  const boost::math::normal dist;
  return boost::math::quantile(dist, 0.5 + confidence / 2.0);
}

std::pair<double, double> welch_t_test(const MeanStderr& a, const MeanStderr& b) {
  const double va = a.stderr_of_mean * a.stderr_of_mean;
  const double vb = b.stderr_of_mean * b.stderr_of_mean;
  const double se = std::sqrt(va + vb);
  if (se == 0.0) return {0.0, a.mean == b.mean ? 1.0 : 0.0};
  const double t = (a.mean - b.mean) / se;
  const double dof = (va + vb) * (va + vb) /
                     (va * va / static_cast<double>(a.count - 1) + vb * vb / static_cast<double>(b.count - 1));
  const boost::math::students_t dist(dof);
  return {t, 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(t)))};
}

double kolmogorov_pvalue(double statistic, std::size_t n) {
  // Asymptotic Kolmogorov distribution with Stephens' small-sample correction.
  const double sqrt_n = std::sqrt(static_cast<double>(n));
  const double lambda = (sqrt_n + 0.12 + 0.11 / sqrt_n) * statistic;
  if (lambda < 0.2) return 1.0;
  double sum = 0.0;
  for (int k = 1; k <= 100; ++k) {
    const double term = std::exp(-2.0 * k * k * lambda * lambda);
    sum += (k % 2 == 1 ? term : -term);
    if (term < 1e-16) break;
  }
  return std::clamp(2.0 * sum, 0.0, 1.0);
}

double chi_square_pvalue(double statistic, double dof) {
  const boost::math::chi_squared dist(dof);
  return boost::math::cdf(boost::math::complement(dist, statistic));
}

}  // namespace sfdde::stats
