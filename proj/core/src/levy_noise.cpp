#include "sfdde/levy_noise.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <math.h>  // pchip.hpp calls unqualified isnan
#include <boost/math/interpolators/pchip.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "sfdde/error.hpp"
#include "sfdde/random.hpp"

namespace sfdde {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
// e^{-x} < 1e-16 beyond this many decay lengths.
constexpr double kTailDecayLengths = 36.8413614879;

using Integrand = std::function<double(double)>;

double panel(const Integrand& f, double a, double b, const QuadratureOptions& options) {
  // mapped to [0, 1]: the error estimate stalls on tiny raw intervals near the origin
  const double width = b - a;
  const auto unit = [&](double u) { return width * f(a + width * u); };
  double error = 0.0;
  const double value = boost::math::quadrature::gauss_kronrod<double, 15>::integrate(
      unit, 0.0, 1.0, options.max_depth, options.relative_tolerance * 0.1, &error);
  if (!std::isfinite(value)) {
    std::ostringstream msg;
    msg << "integrand not finite on [" << a << ", " << b << "]";
    throw Error(ErrorCode::NonIntegrable, msg.str());
  }
  return value;
}

// Geometric panels [s 2^{-k-1}, s 2^{-k}] accumulated until the geometric
// remainder estimate falls below the tolerance.
double integrate_origin(const Integrand& f, double s, const QuadratureOptions& options) {
  double sum = 0.0;
  double previous = 0.0;
  int zero_run = 0;
  double hi = s;
  for (int k = 0; k < options.max_panels; ++k) {
    const double lo = hi * 0.5;
    const double c = panel(f, lo, hi, options);
    sum += c;
    hi = lo;
    const double target = 0.1 * options.relative_tolerance * std::abs(sum);
    zero_run = (c == 0.0) ? zero_run + 1 : 0;
    if (zero_run >= 4) return sum;
    if (k >= 3 && c != 0.0 && previous != 0.0) {
      const double q = std::abs(c / previous);
      if (q < 0.95 && std::abs(c) * q / (1.0 - q) <= target) return sum;
    }
    previous = c;
  }
  throw Error(ErrorCode::NonIntegrable, "integral does not converge at the origin");
}

// Geometric panels [a 2^k, a 2^{k+1}] up to b (possibly infinite).
double integrate_outward(const Integrand& f, double a, double b, const QuadratureOptions& options) {
  double sum = 0.0;
  double previous = 0.0;
  int zero_run = 0;
  double lo = a;
  for (int k = 0; k < options.max_panels; ++k) {
    const double hi = std::min(b, lo * 2.0);
    const double c = panel(f, lo, hi, options);
    sum += c;
    if (hi >= b) return sum;
    lo = hi;
    if (std::isinf(b)) {
      const double target = 0.1 * options.relative_tolerance * std::abs(sum);
      zero_run = (c == 0.0) ? zero_run + 1 : 0;
      if (zero_run >= 4) return sum;
      if (k >= 3 && c != 0.0 && previous != 0.0) {
        const double q = std::abs(c / previous);
        if (q < 0.95 && std::abs(c) * q / (1.0 - q) <= target) return sum;
      }
    }
    previous = c;
  }
  throw Error(ErrorCode::NonIntegrable, "integral does not converge in the tail");
}

double integrate_range(const Integrand& f, double a, double b, const QuadratureOptions& options) {
  if (!(a < b)) return 0.0;
  if (a == 0.0) {
    const double split = std::isinf(b) ? 1.0 : b;
    double total = integrate_origin(f, split, options);
    if (split < b) total += integrate_outward(f, split, b, options);
    return total;
  }
  return integrate_outward(f, a, b, options);
}

// Magnitude support [lo, hi] of one side (+1 / -1) of a density measure.
std::pair<double, double> side_support(const LevyMeasure::Spec& spec, int side) {
  if (const auto* d = std::get_if<DensityMeasure>(&spec)) {
    if (side > 0) {
      if (d->upper <= 0.0) return {0.0, 0.0};
      return {std::max(0.0, d->lower), d->upper};
    }
    if (d->lower >= 0.0) return {0.0, 0.0};
    return {std::max(0.0, -d->upper), -d->lower};
  }
  return {0.0, kInf};
}

}  // namespace

bool MagnitudeBand::contains(double z) const {
  const double m = std::abs(z);
  return m >= lower && m < upper;
}

LevyMeasure::LevyMeasure(Spec spec) : spec_(std::move(spec)) {
  if (const auto* a = std::get_if<AtomList>(&spec_)) {
    for (const auto& [position, weight] : a->atoms) {
      if (position == 0.0 || !std::isfinite(position)) {
        throw Error(ErrorCode::InvalidArgument, "atom positions must be finite and nonzero");
      }
      if (!(weight > 0.0) || !std::isfinite(weight)) {
        throw Error(ErrorCode::InvalidArgument, "atom masses must be positive and finite");
      }
    }
    return;
  }
  if (const auto* t = std::get_if<TemperedStable>(&spec_)) {
    if (!(t->alpha > 0.0 && t->alpha < 2.0) || !(t->c > 0.0) || !(t->beta > 0.0)) {
      throw Error(ErrorCode::InvalidArgument, "tempered stable needs alpha in (0,2), c > 0, beta > 0");
    }
    return;
  }
  const auto& d = std::get<DensityMeasure>(spec_);
  if (!d.density || !(d.lower < d.upper)) {
    throw Error(ErrorCode::InvalidArgument, "density measure needs a callable and lower < upper");
  }
  // Levy integrability: int min(1, z^2) nu(dz) < infinity.
  const double levy_mass = integrate([](double z) { return std::min(1.0, z * z); });
  if (!std::isfinite(levy_mass)) throw Error(ErrorCode::NonIntegrable, "int min(1,z^2) nu(dz) diverges");
}

LevyMeasure LevyMeasure::atoms(std::vector<std::pair<double, double>> atoms) {
  return LevyMeasure(AtomList{std::move(atoms)});
}

LevyMeasure LevyMeasure::tempered_stable(double alpha, double c, double beta) {
  return LevyMeasure(TemperedStable{alpha, c, beta});
}

LevyMeasure LevyMeasure::density(std::function<double(double)> rho, double lower, double upper) {
  return LevyMeasure(DensityMeasure{std::move(rho), lower, upper});
}

double LevyMeasure::density_at(double z) const {
  if (z == 0.0) return 0.0;
  if (const auto* t = std::get_if<TemperedStable>(&spec_)) {
    const double m = std::abs(z);
    return t->c * std::exp(-t->beta * m) / std::pow(m, 1.0 + t->alpha);
  }
  if (const auto* d = std::get_if<DensityMeasure>(&spec_)) {
    if (z < d->lower || z > d->upper) return 0.0;
    return d->density(z);
  }
  return 0.0;
}

double LevyMeasure::magnitude_cutoff(int side) const {
  if (const auto* t = std::get_if<TemperedStable>(&spec_)) return kTailDecayLengths / t->beta;
  if (const auto* a = std::get_if<AtomList>(&spec_)) {
    double m = 0.0;
    for (const auto& [position, weight] : a->atoms) {
      if ((position > 0.0) == (side > 0)) m = std::max(m, std::abs(position));
    }
    return m;
  }
  const auto [lo, hi] = side_support(spec_, side);
  if (std::isfinite(hi)) return hi;
  // Unbounded support: double until the next octave carries negligible mass.
  const double total = integrate_side([](double) { return 1.0; }, side, MagnitudeBand::at_or_above(1.0), {});
  double b = std::max(1.0, lo);
  for (int k = 0; k < 200; ++k) {
    const double tail = integrate_side([](double) { return 1.0; }, side, MagnitudeBand::at_or_above(b), {});
    if (tail <= 1e-15 * std::max(total, 1e-300)) return b;
    b *= 2.0;
  }
  return b;
}

double LevyMeasure::integrate_side(const Integrand& g, int side, MagnitudeBand band,
                                   const QuadratureOptions& options) const {
  const auto [support_lo, support_hi] = side_support(spec_, side);
  double a = std::max(band.lower, support_lo);
  double b = std::min(band.upper, support_hi);
  if (const auto* t = std::get_if<TemperedStable>(&spec_)) b = std::min(b, kTailDecayLengths / t->beta);
  if (!(a < b)) return 0.0;
  const double s = static_cast<double>(side);
  const Integrand f = [&](double u) { return g(s * u) * density_at(s * u); };
  return integrate_range(f, a, b, options);
}

double LevyMeasure::integrate(const Integrand& g, MagnitudeBand band, const QuadratureOptions& options) const {
  if (const auto* a = std::get_if<AtomList>(&spec_)) {
    double sum = 0.0;
    for (const auto& [position, weight] : a->atoms) {
      if (band.contains(position)) sum += weight * g(position);
    }
    return sum;
  }
  return integrate_side(g, +1, band, options) + integrate_side(g, -1, band, options);
}

double LevyMeasure::mass(MagnitudeBand band, const QuadratureOptions& options) const {
  if (band.lower <= 0.0 && std::holds_alternative<TemperedStable>(spec_)) {
    throw Error(ErrorCode::InfiniteRate, "tempered stable measure has infinite mass near the origin");
  }
  try {
    return integrate([](double) { return 1.0; }, band, options);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::NonIntegrable && band.lower <= 0.0) {
      throw Error(ErrorCode::InfiniteRate, "measure has infinite mass near the origin");
    }
    throw;
  }
}

JumpScaling::JumpScaling(int rows, int cols, std::vector<Entry> entries)
    : rows_(rows), cols_(cols), entries_(std::move(entries)) {
  if (rows <= 0 || cols <= 0 || entries_.size() != static_cast<std::size_t>(rows * cols)) {
    throw Error(ErrorCode::DimensionMismatch, "jump scaling needs rows*cols entries");
  }
}

JumpScaling JumpScaling::uniform(int rows, int cols, Entry entry) {
  return JumpScaling(rows, cols, std::vector<Entry>(static_cast<std::size_t>(rows * cols), entry));
}

Eigen::VectorXd JumpScaling::column(int j, double z) const {
  Eigen::VectorXd out(rows_);
  for (int i = 0; i < rows_; ++i) out[i] = (*this)(i, j, z);
  return out;
}

Eigen::MatrixXd JumpScaling::operator()(double z) const {
  Eigen::MatrixXd out(rows_, cols_);
  for (int i = 0; i < rows_; ++i) {
    for (int j = 0; j < cols_; ++j) out(i, j) = (*this)(i, j, z);
  }
  return out;
}

void JumpScaling::validate(std::span<const LevyMeasure> nu, double p) const {
  if (static_cast<int>(nu.size()) != cols_) {
    throw Error(ErrorCode::DimensionMismatch, "jump scaling column count differs from number of measures");
  }
  for (double q : {2.0, p}) {
    const double norm = lp_nu_norm(*this, nu, q);
    if (!std::isfinite(norm)) throw Error(ErrorCode::NonIntegrable, "jump scaling is not in L^2 and L^p");
  }
}

double lp_nu_norm(const MatrixFunction& h, int rows, int cols, std::span<const LevyMeasure> nu, double p,
                  MagnitudeBand band, const QuadratureOptions& options) {
  if (static_cast<int>(nu.size()) != cols) {
    throw Error(ErrorCode::DimensionMismatch, "H has a different column count than the number of measures");
  }
  double total = 0.0;
  for (int j = 0; j < cols; ++j) {
    total += nu[static_cast<std::size_t>(j)].integrate(
        [&](double z) {
          const Eigen::MatrixXd value = h(z);
          if (value.rows() != rows || value.cols() != cols) {
            throw Error(ErrorCode::DimensionMismatch, "H(z) has unexpected shape");
          }
          return std::pow(value.col(j).norm(), p);
        },
        band, options);
  }
  return std::pow(total, 1.0 / p);
}

double lp_nu_norm(const JumpScaling& scaling, std::span<const LevyMeasure> nu, double p, MagnitudeBand band,
                  const QuadratureOptions& options) {
  if (static_cast<int>(nu.size()) != scaling.cols()) {
    throw Error(ErrorCode::DimensionMismatch, "scaling has a different column count than the number of measures");
  }
  double total = 0.0;
  for (int j = 0; j < scaling.cols(); ++j) {
    total += nu[static_cast<std::size_t>(j)].integrate(
        [&](double z) { return std::pow(scaling.column(j, z).norm(), p); }, band, options);
  }
  return std::pow(total, 1.0 / p);
}

Eigen::MatrixXd sigma_eps(const JumpScaling& scaling, std::span<const LevyMeasure> nu, double eps,
                          const QuadratureOptions& options) {
  if (!(eps > 0.0)) throw Error(ErrorCode::InvalidArgument, "sigma_eps needs eps > 0");
  if (static_cast<int>(nu.size()) != scaling.cols()) {
    throw Error(ErrorCode::DimensionMismatch, "scaling has a different column count than the number of measures");
  }
  Eigen::MatrixXd out(scaling.rows(), scaling.cols());
  for (int i = 0; i < scaling.rows(); ++i) {
    for (int j = 0; j < scaling.cols(); ++j) {
      const double sq = nu[static_cast<std::size_t>(j)].integrate(
          [&](double z) {
            const double v = scaling(i, j, z);
            return v * v;
          },
          MagnitudeBand::below(eps), options);
      out(i, j) = std::sqrt(sq);
    }
  }
  return out;
}

Eigen::MatrixXd compensator_integral(const JumpScaling& scaling, std::span<const LevyMeasure> nu, double eps,
                                     const QuadratureOptions& options) {
  if (!(eps > 0.0)) throw Error(ErrorCode::InvalidArgument, "compensator_integral needs eps > 0");
  if (static_cast<int>(nu.size()) != scaling.cols()) {
    throw Error(ErrorCode::DimensionMismatch, "scaling has a different column count than the number of measures");
  }
  Eigen::MatrixXd out(scaling.rows(), scaling.cols());
  for (int i = 0; i < scaling.rows(); ++i) {
    for (int j = 0; j < scaling.cols(); ++j) {
      out(i, j) = nu[static_cast<std::size_t>(j)].integrate([&](double z) { return scaling(i, j, z); },
                                                            MagnitudeBand::at_or_above(eps), options);
    }
  }
  return out;
}

double JumpSampler::SideTable::invert(double u) const {
  // Cubic Hermite on (cumulative, magnitude) with monotone slopes.
  const auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
  std::size_t i = static_cast<std::size_t>(std::max<std::ptrdiff_t>(1, it - cumulative.begin())) - 1;
  i = std::min(i, cumulative.size() - 2);
  const double x0 = cumulative[i], x1 = cumulative[i + 1];
  const double h = x1 - x0;
  const double t = std::clamp((u - x0) / h, 0.0, 1.0);
  const double t2 = t * t, t3 = t2 * t;
  const double h00 = 2 * t3 - 3 * t2 + 1, h10 = t3 - 2 * t2 + t, h01 = -2 * t3 + 3 * t2, h11 = t3 - t2;
  const double z = h00 * magnitude[i] + h10 * h * slope[i] + h01 * magnitude[i + 1] + h11 * h * slope[i + 1];
  return std::clamp(z, magnitude[i], magnitude[i + 1]);
}

double JumpSampler::SideTable::cdf(double m) const {
  if (m <= magnitude.front()) return 0.0;
  if (m >= magnitude.back()) return 1.0;
  // Bisection on the monotone inverse.
  double lo = 0.0, hi = cumulative.back();
  for (int iter = 0; iter < 200 && hi - lo > 1e-15 * cumulative.back(); ++iter) {
    const double mid = 0.5 * (lo + hi);
    (invert(mid) < m ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi) / cumulative.back();
}

JumpSampler::JumpSampler(const LevyMeasure& measure, double eps, const QuadratureOptions& options) : eps_(eps) {
  if (!(eps >= 0.0)) throw Error(ErrorCode::InvalidArgument, "truncation level must be nonnegative");
  const MagnitudeBand band = MagnitudeBand::at_or_above(eps);
  rate_ = measure.mass(band, options);
  if (!std::isfinite(rate_)) throw Error(ErrorCode::InfiniteRate, "large-jump rate is infinite");

  if (const auto* atoms = std::get_if<AtomList>(&measure.spec())) {
    atoms_ = true;
    double running = 0.0;
    for (const auto& [position, weight] : atoms->atoms) {
      if (!band.contains(position)) continue;
      running += weight;
      atom_cumulative_.push_back(running);
      atom_position_.push_back(position);
    }
    return;
  }

  auto build_side = [&](int side) {
    SideTable table;
    const auto support = [&]() -> std::pair<double, double> {
      if (const auto* d = std::get_if<DensityMeasure>(&measure.spec())) {
        if (side > 0) return {std::max(0.0, d->lower), d->upper};
        return {std::max(0.0, -d->upper), -d->lower};
      }
      return {0.0, kInf};
    }();
    const double a = std::max(eps, support.first);
    const double b = std::min(support.second, measure.magnitude_cutoff(side));
    if (!(a < b)) return table;
    const double s = static_cast<double>(side);
    const Integrand rho = [&](double u) { return measure.density_at(s * u); };
    std::vector<double> nodes(kTableNodes);
    const bool log_spacing = a > 0.0 && b / a > 8.0;
    for (int i = 0; i < kTableNodes; ++i) {
      const double frac = static_cast<double>(i) / (kTableNodes - 1);
      nodes[static_cast<std::size_t>(i)] = log_spacing ? a * std::pow(b / a, frac) : a + (b - a) * frac;
    }
    nodes.back() = b;
    table.cumulative.push_back(0.0);
    table.magnitude.push_back(a);
    double running = 0.0;
    for (std::size_t i = 0; i + 1 < nodes.size(); ++i) {
      const double cell = (nodes[i] == 0.0) ? integrate_range(rho, 0.0, nodes[i + 1], options)
                                            : panel(rho, nodes[i], nodes[i + 1], options);
      if (!(cell > 0.0) || running + cell == running) continue;
      running += cell;
      table.cumulative.push_back(running);
      table.magnitude.push_back(nodes[i + 1]);
    }
    table.mass = running;
    if (table.cumulative.size() < 2) {
      table.mass = 0.0;
      return table;
    }
    // Monotone slopes via Boost's PCHIP on the inverse map F -> |z|.
    auto x = table.cumulative;
    auto y = table.magnitude;
    const boost::math::interpolators::pchip<std::vector<double>> spline(std::move(x), std::move(y));
    table.slope.resize(table.cumulative.size());
    for (std::size_t i = 0; i < table.cumulative.size(); ++i) table.slope[i] = spline.prime(table.cumulative[i]);
    return table;
  };
  positive_ = build_side(+1);
  negative_ = build_side(-1);
}

double JumpSampler::mark_cdf(double z) const {
  if (atoms_) {
    double below = 0.0;
    for (std::size_t i = 0; i < atom_position_.size(); ++i) {
      const double w = atom_cumulative_[i] - (i == 0 ? 0.0 : atom_cumulative_[i - 1]);
      if (atom_position_[i] <= z) below += w;
    }
    return atom_cumulative_.empty() ? 0.0 : below / atom_cumulative_.back();
  }
  const double total = positive_.mass + negative_.mass;
  if (total == 0.0) return 0.0;
  if (z < 0.0) {
    if (negative_.mass == 0.0) return 0.0;
    return negative_.mass * (1.0 - negative_.cdf(-z)) / total;
  }
  const double pos = positive_.mass == 0.0 ? 0.0 : positive_.mass * positive_.cdf(z);
  return (negative_.mass + pos) / total;
}

double JumpSampler::sample_mark(RandomStream& stream) const {
  if (atoms_) {
    const double u = stream.uniform() * atom_cumulative_.back();
    const auto it = std::upper_bound(atom_cumulative_.begin(), atom_cumulative_.end(), u);
    const auto idx = std::min<std::size_t>(static_cast<std::size_t>(it - atom_cumulative_.begin()),
                                           atom_position_.size() - 1);
    return atom_position_[idx];
  }
  const double total = positive_.mass + negative_.mass;
  const bool positive = stream.uniform() * total < positive_.mass;
  const SideTable& table = positive ? positive_ : negative_;
  const double magnitude = table.invert(stream.uniform() * table.mass);
  return positive ? magnitude : -magnitude;
}

void JumpSampler::sample(double horizon, int component, RandomStream& stream, std::vector<JumpEvent>& out) const {
  if (rate_ <= 0.0) return;
  if (atoms_ ? atom_position_.empty() : positive_.mass + negative_.mass <= 0.0) return;
  double t = 0.0;
  for (;;) {
    t += stream.exponential() / rate_;
    if (t > horizon) break;
    out.push_back({t, component, sample_mark(stream)});
  }
}

std::vector<JumpEvent> sample_large_jumps(std::span<const JumpSampler> samplers, double horizon,
                                          std::uint64_t seed, std::uint64_t path) {
  std::vector<JumpEvent> events;
  for (std::size_t j = 0; j < samplers.size(); ++j) {
    RandomStream stream(seed, path, jump_purpose(static_cast<int>(j)));
    samplers[j].sample(horizon, static_cast<int>(j), stream, events);
  }
  std::stable_sort(events.begin(), events.end(),
                   [](const JumpEvent& a, const JumpEvent& b) { return a.time < b.time; });
  return events;
}

std::vector<JumpEvent> sample_large_jumps(std::span<const LevyMeasure> nu, double eps, double horizon,
                                          std::uint64_t seed, std::uint64_t path) {
  std::vector<JumpSampler> samplers;
  samplers.reserve(nu.size());
  for (const auto& measure : nu) samplers.emplace_back(measure, eps);
  return sample_large_jumps(samplers, horizon, seed, path);
}

}  // namespace sfdde
