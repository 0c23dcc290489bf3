#include "sfdde/functionals.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "sfdde/error.hpp"
#include "sfdde/random.hpp"

namespace sfdde {
namespace {

void check_mode_atom(double theta, EvalMode mode) {
  if (mode == EvalMode::Mp && theta != 0.0) {
    std::ostringstream msg;
    msg << "point evaluation at theta = " << theta << " is not defined on M^p";
    throw Error(ErrorCode::ModeViolation, msg.str());
  }
}

}  // namespace

bool is_noisy(const DelayKernel& kernel) {
  return std::holds_alternative<BrownianDelay>(kernel) || std::holds_alternative<LevyDelay>(kernel);
}

bool is_mean_field(const DelayKernel& kernel) { return std::holds_alternative<MeanField>(kernel); }

AuxiliaryState::AuxiliaryState(int kernels, int dim)
    : history_(static_cast<std::size_t>(kernels)), steps_(1), maintained_(true) {
  for (auto& h : history_) h.push_back(Eigen::VectorXd::Zero(dim));
}

const Eigen::VectorXd& AuxiliaryState::value(int kernel, long step) const {
  if (!maintained_) throw Error(ErrorCode::StateNotMaintained, "auxiliary integrals were not maintained");
  const auto& h = history_.at(static_cast<std::size_t>(kernel));
  if (step < 0 || step >= static_cast<long>(h.size())) {
    throw Error(ErrorCode::StateNotMaintained, "auxiliary integral requested outside its recorded range");
  }
  return h[static_cast<std::size_t>(step)];
}

AuxiliaryState AuxiliaryState::truncated(long step) const {
  AuxiliaryState out = *this;
  if (!maintained_) return out;
  for (auto& h : out.history_) {
    if (static_cast<long>(h.size()) > step + 1) h.resize(static_cast<std::size_t>(step + 1));
  }
  out.steps_ = std::min(steps_, step + 1);
  return out;
}

Eigen::VectorXd eval_distributed(const Segment& seg, const Distributed& alpha, EvalMode mode) {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(seg.dim());
  for (const auto& [theta, weight] : alpha.atoms) {
    const int k = seg.offset_of(theta);
    check_mode_atom(theta, mode);
    out += weight * seg.at_step(k);
  }
  if (alpha.density) {
    const double dt = seg.dt();
    for (int k = -seg.window(); k < 0; ++k) out += (alpha.density(k * dt) * dt) * seg.at_step(k);
  }
  return out;
}

Eigen::VectorXd eval_discrete(const Segment& seg, double tau, EvalMode mode) {
  const int k = seg.offset_of(tau);
  check_mode_atom(tau, mode);
  return seg.at_step(k);
}

Eigen::VectorXd eval_noisy_delay(const AuxiliaryState& state, int kernel, long step, int window) {
  if (!state.maintained()) throw Error(ErrorCode::StateNotMaintained, "model built without auxiliary channel");
  const long lagged = std::max(0L, step - window);
  return state.value(kernel, step) - state.value(kernel, lagged);
}

Eigen::VectorXd eval_meanfield(std::span<const Segment> ensemble, const Distributed& alpha, EvalMode mode) {
  if (ensemble.empty()) throw Error(ErrorCode::EmptyEnsemble, "mean-field functional needs at least one path");
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(ensemble.front().dim());
  for (const auto& seg : ensemble) sum += eval_distributed(seg, alpha, mode);
  return sum / static_cast<double>(ensemble.size());
}

double Feature::apply(double x) const {
  switch (transform) {
    case Transform::Identity: return x;
    case Transform::Sin: return std::sin(x);
    case Transform::Cos: return std::cos(x);
    case Transform::Tanh: return std::tanh(x);
    case Transform::Exp: return std::exp(x);
  }
  return x;
}

AffineForm AffineForm::zero(int rows, int cols) { return AffineForm{Eigen::MatrixXd::Zero(rows, cols), {}}; }

AffineForm& AffineForm::add(Eigen::MatrixXd coefficient, Feature feature) {
  if (coefficient.rows() != constant.rows() || coefficient.cols() != constant.cols()) {
    throw Error(ErrorCode::DimensionMismatch, "coefficient term shape differs from the form's shape");
  }
  terms.emplace_back(std::move(coefficient), feature);
  return *this;
}

bool AffineForm::is_zero() const {
  if (!constant.isZero(0.0)) return false;
  for (const auto& [c, feature] : terms) {
    if (!c.isZero(0.0)) return false;
  }
  return true;
}

double AffineForm::lipschitz_bound() const {
  double bound = 0.0;
  for (const auto& [c, feature] : terms) {
    if (feature.source == Feature::Source::Time) continue;
    if (feature.transform == Feature::Transform::Exp) return std::numeric_limits<double>::infinity();
    bound += c.norm();
  }
  return bound;
}

void AffineForm::evaluate(double t, const Eigen::VectorXd& present, std::span<const Eigen::VectorXd> kernels,
                          Eigen::MatrixXd& out) const {
  out = constant;
  for (const auto& [c, feature] : terms) {
    double x = 0.0;
    switch (feature.source) {
      case Feature::Source::Time: x = t; break;
      case Feature::Source::Present: x = present[feature.component]; break;
      case Feature::Source::Kernel: x = kernels[static_cast<std::size_t>(feature.kernel)][feature.component]; break;
    }
    out.noalias() += feature.apply(x) * c;
  }
}

bool SfddeModel::mean_field() const {
  for (const auto& kernel : kernels) {
    if (is_mean_field(kernel)) return true;
  }
  return false;
}

bool SfddeModel::has_noisy_kernels() const {
  for (const auto& kernel : kernels) {
    if (is_noisy(kernel)) return true;
  }
  return false;
}

bool SfddeModel::has_jumps() const {
  if (nu.empty()) return false;
  if (general_jump) return true;
  return !h0.is_zero() && !scaling.empty();
}

void SfddeModel::validate(double dt) const {
  auto shape = [](const AffineForm& form, int rows, int cols, const char* name) {
    if (form.rows() != rows || form.cols() != cols) {
      std::ostringstream msg;
      msg << name << " has shape " << form.rows() << "x" << form.cols() << ", expected " << rows << "x" << cols;
      throw Error(ErrorCode::DimensionMismatch, msg.str());
    }
  };
  if (d <= 0 || m <= 0 || n < 0 || k < 0) throw Error(ErrorCode::DimensionMismatch, "dimensions must be positive");
  shape(f, d, 1, "f");
  shape(g, d, m, "g");
  shape(h0, d, k, "h0");
  if (static_cast<int>(nu.size()) != n) throw Error(ErrorCode::DimensionMismatch, "number of measures differs from n");
  if (!scaling.empty() && (scaling.rows() != k || scaling.cols() != n)) {
    throw Error(ErrorCode::DimensionMismatch, "jump scaling must be k x n");
  }
  grid_multiple(delay, dt, "r");
  const SegmentBuffer probe = SegmentBuffer::constant(Eigen::VectorXd::Zero(d), delay, dt);
  const Segment seg = probe.view();
  for (std::size_t i = 0; i < kernels.size(); ++i) {
    std::visit(
        [&](const auto& kernel) {
          using K = std::decay_t<decltype(kernel)>;
          if constexpr (std::is_same_v<K, Distributed>) {
            eval_distributed(seg, kernel, mode);
          } else if constexpr (std::is_same_v<K, Discrete>) {
            eval_discrete(seg, kernel.tau, mode);
          } else if constexpr (std::is_same_v<K, MeanField>) {
            eval_distributed(seg, kernel.inner, mode);
          } else if constexpr (std::is_same_v<K, BrownianDelay>) {
            if (kernel.noise_component < 0 || kernel.noise_component >= m) {
              throw Error(ErrorCode::DimensionMismatch, "Brownian delay refers to a missing W component");
            }
          } else {
            if (kernel.noise_component < 0 || kernel.noise_component >= n) {
              throw Error(ErrorCode::DimensionMismatch, "Levy delay refers to a missing jump component");
            }
          }
        },
        kernels[i]);
  }
  auto check_features = [&](const AffineForm& form) {
    for (const auto& [c, feature] : form.terms) {
      if (feature.source == Feature::Source::Present && (feature.component < 0 || feature.component >= d)) {
        throw Error(ErrorCode::DimensionMismatch, "feature refers to a missing state component");
      }
      if (feature.source == Feature::Source::Kernel &&
          (feature.kernel < 0 || feature.kernel >= static_cast<int>(kernels.size()) || feature.component < 0 ||
           feature.component >= d)) {
        throw Error(ErrorCode::DimensionMismatch, "feature refers to a missing kernel");
      }
    }
  };
  check_features(f);
  check_features(g);
  check_features(h0);
  if (!scaling.empty() && n > 0) scaling.validate(nu, p);
}

void evaluate_kernels(const SfddeModel& model, const Segment& seg, const AuxiliaryState& aux, long step,
                      EvalContext& ctx, const std::vector<Eigen::VectorXd>* mean_field) {
  ctx.present = seg.present();
  ctx.kernels.resize(model.kernels.size());
  for (std::size_t i = 0; i < model.kernels.size(); ++i) {
    const auto& kernel = model.kernels[i];
    if (const auto* a = std::get_if<Distributed>(&kernel)) {
      ctx.kernels[i] = eval_distributed(seg, *a, model.mode);
    } else if (const auto* q = std::get_if<Discrete>(&kernel)) {
      ctx.kernels[i] = eval_discrete(seg, q->tau, model.mode);
    } else if (is_noisy(kernel)) {
      ctx.kernels[i] = eval_noisy_delay(aux, static_cast<int>(i), step, seg.window());
    } else {
      if (!mean_field) throw Error(ErrorCode::ModeViolation, "mean-field model needs lockstep ensemble solving");
      ctx.kernels[i] = (*mean_field)[i];
    }
  }
}

Eigen::VectorXd eval_drift(const SfddeModel& model, double t, const Segment& seg) {
  if (model.has_noisy_kernels() || model.mean_field()) {
    throw Error(ErrorCode::StateNotMaintained, "drift of a noisy or mean-field model needs solver state");
  }
  EvalContext ctx;
  ctx.t = t;
  evaluate_kernels(model, seg, AuxiliaryState(), 0, ctx);
  Eigen::MatrixXd out;
  model.f.evaluate(t, ctx.present, ctx.kernels, out);
  return out.col(0);
}

double lipschitz_probe(const SfddeModel& model, double t, double dt, int probes, std::uint64_t seed) {
  const int window = grid_multiple(model.delay, dt, "r");
  double worst = 0.0;
  for (int probe = 0; probe < probes; ++probe) {
    RandomStream rng(seed, static_cast<std::uint64_t>(probe), StreamPurpose::Probe);
    auto random_segment = [&] {
      // piecewise constant with a handful of random levels
      const int pieces = 1 + static_cast<int>(rng.uniform() * 8);
      Eigen::MatrixXd v(model.d, window + 1);
      Eigen::VectorXd level(model.d);
      for (int c = 0; c <= window; ++c) {
        if (c == 0 || rng.uniform() < static_cast<double>(pieces) / (window + 1)) {
          for (int i = 0; i < model.d; ++i) level[i] = 4.0 * rng.normal();
        }
        v.col(c) = level;
      }
      return SegmentBuffer(std::move(v), dt);
    };
    const SegmentBuffer a = random_segment();
    const SegmentBuffer b = random_segment();
    const double gap = (a.values - b.values).colwise().norm().maxCoeff();
    if (gap == 0.0) continue;
    const double diff = (eval_drift(model, t, a.view()) - eval_drift(model, t, b.view())).norm();
    worst = std::max(worst, diff / gap);
  }
  return worst;
}

}  // namespace sfdde
