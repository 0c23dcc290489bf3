#pragma once

#include <Eigen/Dense>

#include "sfdde/functionals.hpp"

namespace testing_models {

inline Eigen::MatrixXd scalar(double a) { return Eigen::MatrixXd::Constant(1, 1, a); }

inline sfdde::Feature present(int component = 0,
                              sfdde::Feature::Transform tr = sfdde::Feature::Transform::Identity) {
  return {sfdde::Feature::Source::Present, 0, component, tr};
}

inline sfdde::Feature kernel(int index, int component = 0,
                             sfdde::Feature::Transform tr = sfdde::Feature::Transform::Identity) {
  return {sfdde::Feature::Source::Kernel, index, component, tr};
}

inline sfdde::Feature time(sfdde::Feature::Transform tr = sfdde::Feature::Transform::Identity) {
  return {sfdde::Feature::Source::Time, 0, 0, tr};
}

/// Scalar model with zero coefficients, d = m = 1 and no jump components.
inline sfdde::SfddeModel scalar_model(double delay) {
  sfdde::SfddeModel model;
  model.d = model.m = 1;
  model.n = 0;
  model.k = 1;
  model.delay = delay;
  model.f = sfdde::AffineForm::zero(1, 1);
  model.g = sfdde::AffineForm::zero(1, 1);
  model.h0 = sfdde::AffineForm::zero(1, 1);
  return model;
}

/// Adds one jump component with scaling lambda(z) = z.
inline void add_identity_jumps(sfdde::SfddeModel& model, sfdde::LevyMeasure nu) {
  model.n = 1;
  model.nu = {std::move(nu)};
  model.scaling = sfdde::JumpScaling::uniform(model.k, 1, [](double z) { return z; });
}

}  // namespace testing_models
