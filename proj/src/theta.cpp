#include "rbscore/theta.hpp"

#include <cmath>
#include <stdexcept>

namespace rbscore {

namespace {

double first_derivative(Transform t, double theta) {
  switch (t) {
    case Transform::log: return theta;
    case Transform::artanh: return 1.0 - theta * theta;
    default: return 1.0;
  }
}

double second_derivative(Transform t, double theta) {
  switch (t) {
    case Transform::log: return theta;
    case Transform::artanh: return -2.0 * theta * (1.0 - theta * theta);
    default: return 0.0;
  }
}

}  // namespace

ThetaVector::ThetaVector(Eigen::VectorXd values, std::vector<std::string> names)
    : ThetaVector(std::move(values), std::move(names), {}) {}

ThetaVector::ThetaVector(Eigen::VectorXd values, std::vector<std::string> names,
                         std::vector<Transform> transforms)
    : values_(std::move(values)), names_(std::move(names)), transforms_(std::move(transforms)) {
  if (values_.size() < 1) throw std::invalid_argument("parameter vector must have d >= 1");
  if (!values_.allFinite()) throw std::invalid_argument("parameter values must be finite");
  if (names_.empty()) {
    for (int i = 0; i < values_.size(); ++i) names_.push_back("theta_" + std::to_string(i + 1));
  }
  if (transforms_.empty()) transforms_.assign(values_.size(), Transform::identity);
  if (names_.size() != static_cast<std::size_t>(values_.size()) ||
      transforms_.size() != static_cast<std::size_t>(values_.size()))
    throw std::invalid_argument("parameter names/transforms do not match dimension");
}

Eigen::VectorXd ThetaVector::unconstrained() const { return unconstrain(values_, transforms_); }

Eigen::VectorXd ThetaVector::constrain(const Eigen::VectorXd& u, const std::vector<Transform>& tr) {
  Eigen::VectorXd out(u.size());
  for (int i = 0; i < u.size(); ++i) {
    switch (tr[i]) {
      case Transform::log: out[i] = std::exp(u[i]); break;
      case Transform::artanh: out[i] = std::tanh(u[i]); break;
      default: out[i] = u[i];
    }
  }
  return out;
}

Eigen::VectorXd ThetaVector::unconstrain(const Eigen::VectorXd& theta,
                                         const std::vector<Transform>& tr) {
  Eigen::VectorXd out(theta.size());
  for (int i = 0; i < theta.size(); ++i) {
    switch (tr[i]) {
      case Transform::log: out[i] = std::log(theta[i]); break;
      case Transform::artanh: out[i] = std::atanh(theta[i]); break;
      default: out[i] = theta[i];
    }
  }
  return out;
}

Eigen::VectorXd ThetaVector::unconstrained_gradient(const Eigen::VectorXd& grad) const {
  Eigen::VectorXd out(grad.size());
  for (int i = 0; i < grad.size(); ++i) out[i] = grad[i] * first_derivative(transforms_[i], values_[i]);
  return out;
}

Eigen::MatrixXd ThetaVector::unconstrained_information(const Eigen::VectorXd& grad,
                                                       const Eigen::MatrixXd& info) const {
  const int d = size();
  Eigen::VectorXd jac(d);
  for (int i = 0; i < d; ++i) jac[i] = first_derivative(transforms_[i], values_[i]);
  Eigen::MatrixXd out = jac.asDiagonal() * info * jac.asDiagonal();
  // info = -Hessian, so the curvature of the map enters with a minus sign.
  for (int i = 0; i < d; ++i) out(i, i) -= grad[i] * second_derivative(transforms_[i], values_[i]);
  return out;
}

}  // namespace rbscore
