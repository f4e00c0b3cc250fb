#include "rbscore/polio_model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace rbscore {

namespace {

constexpr int kTableLength = 1024;
constexpr double kPhiBound = 0.999;
constexpr double kVarianceFloor = 1e-6;

// Parameter slots of phi and sigma2.
constexpr int kPhi = 6;
constexpr int kSigma2 = 7;

void validate(const PolioParams& p) {
  for (double m : p.mu)
    if (!std::isfinite(m)) throw std::invalid_argument("polio: mu must be finite");
  if (!(std::abs(p.phi) < 1.0)) throw std::invalid_argument("polio: |phi| must be < 1");
  if (!(p.sigma2 > 0.0)) throw std::invalid_argument("polio: sigma2 must be > 0");
}

bool is_count(double y) { return y >= 0.0 && std::floor(y) == y; }

}  // namespace

Eigen::VectorXd PolioParams::vector() const {
  Eigen::VectorXd v(PolioModel::kDim);
  for (int i = 0; i < 6; ++i) v[i] = mu[i];
  v[kPhi] = phi;
  v[kSigma2] = sigma2;
  return v;
}

PolioParams PolioParams::from_vector(const Eigen::VectorXd& theta) {
  if (theta.size() != PolioModel::kDim) throw std::invalid_argument("polio: expected 8 parameters");
  PolioParams p;
  for (int i = 0; i < 6; ++i) p.mu[i] = theta[i];
  p.phi = theta[kPhi];
  p.sigma2 = theta[kSigma2];
  return p;
}

PolioModel::PolioModel(const PolioParams& params) : params_(params) {
  validate(params_);
  theta_ = ThetaVector(params_.vector(), {"mu1", "mu2", "mu3", "mu4", "mu5", "mu6", "phi", "sigma2"},
                       {Transform::identity, Transform::identity, Transform::identity,
                        Transform::identity, Transform::identity, Transform::identity,
                        Transform::artanh, Transform::log});
  var_init_ = params_.sigma2 / (1.0 - params_.phi * params_.phi);
  table_.resize(kTableLength + 1);
  z_table_.resize(kTableLength + 1);
  for (int t = 0; t <= kTableLength; ++t) {
    table_[t] = regressors(t);
    double z = 0.0;
    for (int k = 0; k < kRegressors; ++k) z += params_.mu[k] * table_[t][k];
    z_table_[t] = z;
  }
}

std::array<double, PolioModel::kRegressors> PolioModel::regressors(int t) {
  const double a = 2.0 * std::numbers::pi * t / 12.0;
  const double b = 2.0 * std::numbers::pi * t / 6.0;
  return {1.0, t / 1000.0, std::cos(a), std::sin(a), std::cos(b), std::sin(b)};
}

const std::array<double, PolioModel::kRegressors>& PolioModel::regressor_row(
    int t, std::array<double, kRegressors>& scratch) const {
  if (t >= 0 && t <= kTableLength) return table_[t];
  scratch = regressors(t);
  return scratch;
}

double PolioModel::linear_predictor(int t) const {
  if (t >= 0 && t <= kTableLength) return z_table_[t];
  const auto r = regressors(t);
  double z = 0.0;
  for (int k = 0; k < kRegressors; ++k) z += params_.mu[k] * r[k];
  return z;
}

std::shared_ptr<const StateSpaceModel> PolioModel::with_theta(const Eigen::VectorXd& theta) const {
  return std::make_shared<PolioModel>(PolioParams::from_vector(theta));
}

bool PolioModel::admissible(const Eigen::VectorXd& theta) const {
  return theta.size() == kDim && theta.allFinite() && std::abs(theta[kPhi]) < 1.0 &&
         theta[kSigma2] > 0.0;
}

Eigen::VectorXd PolioModel::project(const Eigen::VectorXd& theta) const {
  Eigen::VectorXd out = theta;
  out[kPhi] = std::clamp(out[kPhi], -kPhiBound, kPhiBound);
  out[kSigma2] = std::max(out[kSigma2], kVarianceFloor);
  return out;
}

double PolioModel::init_logpdf(double x) const { return normal_logpdf(x, 0.0, var_init_); }

double PolioModel::init_sample(RandomStream& rng) const { return rng.normal(0.0, std::sqrt(var_init_)); }

double PolioModel::trans_logpdf(double x, double x_prev) const {
  return normal_logpdf(x, params_.phi * x_prev, params_.sigma2);
}

double PolioModel::trans_sample(RandomStream& rng, double x_prev) const {
  return rng.normal(params_.phi * x_prev, std::sqrt(params_.sigma2));
}

double PolioModel::obs_logpdf(double y, double x, int t) const {
  if (!is_count(y)) return -std::numeric_limits<double>::infinity();
  const double eta = x + linear_predictor(t);
  return y * eta - std::exp(eta) - std::lgamma(y + 1.0);
}

double PolioModel::obs_sample(RandomStream& rng, double x, int t) const {
  return static_cast<double>(rng.poisson(std::exp(x + linear_predictor(t))));
}

void PolioModel::grad_log_init(double x, std::span<double> out) const {
  const double phi = params_.phi;
  const double s = 1.0 - phi * phi;
  const double v = var_init_;
  const double dl_dv = -0.5 / v + 0.5 * x * x / (v * v);
  std::fill(out.begin(), out.begin() + kDim, 0.0);
  out[kPhi] = dl_dv * 2.0 * phi * params_.sigma2 / (s * s);
  out[kSigma2] = dl_dv / s;
}

void PolioModel::hess_log_init(double x, std::span<double> out) const {
  const double phi = params_.phi, s2 = params_.sigma2;
  const double s = 1.0 - phi * phi;
  const double v = var_init_;
  const double dl_dv = -0.5 / v + 0.5 * x * x / (v * v);
  const double d2l_dv2 = 0.5 / (v * v) - x * x / (v * v * v);
  const double v_p = 2.0 * phi * s2 / (s * s);
  const double v_s = 1.0 / s;
  const double v_pp = 2.0 * s2 * (1.0 + 3.0 * phi * phi) / (s * s * s);
  const double v_ps = 2.0 * phi / (s * s);
  std::fill(out.begin(), out.begin() + kDim * kDim, 0.0);
  out[kPhi * kDim + kPhi] = d2l_dv2 * v_p * v_p + dl_dv * v_pp;
  out[kPhi * kDim + kSigma2] = d2l_dv2 * v_p * v_s + dl_dv * v_ps;
  out[kSigma2 * kDim + kPhi] = out[kPhi * kDim + kSigma2];
  out[kSigma2 * kDim + kSigma2] = d2l_dv2 * v_s * v_s;
}

void PolioModel::grad_log_f(double x, double x_prev, std::span<double> out) const {
  const double s2 = params_.sigma2;
  const double e = x - params_.phi * x_prev;
  std::fill(out.begin(), out.begin() + kDim, 0.0);
  out[kPhi] = e * x_prev / s2;
  out[kSigma2] = -0.5 / s2 + 0.5 * e * e / (s2 * s2);
}

void PolioModel::hess_log_f(double x, double x_prev, std::span<double> out) const {
  const double s2 = params_.sigma2;
  const double e = x - params_.phi * x_prev;
  std::fill(out.begin(), out.begin() + kDim * kDim, 0.0);
  out[kPhi * kDim + kPhi] = -x_prev * x_prev / s2;
  out[kPhi * kDim + kSigma2] = -e * x_prev / (s2 * s2);
  out[kSigma2 * kDim + kPhi] = out[kPhi * kDim + kSigma2];
  out[kSigma2 * kDim + kSigma2] = 0.5 / (s2 * s2) - e * e / (s2 * s2 * s2);
}

void PolioModel::grad_log_g(double y, double x, int t, std::span<double> out) const {
  std::array<double, kRegressors> scratch;
  const auto& r = regressor_row(t, scratch);
  const double resid = y - std::exp(x + linear_predictor(t));
  for (int k = 0; k < kRegressors; ++k) out[k] = resid * r[k];
  out[kPhi] = 0.0;
  out[kSigma2] = 0.0;
}

void PolioModel::hess_log_g(double, double x, int t, std::span<double> out) const {
  std::array<double, kRegressors> scratch;
  const auto& r = regressor_row(t, scratch);
  const double rate = std::exp(x + linear_predictor(t));
  std::fill(out.begin(), out.begin() + kDim * kDim, 0.0);
  for (int k = 0; k < kRegressors; ++k)
    for (int l = 0; l < kRegressors; ++l) out[k * kDim + l] = -rate * (r[k] * r[l]);
}

std::shared_ptr<const PolioModel> polio_model(const PolioParams& params) {
  return std::make_shared<PolioModel>(params);
}

}  // namespace rbscore
