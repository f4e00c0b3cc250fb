#include "rbscore/ar1_model.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace rbscore {

namespace {

constexpr double kPhiBound = 0.999;
constexpr double kVarianceFloor = 1e-6;

void validate(const Ar1Params& p) {
  if (!(std::abs(p.phi) < 1.0)) throw std::invalid_argument("ar1: |phi| must be < 1");
  if (!(p.sigma > 0.0)) throw std::invalid_argument("ar1: sigma must be > 0");
  if (!(p.tau > 0.0)) throw std::invalid_argument("ar1: tau must be > 0");
}

}  // namespace

Ar1Params Ar1Params::from_vector(const Eigen::VectorXd& theta) {
  if (theta.size() != 3) throw std::invalid_argument("ar1: expected 3 parameters (phi, sigma, tau)");
  return {theta[0], theta[1], theta[2]};
}

Ar1Model::Ar1Model(const Ar1Params& params, bool optimal_proposal)
    : params_(params), optimal_proposal_(optimal_proposal) {
  validate(params_);
  theta_ = ThetaVector(params_.vector(), {"phi", "sigma", "tau"},
                       {Transform::artanh, Transform::log, Transform::log});
  var_state_ = params_.sigma * params_.sigma;
  var_obs_ = params_.tau * params_.tau;
  var_init_ = params_.stationary_variance();
  pred_var_ = var_state_ + var_obs_;
  prop_var_ = var_state_ * var_obs_ / pred_var_;
  prop_sd_ = std::sqrt(prop_var_);
}

std::shared_ptr<const StateSpaceModel> Ar1Model::with_theta(const Eigen::VectorXd& theta) const {
  return std::make_shared<Ar1Model>(Ar1Params::from_vector(theta), optimal_proposal_);
}

bool Ar1Model::admissible(const Eigen::VectorXd& theta) const {
  return theta.size() == 3 && theta.allFinite() && std::abs(theta[0]) < 1.0 && theta[1] > 0.0 &&
         theta[2] > 0.0;
}

Eigen::VectorXd Ar1Model::project(const Eigen::VectorXd& theta) const {
  Eigen::VectorXd out = theta;
  const double sd_floor = std::sqrt(kVarianceFloor);
  out[0] = std::clamp(out[0], -kPhiBound, kPhiBound);
  out[1] = std::max(out[1], sd_floor);
  out[2] = std::max(out[2], sd_floor);
  return out;
}

double Ar1Model::init_logpdf(double x) const { return normal_logpdf(x, 0.0, var_init_); }

double Ar1Model::init_sample(RandomStream& rng) const { return rng.normal(0.0, std::sqrt(var_init_)); }

double Ar1Model::trans_logpdf(double x, double x_prev) const {
  return normal_logpdf(x, params_.phi * x_prev, var_state_);
}

double Ar1Model::trans_sample(RandomStream& rng, double x_prev) const {
  return rng.normal(params_.phi * x_prev, params_.sigma);
}

double Ar1Model::obs_logpdf(double y, double x, int) const { return normal_logpdf(y, x, var_obs_); }

double Ar1Model::obs_sample(RandomStream& rng, double x, int) const { return rng.normal(x, params_.tau); }

// Initial density in terms of its variance v(phi, sigma) = sigma^2 / (1 - phi^2).
void Ar1Model::grad_log_init(double x, std::span<double> out) const {
  const double phi = params_.phi, sigma = params_.sigma;
  const double s = 1.0 - phi * phi;
  const double v = var_init_;
  const double dl_dv = -0.5 / v + 0.5 * x * x / (v * v);
  out[0] = dl_dv * 2.0 * phi * sigma * sigma / (s * s);
  out[1] = dl_dv * 2.0 * sigma / s;
  out[2] = 0.0;
}

void Ar1Model::hess_log_init(double x, std::span<double> out) const {
  const double phi = params_.phi, sigma = params_.sigma;
  const double s = 1.0 - phi * phi;
  const double v = var_init_;
  const double dl_dv = -0.5 / v + 0.5 * x * x / (v * v);
  const double d2l_dv2 = 0.5 / (v * v) - x * x / (v * v * v);
  const double v_p = 2.0 * phi * sigma * sigma / (s * s);
  const double v_s = 2.0 * sigma / s;
  const double v_pp = 2.0 * sigma * sigma * (1.0 + 3.0 * phi * phi) / (s * s * s);
  const double v_ps = 4.0 * phi * sigma / (s * s);
  const double v_ss = 2.0 / s;
  const double h_pp = d2l_dv2 * v_p * v_p + dl_dv * v_pp;
  const double h_ps = d2l_dv2 * v_p * v_s + dl_dv * v_ps;
  const double h_ss = d2l_dv2 * v_s * v_s + dl_dv * v_ss;
  out[0] = h_pp; out[1] = h_ps; out[2] = 0.0;
  out[3] = h_ps; out[4] = h_ss; out[5] = 0.0;
  out[6] = 0.0;  out[7] = 0.0;  out[8] = 0.0;
}

void Ar1Model::grad_log_f(double x, double x_prev, std::span<double> out) const {
  const double sigma = params_.sigma;
  const double e = x - params_.phi * x_prev;
  out[0] = e * x_prev / var_state_;
  out[1] = -1.0 / sigma + e * e / (var_state_ * sigma);
  out[2] = 0.0;
}

void Ar1Model::hess_log_f(double x, double x_prev, std::span<double> out) const {
  const double sigma = params_.sigma;
  const double e = x - params_.phi * x_prev;
  const double h_pp = -x_prev * x_prev / var_state_;
  const double h_ps = -2.0 * e * x_prev / (var_state_ * sigma);
  const double h_ss = 1.0 / var_state_ - 3.0 * e * e / (var_state_ * var_state_);
  out[0] = h_pp; out[1] = h_ps; out[2] = 0.0;
  out[3] = h_ps; out[4] = h_ss; out[5] = 0.0;
  out[6] = 0.0;  out[7] = 0.0;  out[8] = 0.0;
}

void Ar1Model::grad_log_g(double y, double x, int, std::span<double> out) const {
  const double r = y - x;
  out[0] = 0.0;
  out[1] = 0.0;
  out[2] = -1.0 / params_.tau + r * r / (var_obs_ * params_.tau);
}

void Ar1Model::hess_log_g(double y, double x, int, std::span<double> out) const {
  const double r = y - x;
  std::fill(out.begin(), out.begin() + 9, 0.0);
  out[8] = 1.0 / var_obs_ - 3.0 * r * r / (var_obs_ * var_obs_);
}

double Ar1Model::proposal_log_xi(double x_prev, double y, int t) const {
  if (!optimal_proposal_) return StateSpaceModel::proposal_log_xi(x_prev, y, t);
  return normal_logpdf(y, params_.phi * x_prev, pred_var_);
}

double Ar1Model::proposal_sample(RandomStream& rng, double x_prev, double y, int t) const {
  if (!optimal_proposal_) return StateSpaceModel::proposal_sample(rng, x_prev, y, t);
  const double mean = (params_.phi * x_prev * var_obs_ + y * var_state_) / pred_var_;
  return mean + prop_sd_ * rng.normal();
}

double Ar1Model::proposal_logpdf(double x, double x_prev, double y, int t) const {
  if (!optimal_proposal_) return StateSpaceModel::proposal_logpdf(x, x_prev, y, t);
  const double mean = (params_.phi * x_prev * var_obs_ + y * var_state_) / pred_var_;
  return normal_logpdf(x, mean, prop_var_);
}

std::shared_ptr<const Ar1Model> ar1_model(const Ar1Params& params, bool optimal_proposal) {
  return std::make_shared<Ar1Model>(params, optimal_proposal);
}

}  // namespace rbscore
