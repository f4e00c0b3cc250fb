#include "rbscore/kalman.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace rbscore {

namespace {

// Value with gradient and Hessian w.r.t. the three AR(1) parameters.
struct Jet {
  double v = 0.0;
  Eigen::Vector3d g = Eigen::Vector3d::Zero();
  Eigen::Matrix3d h = Eigen::Matrix3d::Zero();

  static Jet constant(double c) { return Jet{c, Eigen::Vector3d::Zero(), Eigen::Matrix3d::Zero()}; }
  static Jet variable(double value, int index) {
    Jet j = constant(value);
    j.g[index] = 1.0;
    return j;
  }
};

Jet operator+(const Jet& a, const Jet& b) { return {a.v + b.v, a.g + b.g, a.h + b.h}; }
Jet operator-(const Jet& a, const Jet& b) { return {a.v - b.v, a.g - b.g, a.h - b.h}; }
Jet operator-(double c, const Jet& a) { return {c - a.v, -a.g, -a.h}; }

Jet operator*(const Jet& a, const Jet& b) {
  Jet r;
  r.v = a.v * b.v;
  r.g = a.g * b.v + b.g * a.v;
  r.h = a.h * b.v + b.h * a.v + a.g * b.g.transpose() + b.g * a.g.transpose();
  return r;
}

Jet reciprocal(const Jet& a) {
  Jet r;
  const double inv = 1.0 / a.v;
  r.v = inv;
  r.g = -a.g * inv * inv;
  r.h = -a.h * inv * inv + 2.0 * inv * inv * inv * (a.g * a.g.transpose());
  return r;
}

Jet operator/(const Jet& a, const Jet& b) { return a * reciprocal(b); }

Jet log(const Jet& a) {
  Jet r;
  r.v = std::log(a.v);
  r.g = a.g / a.v;
  r.h = a.h / a.v - (a.g * a.g.transpose()) / (a.v * a.v);
  return r;
}

void validate(const Ar1Params& p, std::span<const double> y) {
  if (!(std::abs(p.phi) < 1.0)) throw std::invalid_argument("kalman: nonstationary phi");
  if (!(p.sigma > 0.0) || !(p.tau > 0.0)) throw std::invalid_argument("kalman: sigma and tau must be > 0");
  if (y.empty()) throw std::invalid_argument("kalman: need at least one observation");
}

template <typename OnStep>
Jet run(const Ar1Params& params, std::span<const double> y, OnStep&& on_step) {
  validate(params, y);
  const Jet phi = Jet::variable(params.phi, 0);
  const Jet sigma = Jet::variable(params.sigma, 1);
  const Jet tau = Jet::variable(params.tau, 2);
  const Jet sigma2 = sigma * sigma;
  const Jet tau2 = tau * tau;
  const double log_2pi = std::log(2.0 * std::numbers::pi);

  Jet pred_mean = Jet::constant(0.0);
  Jet pred_var = sigma2 / (1.0 - phi * phi);
  Jet loglik = Jet::constant(0.0);
  for (std::size_t t = 0; t < y.size(); ++t) {
    const Jet innov_var = pred_var + tau2;
    const Jet innov = Jet::constant(y[t]) - pred_mean;
    loglik = loglik - Jet::constant(0.5) * (Jet::constant(log_2pi) + log(innov_var) + innov * innov / innov_var);
    const Jet gain = pred_var / innov_var;
    const Jet filt_mean = pred_mean + gain * innov;
    const Jet filt_var = pred_var - gain * pred_var;
    on_step(filt_mean, filt_var, loglik);
    pred_mean = phi * filt_mean;
    pred_var = phi * phi * filt_var + sigma2;
  }
  return loglik;
}

}  // namespace

double kalman_loglik(const Ar1Params& params, std::span<const double> y) {
  validate(params, y);
  const double s2 = params.sigma * params.sigma;
  const double t2 = params.tau * params.tau;
  double mean = 0.0;
  double var = params.stationary_variance();
  double ll = 0.0;
  for (double yt : y) {
    const double f = var + t2;
    const double e = yt - mean;
    ll += -0.5 * (std::log(2.0 * std::numbers::pi * f) + e * e / f);
    const double k = var / f;
    mean = params.phi * (mean + k * e);
    var = params.phi * params.phi * (var - k * var) + s2;
  }
  return ll;
}

KalmanResult kalman_score_info(const Ar1Params& params, std::span<const double> y) {
  const Jet ll = run(params, y, [](const Jet&, const Jet&, const Jet&) {});
  KalmanResult r;
  r.loglik = ll.v;
  r.score = ll.g;
  r.obs_info = -0.5 * (ll.h + ll.h.transpose());
  return r;
}

std::vector<KalmanStep> kalman_trace(const Ar1Params& params, std::span<const double> y) {
  std::vector<KalmanStep> steps;
  steps.reserve(y.size());
  run(params, y, [&](const Jet& mean, const Jet& var, const Jet& ll) {
    KalmanStep s;
    s.filtered.mean = mean.v;
    s.filtered.var = var.v;
    s.filtered.loglik = ll.v;
    s.filtered.dmean = mean.g;
    s.filtered.dvar = var.g;
    s.filtered.d2mean = mean.h;
    s.filtered.d2var = var.h;
    s.score = ll.g;
    s.obs_info = -0.5 * (ll.h + ll.h.transpose());
    steps.push_back(s);
  });
  return steps;
}

}  // namespace rbscore
