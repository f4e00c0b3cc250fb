#pragma once

#include <span>
#include <vector>

#include <Eigen/Dense>

#include "rbscore/ar1_model.hpp"

namespace rbscore {

// Filter moments at one step together with their first and second
// derivatives with respect to (phi, sigma, tau).
struct KalmanState {
  double mean = 0.0;
  double var = 0.0;
  double loglik = 0.0;  // accumulated log p(y_{1:t})
  Eigen::Vector3d dmean = Eigen::Vector3d::Zero();
  Eigen::Vector3d dvar = Eigen::Vector3d::Zero();
  Eigen::Matrix3d d2mean = Eigen::Matrix3d::Zero();
  Eigen::Matrix3d d2var = Eigen::Matrix3d::Zero();
};

struct KalmanResult {
  double loglik = 0.0;
  Eigen::Vector3d score = Eigen::Vector3d::Zero();
  Eigen::Matrix3d obs_info = Eigen::Matrix3d::Zero();
};

// Per-step record: filtered state after y_t, plus score/information of y_{1:t}.
struct KalmanStep {
  KalmanState filtered;
  Eigen::Vector3d score;
  Eigen::Matrix3d obs_info;
};

// Exact log p(y_{1:T} | theta), stationary initialization.
double kalman_loglik(const Ar1Params& params, std::span<const double> y);

// Exact score and observed information -d^2 log p(y_{1:T} | theta) through
// tangent recursions of the predictive moments.
KalmanResult kalman_score_info(const Ar1Params& params, std::span<const double> y);

// Full per-step trace of the recursion above.
std::vector<KalmanStep> kalman_trace(const Ar1Params& params, std::span<const double> y);

}  // namespace rbscore
