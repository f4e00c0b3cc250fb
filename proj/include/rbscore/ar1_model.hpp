#pragma once

#include <memory>

#include "rbscore/model.hpp"

namespace rbscore {

struct Ar1Params {
  double phi = 0.8;
  double sigma = 0.5;
  double tau = 1.0;

  Eigen::VectorXd vector() const { return Eigen::Vector3d(phi, sigma, tau); }
  static Ar1Params from_vector(const Eigen::VectorXd& theta);
  double stationary_variance() const { return sigma * sigma / (1.0 - phi * phi); }
};

// Linear-Gaussian AR(1) plus noise:
//   x_1 ~ N(0, sigma^2 / (1 - phi^2)),  x_t | x_{t-1} ~ N(phi x_{t-1}, sigma^2),
//   y_t | x_t ~ N(x_t, tau^2).
// Parameter order is (phi, sigma, tau). Ships the closed-form optimal proposal
// q(x_t | x_{t-1}, y_t) with first-stage factor N(y_t | phi x_{t-1}, sigma^2 + tau^2).
class Ar1Model final : public StateSpaceModel {
 public:
  explicit Ar1Model(const Ar1Params& params, bool optimal_proposal = true);

  std::string id() const override { return "ar1"; }
  const ThetaVector& theta() const override { return theta_; }
  const Ar1Params& params() const { return params_; }
  bool uses_optimal_proposal() const { return optimal_proposal_; }

  std::shared_ptr<const StateSpaceModel> with_theta(const Eigen::VectorXd& theta) const override;
  bool admissible(const Eigen::VectorXd& theta) const override;
  Eigen::VectorXd project(const Eigen::VectorXd& theta) const override;

  double init_logpdf(double x) const override;
  double init_sample(RandomStream& rng) const override;
  double trans_logpdf(double x, double x_prev) const override;
  double trans_sample(RandomStream& rng, double x_prev) const override;
  double obs_logpdf(double y, double x, int t) const override;
  double obs_sample(RandomStream& rng, double x, int t) const override;

  void grad_log_init(double x, std::span<double> out) const override;
  void grad_log_f(double x, double x_prev, std::span<double> out) const override;
  void grad_log_g(double y, double x, int t, std::span<double> out) const override;
  void hess_log_init(double x, std::span<double> out) const override;
  void hess_log_f(double x, double x_prev, std::span<double> out) const override;
  void hess_log_g(double y, double x, int t, std::span<double> out) const override;

  bool has_proposal() const override { return optimal_proposal_; }
  double proposal_log_xi(double x_prev, double y, int t) const override;
  double proposal_sample(RandomStream& rng, double x_prev, double y, int t) const override;
  double proposal_logpdf(double x, double x_prev, double y, int t) const override;

 private:
  Ar1Params params_;
  ThetaVector theta_;
  bool optimal_proposal_;
  double var_state_, var_obs_, var_init_;
  double prop_var_, prop_sd_, pred_var_;
};

// Throws std::invalid_argument for |phi| >= 1, sigma <= 0 or tau <= 0.
std::shared_ptr<const Ar1Model> ar1_model(const Ar1Params& params, bool optimal_proposal = true);

}  // namespace rbscore
