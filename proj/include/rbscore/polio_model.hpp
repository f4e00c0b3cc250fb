#pragma once

#include <array>
#include <memory>
#include <vector>

#include "rbscore/model.hpp"

namespace rbscore {

struct PolioParams {
  std::array<double, 6> mu{};
  double phi = 0.4;
  double sigma2 = 0.4;

  Eigen::VectorXd vector() const;
  static PolioParams from_vector(const Eigen::VectorXd& theta);
};

// Seasonal Poisson count model with a latent AR(1) log-intensity:
//   y_t | x_t ~ Poisson(exp(x_t + z_t)),  x_t | x_{t-1} ~ N(phi x_{t-1}, sigma2),
//   x_1 ~ N(0, sigma2 / (1 - phi^2)),
//   z_t = mu1 + mu2 t/1000 + mu3 cos(2 pi t/12) + mu4 sin(2 pi t/12)
//         + mu5 cos(2 pi t/6) + mu6 sin(2 pi t/6).
// Parameter order (mu1..mu6, phi, sigma2). Uses the bootstrap proposal.
class PolioModel final : public StateSpaceModel {
 public:
  static constexpr int kDim = 8;
  static constexpr int kRegressors = 6;

  explicit PolioModel(const PolioParams& params);

  std::string id() const override { return "polio"; }
  const ThetaVector& theta() const override { return theta_; }
  const PolioParams& params() const { return params_; }

  std::shared_ptr<const StateSpaceModel> with_theta(const Eigen::VectorXd& theta) const override;
  bool admissible(const Eigen::VectorXd& theta) const override;
  Eigen::VectorXd project(const Eigen::VectorXd& theta) const override;

  double init_logpdf(double x) const override;
  double init_sample(RandomStream& rng) const override;
  double trans_logpdf(double x, double x_prev) const override;
  double trans_sample(RandomStream& rng, double x_prev) const override;
  // -infinity for negative or non-integer counts.
  double obs_logpdf(double y, double x, int t) const override;
  double obs_sample(RandomStream& rng, double x, int t) const override;

  void grad_log_init(double x, std::span<double> out) const override;
  void grad_log_f(double x, double x_prev, std::span<double> out) const override;
  void grad_log_g(double y, double x, int t, std::span<double> out) const override;
  void hess_log_init(double x, std::span<double> out) const override;
  void hess_log_f(double x, double x_prev, std::span<double> out) const override;
  void hess_log_g(double y, double x, int t, std::span<double> out) const override;

  // Regressor vector (1, t/1000, cos, sin, cos, sin) and linear predictor z_t.
  static std::array<double, kRegressors> regressors(int t);
  double linear_predictor(int t) const;

 private:
  const std::array<double, kRegressors>& regressor_row(int t, std::array<double, kRegressors>& scratch) const;

  PolioParams params_;
  ThetaVector theta_;
  double var_init_;
  std::vector<std::array<double, kRegressors>> table_;
  std::vector<double> z_table_;
};

// Throws std::invalid_argument for sigma2 <= 0 or |phi| >= 1.
std::shared_ptr<const PolioModel> polio_model(const PolioParams& params);

}  // namespace rbscore
