#pragma once

#include <cstddef>
#include <deque>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "rbscore/filter.hpp"
#include "rbscore/model.hpp"

namespace rbscore {

// Per-particle complete-data derivative increments for one time step:
//   grad_i = d log g(y_t | x_t^i) + d log f(x_t^i | x_{t-1}^{k_i})
// (with f replaced by the initial density at t = 1), and the matching
// Hessians. Storage is particle-major; Hessians are row-major d*d blocks.
struct StepIncrements {
  int dim = 0;
  std::size_t particles = 0;
  bool has_hessian = false;
  std::vector<double> grad;
  std::vector<double> hess;

  void resize(int d, std::size_t n, bool with_hessian);
  std::span<const double> grad_of(std::size_t i) const { return {grad.data() + i * dim, static_cast<std::size_t>(dim)}; }
  std::span<const double> hess_of(std::size_t i) const {
    return {hess.data() + i * dim * dim, static_cast<std::size_t>(dim * dim)};
  }
};

// prev == nullptr means t = 1.
void compute_increments(const StateSpaceModel& model, const ParticleSystem* prev, const ParticleSystem& cur,
                        double y, bool with_hessian, StepIncrements& out);

// Rao-Blackwellised kernel-shrinkage score and observed-information state.
//
// Each particle carries m (mean of its path score) and n (mean of its path
// Hessian). With shrinkage lambda and h2 = 1 - lambda^2:
//   m_t^i = lambda m_{t-1}^{k_i} + (1 - lambda) S_{t-1} + grad_i
//   n_t^i = lambda n_{t-1}^{k_i} + (1 - lambda) B_{t-1} + hess_i
//   S_t = sum_i w_t^i m_t^i,   B_t = sum_i w_t^i n_t^i
//   V_t = V_{t-1} + sum_i w_{t-1}^i (m_{t-1}^i - S_{t-1})(m_{t-1}^i - S_{t-1})^T
//   I_t = S_t S_t^T - sum_i w_t^i (m_t^i m_t^i^T + n_t^i) - h2 V_t
// All reductions run in ascending particle order.
class RbScoreState {
 public:
  RbScoreState(int dim, std::size_t particles, double lambda, bool with_information = true);

  // ancestors index the previous generation; at t = 1 pass identity ancestors.
  void step(std::span<const int> ancestors, std::span<const double> weights, const StepIncrements& inc);

  int dim() const { return dim_; }
  int time() const { return t_; }
  double lambda() const { return lambda_; }
  double h2() const { return h2_; }
  const Eigen::VectorXd& score() const { return score_; }
  const Eigen::MatrixXd& mean_hessian() const { return mean_hessian_; }
  const Eigen::MatrixXd& shrinkage_variance() const { return shrink_var_; }
  std::span<const double> particle_mean(std::size_t i) const { return {m_.data() + i * dim_, static_cast<std::size_t>(dim_)}; }

  // I_t = S S^T - sum w (m m^T + n) - h2 V
  Eigen::MatrixXd information() const;
  // S S^T - sum w (m m^T + h2 V + n): the same quantity with h2 V inside the sum.
  Eigen::MatrixXd information_inside_sum() const;

 private:
  int dim_;
  std::size_t n_;
  double lambda_, h2_;
  bool info_;
  int t_ = 0;
  std::vector<double> m_, m_next_, nmat_, nmat_next_, w_;
  Eigen::VectorXd score_;
  Eigen::MatrixXd mean_hessian_, shrink_var_;
};

// Path-space recursion alpha_t^i = alpha_{t-1}^{k_i} + grad_i (and likewise for
// the Hessian), with Louis' identity for the information. O(N) per step.
class PathScoreState {
 public:
  PathScoreState(int dim, std::size_t particles, bool with_information = true);

  void step(std::span<const int> ancestors, std::span<const double> weights, const StepIncrements& inc);

  int dim() const { return dim_; }
  const Eigen::VectorXd& score() const { return score_; }
  std::span<const double> particle_alpha(std::size_t i) const { return {a_.data() + i * dim_, static_cast<std::size_t>(dim_)}; }
  Eigen::MatrixXd information() const;

 private:
  int dim_;
  std::size_t n_;
  bool info_;
  std::vector<double> a_, a_next_, b_, b_next_, w_;
  Eigen::VectorXd score_;
};

// Fixed-lag smoother for the additive score: the time-s increment is frozen
// using the lineages and weights at time s + L. Lineages inside the window
// carry their unfrozen increments; the information uses Louis' identity with
// alpha_i = frozen + window_i.
class FixedLagScoreState {
 public:
  FixedLagScoreState(int dim, std::size_t particles, int lag, bool with_information = true);

  void step(std::span<const int> ancestors, std::span<const double> weights, const StepIncrements& inc);

  int dim() const { return dim_; }
  int lag() const { return lag_; }
  std::size_t buffered_generations() const { return window_.size(); }
  const Eigen::VectorXd& score() const { return score_; }
  Eigen::MatrixXd information() const;

 private:
  struct Generation {
    std::vector<int> ancestors;
    std::vector<double> grad;
    std::vector<double> hess;
  };

  int dim_;
  std::size_t n_;
  int lag_;
  bool info_;
  std::deque<Generation> window_;
  std::vector<double> a_, a_next_, b_, b_next_, w_;
  std::vector<double> frozen_grad_, frozen_hess_;
  std::vector<int> trace_;
  Eigen::VectorXd score_;
};

// Marginal O(N^2) recursion: each new particle averages over every previous
// particle with backward weights proportional to w_{t-1}^j f(x_t^i | x_{t-1}^j).
// Tracks alpha_i = E[path score | x_t^i] and gamma_i = E[score score^T +
// Hessian | x_t^i]; I = S S^T - sum w gamma.
class MarginalScoreState {
 public:
  MarginalScoreState(int dim, std::size_t particles, bool with_information = true);

  // prev == nullptr means t = 1.
  void step(const StateSpaceModel& model, const ParticleSystem* prev, const ParticleSystem& cur, double y);

  const Eigen::VectorXd& score() const { return score_; }
  std::span<const double> particle_alpha(std::size_t i) const { return {a_.data() + i * dim_, static_cast<std::size_t>(dim_)}; }
  Eigen::MatrixXd information() const;

 private:
  int dim_;
  std::size_t n_;
  bool info_;
  std::vector<double> a_, a_next_, g_, g_next_, w_;
  std::vector<double> log_bw_, grad_g_, hess_g_, grad_f_, hess_f_, phi_;
  Eigen::VectorXd score_;
};

}  // namespace rbscore
