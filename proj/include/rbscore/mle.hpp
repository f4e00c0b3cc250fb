#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "rbscore/estimators.hpp"
#include "rbscore/model.hpp"

namespace rbscore {

struct StepSchedule {
  enum class Kind { power, constant };
  Kind kind = Kind::power;
  double alpha = 0.6;  // power: gamma_k = scale * k^-alpha
  double scale = 1.0;
  Eigen::VectorXd per_coordinate_scale;  // empty, or one multiplier per coordinate

  double gamma(int k) const;
  // gamma(k) times the per-coordinate multipliers.
  Eigen::VectorXd gains(int k, int d) const;
  // Throws std::invalid_argument naming the offending field.
  void validate(int d) const;
};

enum class AscentStatus { max_iters, converged, diverged };
std::string to_string(AscentStatus status);

struct AscentRecord {
  int k = 0;
  Eigen::VectorXd theta;  // theta_k after the update
  Eigen::VectorXd score;  // score used for the update (at theta_{k-1})
  double score_norm = 0.0;
  double step_norm = 0.0;  // ||theta_k - theta_{k-1}||
};

struct AscentTrace {
  std::vector<AscentRecord> records;
  AscentStatus status = AscentStatus::max_iters;
  Eigen::VectorXd theta0;
  Eigen::VectorXd final_theta;
};

// `k,theta_1..theta_d,score_norm,step_norm`
void write_ascent_csv(const AscentTrace& trace, std::ostream& out);

// I^{-1} S when I is positive definite (smallest eigenvalue above
// 1e-8 * trace / d), otherwise a ridge-regularized solve, otherwise S itself.
// The result always satisfies S^T step >= 0.
Eigen::VectorXd newton_safeguard(const Eigen::MatrixXd& info, const Eigen::VectorXd& score);

struct BatchOptions {
  int iterations = 100;
  bool newton = false;
  double tol = 0.0;  // > 0 stops once ||theta_k - theta_{k-1}|| < tol
  bool common_random_numbers = false;
};

// theta_k = project(theta_{k-1} + gamma_k * direction), with direction the
// score (gradient mode) or the safeguarded Newton step. Iteration k runs the
// estimator with the stream derive_seed(seed, {k}) (or {1} for every
// iteration under common random numbers).
AscentTrace batch_ascent(const StateSpaceModel& model, std::span<const double> y, const Eigen::VectorXd& theta0,
                         const EstimatorConfig& estimator, const StepSchedule& schedule, const BatchOptions& options,
                         std::uint64_t seed);

struct RecursiveOptions {
  std::size_t particles = 1000;
  double lambda = 0.95;
  FilterOptions filter;
  int record_every = 1;  // the final step is always recorded
};

// Single pass: after each observation theta_t = project(theta_{t-1} +
// gamma_t (S_t - S_{t-1})), with the filter and score state carried forward
// and the model re-bound to theta_t for the next step.
AscentTrace recursive_ascent(const StateSpaceModel& model, std::span<const double> y, const Eigen::VectorXd& theta0,
                             const StepSchedule& schedule, const RecursiveOptions& options, RandomStream& rng);

}  // namespace rbscore
