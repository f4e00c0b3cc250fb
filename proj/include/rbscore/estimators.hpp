#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "rbscore/filter.hpp"
#include "rbscore/model.hpp"
#include "rbscore/rng.hpp"

namespace rbscore {

enum class EstimatorKind { rb, poyiadjis_n, poyiadjis_n2, fixed_lag, kalman };

std::string to_string(EstimatorKind kind);
// Throws std::invalid_argument for unknown names.
EstimatorKind parse_estimator_kind(const std::string& name);

struct EstimatorConfig {
  EstimatorKind kind = EstimatorKind::rb;
  std::size_t particles = 1000;
  double lambda = 0.95;  // rb only
  int lag = 10;          // fixed_lag only
  bool information = true;
  FilterOptions filter;
};

struct TracePoint {
  int t = 0;
  Eigen::VectorXd score;
  Eigen::VectorXd info_diag;  // empty when information is not tracked
};

struct ScoreEstimate {
  Eigen::VectorXd score;
  Eigen::MatrixXd information;  // 0x0 when not tracked
  double loglik = 0.0;
  std::vector<TracePoint> trace;
};

struct RunOptions {
  bool record_trace = false;
  int trace_every = 1;  // the final step is always recorded
};

// One accumulator riding on a shared particle filter.
struct AccumulatorSpec {
  EstimatorKind kind = EstimatorKind::rb;
  double lambda = 1.0;
  int lag = 10;
};

// Runs a single filter pass and feeds every accumulator from it, so all
// results share the same particles, weights and ancestors. Kalman is not a
// valid accumulator here.
std::vector<ScoreEstimate> run_shared_filter(const StateSpaceModel& model, std::span<const double> y,
                                             std::size_t particles, std::span<const AccumulatorSpec> specs,
                                             bool information, const FilterOptions& filter, RandomStream& rng,
                                             const RunOptions& options = {});

ScoreEstimate rb_run(const StateSpaceModel& model, std::span<const double> y, std::size_t particles, double lambda,
                     RandomStream& rng, bool information = true, const RunOptions& options = {},
                     const FilterOptions& filter = {});
ScoreEstimate poyiadjis_n_run(const StateSpaceModel& model, std::span<const double> y, std::size_t particles,
                              RandomStream& rng, bool information = true, const RunOptions& options = {},
                              const FilterOptions& filter = {});
ScoreEstimate poyiadjis_n2_run(const StateSpaceModel& model, std::span<const double> y, std::size_t particles,
                               RandomStream& rng, bool information = true, const RunOptions& options = {},
                               const FilterOptions& filter = {});
ScoreEstimate fixed_lag_run(const StateSpaceModel& model, std::span<const double> y, std::size_t particles, int lag,
                            RandomStream& rng, bool information = true, const RunOptions& options = {},
                            const FilterOptions& filter = {});
// Exact oracle; requires an Ar1Model.
ScoreEstimate kalman_run(const StateSpaceModel& model, std::span<const double> y, const RunOptions& options = {});

ScoreEstimate run_estimator(const StateSpaceModel& model, std::span<const double> y, const EstimatorConfig& config,
                            RandomStream& rng, const RunOptions& options = {});

// Coefficients of the shrinkage recursion. Entry (k, u, s), 1 <= u <= s <= k,
// is the weight with which the time-s increment of a path observed at time u
// enters the particle mean at time k.
struct ShrinkageCoeffTable {
  double lambda = 0.5;
  int horizon = 0;
  std::vector<double> recursion;
  std::vector<double> closed_form;

  std::size_t index(int k, int u, int s) const;
  double recursive(int k, int u, int s) const { return recursion[index(k, u, s)]; }
  double closed(int k, int u, int s) const { return closed_form[index(k, u, s)]; }
};

// Requires 0 < lambda < 1 and 1 <= horizon <= 20.
ShrinkageCoeffTable shrinkage_coeffs(double lambda, int horizon);

}  // namespace rbscore
