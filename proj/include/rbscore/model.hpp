#pragma once

#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "rbscore/rng.hpp"
#include "rbscore/theta.hpp"

namespace rbscore {

// A scalar-state state-space model bound to one parameter value theta.
//
// The latent chain has initial density mu(x1), transition f(x_t | x_{t-1}) and
// observation density g(y_t | x_t); t is the 1-based time index and is passed
// to the observation terms so deterministic regressors can depend on it.
//
// Derivative outputs are written (not accumulated) into caller-owned spans:
// gradients have length d, Hessians d*d in row-major order.
//
// Instances are immutable and safe for concurrent read-only use. All
// randomness enters through the RandomStream argument.
class StateSpaceModel {
 public:
  virtual ~StateSpaceModel() = default;

  virtual std::string id() const = 0;
  virtual const ThetaVector& theta() const = 0;
  int dim() const { return theta().size(); }

  // Same family at another parameter value. Throws std::invalid_argument when
  // the value is outside the admissible set.
  virtual std::shared_ptr<const StateSpaceModel> with_theta(const Eigen::VectorXd& theta) const = 0;
  virtual bool admissible(const Eigen::VectorXd& theta) const = 0;
  // Clip into the admissible set.
  virtual Eigen::VectorXd project(const Eigen::VectorXd& theta) const = 0;

  virtual double init_logpdf(double x) const = 0;
  virtual double init_sample(RandomStream& rng) const = 0;
  virtual double trans_logpdf(double x, double x_prev) const = 0;
  virtual double trans_sample(RandomStream& rng, double x_prev) const = 0;
  virtual double obs_logpdf(double y, double x, int t) const = 0;
  virtual double obs_sample(RandomStream& rng, double x, int t) const = 0;

  virtual void grad_log_init(double x, std::span<double> out) const = 0;
  virtual void grad_log_f(double x, double x_prev, std::span<double> out) const = 0;
  virtual void grad_log_g(double y, double x, int t, std::span<double> out) const = 0;
  virtual void hess_log_init(double x, std::span<double> out) const = 0;
  virtual void hess_log_f(double x, double x_prev, std::span<double> out) const = 0;
  virtual void hess_log_g(double y, double x, int t, std::span<double> out) const = 0;

  // Auxiliary-filter proposal. The default is the bootstrap filter: q = f and
  // the first-stage weights are xi proportional to w.
  virtual bool has_proposal() const { return false; }
  // log of the factor multiplying w_{t-1} in xi_t.
  virtual double proposal_log_xi(double x_prev, double y, int t) const;
  virtual double proposal_sample(RandomStream& rng, double x_prev, double y, int t) const;
  virtual double proposal_logpdf(double x, double x_prev, double y, int t) const;
};

using ModelPtr = std::shared_ptr<const StateSpaceModel>;

struct SimulatedPath {
  std::vector<double> x;
  std::vector<double> y;
};

// Draws x_1 ~ mu, x_t ~ f(.|x_{t-1}), y_t ~ g(.|x_t). When initial_state is
// given it replaces the draw of x_1.
SimulatedPath simulate(const StateSpaceModel& model, int T, RandomStream& rng,
                       std::optional<double> initial_state = std::nullopt);

// log N(x | mean, var)
double normal_logpdf(double x, double mean, double var);

}  // namespace rbscore
