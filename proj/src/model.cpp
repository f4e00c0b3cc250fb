#include "rbscore/model.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace rbscore {

double StateSpaceModel::proposal_log_xi(double, double, int) const { return 0.0; }

double StateSpaceModel::proposal_sample(RandomStream& rng, double x_prev, double, int) const {
  return trans_sample(rng, x_prev);
}

double StateSpaceModel::proposal_logpdf(double x, double x_prev, double, int) const {
  return trans_logpdf(x, x_prev);
}

SimulatedPath simulate(const StateSpaceModel& model, int T, RandomStream& rng,
                       std::optional<double> initial_state) {
  if (T < 1) throw std::invalid_argument("simulate: T must be >= 1");
  SimulatedPath path;
  path.x.resize(T);
  path.y.resize(T);
  path.x[0] = initial_state ? *initial_state : model.init_sample(rng);
  path.y[0] = model.obs_sample(rng, path.x[0], 1);
  for (int t = 1; t < T; ++t) {
    path.x[t] = model.trans_sample(rng, path.x[t - 1]);
    path.y[t] = model.obs_sample(rng, path.x[t], t + 1);
  }
  return path;
}

double normal_logpdf(double x, double mean, double var) {
  const double r = x - mean;
  return -0.5 * (std::log(2.0 * std::numbers::pi * var) + r * r / var);
}

}  // namespace rbscore
