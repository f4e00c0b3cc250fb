#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

#include "rbscore/model.hpp"
#include "rbscore/rng.hpp"

namespace rbscore {

enum class Resampling { multinomial, systematic };

struct FilterOptions {
  Resampling resampling = Resampling::multinomial;
  // Use the model's own proposal when it ships one; false forces bootstrap.
  bool use_model_proposal = true;
};

// Weighted particle approximation of p(x_t | y_{1:t}).
struct ParticleSystem {
  int t = 0;
  std::vector<double> x;
  std::vector<double> w;          // normalized, sums to 1
  std::vector<double> log_w;      // log of w
  std::vector<double> log_raw;    // unnormalized log weights of the last step
  std::vector<int> ancestors;     // index into the previous generation
  double loglik_increment = 0.0;  // log p-hat(y_t | y_{1:t-1})

  std::size_t size() const { return x.size(); }
  void resize(std::size_t n);
};

class DegenerateFilterError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// x_1 ~ mu, w_1 proportional to g(y_1 | x_1), identity ancestors. Requires N >= 2.
ParticleSystem apf_init(const StateSpaceModel& model, double y1, std::size_t n, RandomStream& rng);
void apf_init(const StateSpaceModel& model, double y1, std::size_t n, RandomStream& rng,
              ParticleSystem& out);

// One auxiliary-filter transition t-1 -> t. Random draws are consumed in a
// fixed order: all ancestor indices first, then propagation noise in particle
// order.
ParticleSystem apf_step(const ParticleSystem& prev, const StateSpaceModel& model, double y,
                        RandomStream& rng, const FilterOptions& options = {});
void apf_step(const ParticleSystem& prev, const StateSpaceModel& model, double y, RandomStream& rng,
              const FilterOptions& options, ParticleSystem& out);

// log of the mean raw weight: the SMC estimate of log p(y_t | y_{1:t-1}).
// Returns -infinity when every raw weight vanishes.
double loglik_increment(std::span<const double> log_raw_weights);

// log sum exp, ignoring NaN entries (treated as zero weight).
double log_sum_exp(std::span<const double> v);

// Normalizes log weights into w / log_w. Throws DegenerateFilterError when all
// weights vanish.
void normalize_log_weights(std::span<const double> log_raw, std::span<double> w, std::span<double> log_w);

// Draws n indices from the probability vector.
void resample_multinomial(std::span<const double> probs, RandomStream& rng, std::span<int> out);
void resample_systematic(std::span<const double> probs, RandomStream& rng, std::span<int> out);

}  // namespace rbscore
