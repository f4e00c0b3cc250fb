#include "rbscore/filter.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace rbscore {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double clean(double v) { return std::isnan(v) ? kNegInf : v; }

void draw_ancestors(std::span<const double> probs, RandomStream& rng, Resampling scheme,
                    std::span<int> out) {
  if (scheme == Resampling::systematic)
    resample_systematic(probs, rng, out);
  else
    resample_multinomial(probs, rng, out);
}

}  // namespace

void ParticleSystem::resize(std::size_t n) {
  x.resize(n);
  w.resize(n);
  log_w.resize(n);
  log_raw.resize(n);
  ancestors.resize(n);
}

double log_sum_exp(std::span<const double> v) {
  double m = kNegInf;
  for (double a : v) m = std::max(m, clean(a));
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (double a : v) s += std::exp(clean(a) - m);
  return m + std::log(s);
}

double loglik_increment(std::span<const double> log_raw_weights) {
  const double lse = log_sum_exp(log_raw_weights);
  if (lse == kNegInf) return kNegInf;
  return lse - std::log(static_cast<double>(log_raw_weights.size()));
}

void normalize_log_weights(std::span<const double> log_raw, std::span<double> w, std::span<double> log_w) {
  double m = kNegInf;
  for (double a : log_raw) m = std::max(m, clean(a));
  if (!std::isfinite(m)) throw DegenerateFilterError("particle filter degenerate: all weights vanish");
  double s = 0.0;
  for (std::size_t i = 0; i < log_raw.size(); ++i) {
    w[i] = std::exp(clean(log_raw[i]) - m);
    s += w[i];
  }
  const double log_s = std::log(s);
  for (std::size_t i = 0; i < log_raw.size(); ++i) {
    w[i] /= s;
    log_w[i] = clean(log_raw[i]) - m - log_s;
  }
}

// Sorted uniforms from normalized exponential spacings, merged against the
// cumulative probabilities: an O(n) exact multinomial draw.
void resample_multinomial(std::span<const double> probs, RandomStream& rng, std::span<int> out) {
  const std::size_t n = out.size();
  const std::size_t m = probs.size();
  std::vector<double> spacings(n + 1);
  double total = 0.0;
  for (std::size_t i = 0; i <= n; ++i) {
    total += rng.exponential();
    spacings[i] = total;
  }
  std::size_t j = 0;
  double cum = probs[0];
  for (std::size_t i = 0; i < n; ++i) {
    const double u = spacings[i] / total;
    while (u > cum && j + 1 < m) cum += probs[++j];
    out[i] = static_cast<int>(j);
  }
}

void resample_systematic(std::span<const double> probs, RandomStream& rng, std::span<int> out) {
  const std::size_t n = out.size();
  const std::size_t m = probs.size();
  const double u0 = rng.uniform() / static_cast<double>(n);
  std::size_t j = 0;
  double cum = probs[0];
  for (std::size_t i = 0; i < n; ++i) {
    const double u = u0 + static_cast<double>(i) / static_cast<double>(n);
    while (u > cum && j + 1 < m) cum += probs[++j];
    out[i] = static_cast<int>(j);
  }
}

void apf_init(const StateSpaceModel& model, double y1, std::size_t n, RandomStream& rng,
              ParticleSystem& out) {
  if (n < 2) throw std::invalid_argument("particle filter needs N >= 2");
  out.resize(n);
  out.t = 1;
  for (std::size_t i = 0; i < n; ++i) out.x[i] = model.init_sample(rng);
  for (std::size_t i = 0; i < n; ++i) {
    out.log_raw[i] = model.obs_logpdf(y1, out.x[i], 1);
    out.ancestors[i] = static_cast<int>(i);
  }
  out.loglik_increment = loglik_increment(out.log_raw);
  normalize_log_weights(out.log_raw, out.w, out.log_w);
}

ParticleSystem apf_init(const StateSpaceModel& model, double y1, std::size_t n, RandomStream& rng) {
  ParticleSystem ps;
  apf_init(model, y1, n, rng, ps);
  return ps;
}

void apf_step(const ParticleSystem& prev, const StateSpaceModel& model, double y, RandomStream& rng,
              const FilterOptions& options, ParticleSystem& out) {
  const std::size_t n = prev.size();
  out.resize(n);
  out.t = prev.t + 1;
  const int t = out.t;
  const bool auxiliary = options.use_model_proposal && model.has_proposal();

  if (!auxiliary) {
    // Bootstrap: xi = w, q = f, raw weight = g.
    draw_ancestors(prev.w, rng, options.resampling, out.ancestors);
    for (std::size_t i = 0; i < n; ++i) out.x[i] = model.trans_sample(rng, prev.x[out.ancestors[i]]);
    for (std::size_t i = 0; i < n; ++i) out.log_raw[i] = model.obs_logpdf(y, out.x[i], t);
  } else {
    std::vector<double> log_xi_factor(n), log_xi(n), xi(n), log_xi_norm(n);
    for (std::size_t i = 0; i < n; ++i) {
      log_xi_factor[i] = model.proposal_log_xi(prev.x[i], y, t);
      log_xi[i] = prev.log_w[i] + log_xi_factor[i];
    }
    const double lse = log_sum_exp(log_xi);
    normalize_log_weights(log_xi, xi, log_xi_norm);
    draw_ancestors(xi, rng, options.resampling, out.ancestors);
    for (std::size_t i = 0; i < n; ++i)
      out.x[i] = model.proposal_sample(rng, prev.x[out.ancestors[i]], y, t);
    // w_{t-1,k} g f / (xi_k q) with xi_k = w_{t-1,k} exp(log_xi_factor_k) / exp(lse).
    for (std::size_t i = 0; i < n; ++i) {
      const int k = out.ancestors[i];
      const double xp = prev.x[k];
      out.log_raw[i] = model.obs_logpdf(y, out.x[i], t) + model.trans_logpdf(out.x[i], xp) -
                       log_xi_factor[k] - model.proposal_logpdf(out.x[i], xp, y, t) + lse;
    }
  }
  out.loglik_increment = loglik_increment(out.log_raw);
  normalize_log_weights(out.log_raw, out.w, out.log_w);
}

ParticleSystem apf_step(const ParticleSystem& prev, const StateSpaceModel& model, double y,
                        RandomStream& rng, const FilterOptions& options) {
  ParticleSystem ps;
  apf_step(prev, model, y, rng, options, ps);
  return ps;
}

}  // namespace rbscore
