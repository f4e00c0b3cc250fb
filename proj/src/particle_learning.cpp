#include "rbscore/particle_learning.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <stdexcept>

#include "rbscore/data_io.hpp"
#include "rbscore/filter.hpp"
#include "rbscore/model.hpp"

namespace rbscore {

SuffStats pl_update_stats(const SuffStats& s, double x_prev, double x, double y, PlUpdate mode) {
  const double reg = mode == PlUpdate::literal ? x : x_prev;
  const double q_inv_prev = 1.0 / s.q;
  SuffStats n;
  const double q_inv = q_inv_prev + reg * reg;
  n.q = 1.0 / q_inv;
  n.p = (q_inv_prev * s.p + x_prev * x) / q_inv;
  n.a = s.a + 1.0;
  n.b = s.b + (x - n.p * x_prev) * x + (s.p - n.p) * q_inv_prev * s.p;
  n.c = s.c + 1.0;
  n.d = s.d + (y - x) * (y - x);
  return n;
}

namespace {

struct Draw {
  double phi, sigma2, tau2;
};

Draw draw_params(const SuffStats& s, RandomStream& rng) {
  if (!s.valid()) throw std::runtime_error("particle learning: statistics left the valid region");
  Draw d;
  d.sigma2 = rng.inverse_gamma(0.5 * s.a, 0.5 * s.b);
  d.phi = rng.normal(s.p, std::sqrt(d.sigma2 * s.q));
  d.tau2 = rng.inverse_gamma(0.5 * s.c, 0.5 * s.d);
  return d;
}

PlSummary summarize(int t, const std::vector<SuffStats>& stats) {
  PlSummary out;
  out.t = t;
  for (const auto& s : stats) {
    out.phi_mean += s.phi_mean();
    out.sigma2_mean += s.sigma2_mean();
    out.tau2_mean += s.tau2_mean();
  }
  const double n = static_cast<double>(stats.size());
  out.phi_mean /= n;
  out.sigma2_mean /= n;
  out.tau2_mean /= n;
  return out;
}

std::size_t count_distinct(std::vector<std::size_t> ids) {
  std::sort(ids.begin(), ids.end());
  return static_cast<std::size_t>(std::unique(ids.begin(), ids.end()) - ids.begin());
}

}  // namespace

PlResult pl_run(std::span<const double> y, const PlOptions& options, RandomStream& rng) {
  const std::size_t n = options.particles;
  if (n < 2) throw std::invalid_argument("particle learning needs N >= 2");
  if (!options.prior.valid() || !(options.prior.a > 2.0) || !(options.prior.c > 2.0))
    throw std::invalid_argument("particle learning prior needs q, b, d > 0 and a, c > 2");

  std::vector<SuffStats> stats(n, options.prior), stats_next(n);
  std::vector<Draw> params(n);
  std::vector<double> x(n, 0.0), x_new(n), x_next(n);
  std::vector<std::size_t> founder(n), founder_next(n);
  std::vector<double> log_raw(n), w(n), log_w(n);
  std::vector<int> idx(n);
  for (std::size_t i = 0; i < n; ++i) {
    params[i] = draw_params(stats[i], rng);
    founder[i] = i;
  }

  PlResult out;
  out.summaries.push_back(summarize(0, stats));
  out.distinct_lineages.push_back(n);

  for (std::size_t t = 1; t <= y.size(); ++t) {
    const double yt = y[t - 1];
    for (std::size_t i = 0; i < n; ++i) x_new[i] = rng.normal(params[i].phi * x[i], std::sqrt(params[i].sigma2));
    for (std::size_t i = 0; i < n; ++i) {
      log_raw[i] = normal_logpdf(yt, x_new[i], params[i].tau2);
      stats[i] = pl_update_stats(stats[i], x[i], x_new[i], yt, options.mode);
    }
    normalize_log_weights(log_raw, w, log_w);
    resample_multinomial(w, rng, idx);
    for (std::size_t i = 0; i < n; ++i) {
      const auto k = static_cast<std::size_t>(idx[i]);
      x_next[i] = x_new[k];
      stats_next[i] = stats[k];
      founder_next[i] = founder[k];
    }
    std::swap(x, x_next);
    std::swap(stats, stats_next);
    std::swap(founder, founder_next);
    for (std::size_t i = 0; i < n; ++i) params[i] = draw_params(stats[i], rng);
    out.summaries.push_back(summarize(static_cast<int>(t), stats));
    out.distinct_lineages.push_back(count_distinct(founder));
  }
  return out;
}

void write_pl_csv(const PlResult& result, std::ostream& out) {
  out << "t,phi_mean,sigma2_mean,tau2_mean\n";
  for (const auto& s : result.summaries)
    out << s.t << ',' << format_double(s.phi_mean) << ',' << format_double(s.sigma2_mean) << ','
        << format_double(s.tau2_mean) << '\n';
}

}  // namespace rbscore
