#include <doctest.h>

#include <cmath>
#include <limits>

#include "rbscore/ar1_model.hpp"
#include "rbscore/filter.hpp"
#include "rbscore/kalman.hpp"
#include "rbscore/polio_model.hpp"
#include "support.hpp"

using namespace rbscore;

namespace {

double run_filter_loglik(const StateSpaceModel& m, const std::vector<double>& y, std::size_t n, std::uint64_t seed,
                         const FilterOptions& opts = {}, ParticleSystem* last = nullptr) {
  RandomStream rng(seed);
  ParticleSystem ps = apf_init(m, y[0], n, rng);
  double ll = ps.loglik_increment;
  for (std::size_t t = 1; t < y.size(); ++t) {
    ps = apf_step(ps, m, y[t], rng, opts);
    ll += ps.loglik_increment;
  }
  if (last) *last = ps;
  return ll;
}

}  // namespace

TEST_CASE("multinomial resampling follows the target probabilities") {
  const std::vector<double> p{0.1, 0.2, 0.3, 0.4};
  RandomStream rng(1);
  const std::size_t n = 100000;
  std::vector<int> idx(n);
  resample_multinomial(p, rng, idx);
  std::vector<double> counts(4, 0.0);
  for (int i : idx) counts[i] += 1.0;
  double chi2 = 0.0;
  for (int k = 0; k < 4; ++k) chi2 += std::pow(counts[k] - n * p[k], 2) / (n * p[k]);
  // 99.9% quantile of chi-square with 3 degrees of freedom.
  CHECK(chi2 < 16.27);
  CHECK(std::is_sorted(idx.begin(), idx.end()));
}

TEST_CASE("systematic resampling keeps counts within one of N p") {
  const std::vector<double> p{0.05, 0.45, 0.2, 0.3};
  RandomStream rng(2);
  std::vector<int> idx(1000);
  resample_systematic(p, rng, idx);
  std::vector<double> counts(4, 0.0);
  for (int i : idx) counts[i] += 1.0;
  for (int k = 0; k < 4; ++k) CHECK(std::abs(counts[k] - 1000 * p[k]) <= 1.0);
}

TEST_CASE("weight normalization and log-sum-exp") {
  const std::vector<double> raw{-1000.0, -1001.0, std::nan("")};
  std::vector<double> w(3), lw(3);
  normalize_log_weights(raw, w, lw);
  CHECK(w[0] + w[1] + w[2] == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(w[2] == 0.0);
  CHECK(w[0] / w[1] == doctest::Approx(std::exp(1.0)));
  CHECK(log_sum_exp(raw) == doctest::Approx(-1000.0 + std::log1p(std::exp(-1.0))));
  const double inf = std::numeric_limits<double>::infinity();
  const std::vector<double> dead{-inf, -inf};
  std::vector<double> w2(2), lw2(2);
  CHECK_THROWS_AS(normalize_log_weights(dead, w2, lw2), DegenerateFilterError);
  CHECK(loglik_increment(dead) == -inf);
  CHECK(loglik_increment(std::vector<double>{0.0, 0.0}) == doctest::Approx(0.0));
}

TEST_CASE("filter rejects a single particle") {
  const auto m = ar1_model({0.8, 0.5, 1.0});
  RandomStream rng(1);
  CHECK_THROWS_AS(apf_init(*m, 0.0, 1, rng), std::invalid_argument);
}

TEST_CASE("filter is deterministic for a fixed seed") {
  const auto m = ar1_model({0.8, 0.5, 1.0});
  RandomStream rng(4);
  const auto y = simulate(*m, 50, rng).y;
  ParticleSystem a, b;
  CHECK(run_filter_loglik(*m, y, 200, 9, {}, &a) == run_filter_loglik(*m, y, 200, 9, {}, &b));
  CHECK(a.x == b.x);
  CHECK(a.ancestors == b.ancestors);
}

TEST_CASE("filter log-likelihood tracks the Kalman value") {
  const Ar1Params p{0.8, 0.5, 1.0};
  const auto m = ar1_model(p);
  const auto boot = ar1_model(p, false);
  RandomStream rng(5);
  const auto y = simulate(*m, 100, rng).y;
  const double exact = kalman_loglik(p, y);
  ParticleSystem last;
  CHECK(std::abs(run_filter_loglik(*m, y, 5000, 1, {}, &last) - exact) < 0.2);
  CHECK(std::abs(run_filter_loglik(*boot, y, 5000, 1) - exact) < 0.5);
  FilterOptions sys;
  sys.resampling = Resampling::systematic;
  CHECK(std::abs(run_filter_loglik(*m, y, 5000, 1, sys) - exact) < 0.2);

  // Filtering mean at T against the Kalman filter.
  double mean = 0.0;
  for (std::size_t i = 0; i < last.size(); ++i) mean += last.w[i] * last.x[i];
  CHECK(std::abs(mean - kalman_trace(p, y).back().filtered.mean) < 0.05);
}

TEST_CASE("likelihood estimate is unbiased on the natural scale") {
  const Ar1Params p{0.8, 0.5, 1.0};
  const auto m = ar1_model(p, false);
  RandomStream rng(6);
  const auto y = simulate(*m, 20, rng).y;
  const double exact = kalman_loglik(p, y);
  std::vector<double> ratios;
  for (int r = 0; r < 400; ++r) ratios.push_back(std::exp(run_filter_loglik(*m, y, 100, 1000 + r) - exact));
  const double se = std::sqrt(testing::variance(ratios) / ratios.size());
  CHECK(std::abs(testing::mean(ratios) - 1.0) < 4.0 * se + 1e-3);
}

TEST_CASE("polio model runs through the bootstrap filter") {
  const auto m = polio_model(PolioParams{{0.2, -3.9, 0.1, -0.4, 0.5, 0.0}, 0.6, 0.3});
  RandomStream rng(7);
  const auto y = simulate(*m, 168, rng).y;
  const double ll = run_filter_loglik(*m, y, 500, 3);
  CHECK(std::isfinite(ll));
  CHECK(ll < 0.0);
}

TEST_CASE("optimal proposal leaves the weights uniform") {
  const auto m = ar1_model({0.8, 0.5, 1.0});
  RandomStream rng(8);
  const auto y = simulate(*m, 10, rng).y;
  ParticleSystem ps = apf_init(*m, y[0], 500, rng);
  for (std::size_t t = 1; t < y.size(); ++t) {
    ps = apf_step(ps, *m, y[t], rng);
    for (double w : ps.w) CHECK(std::abs(w - 1.0 / 500.0) < 1e-10);
  }
}

TEST_CASE("first filtering mean matches the Kalman posterior") {
  const Ar1Params p{0.8, 0.5, 1.0};
  const auto m = ar1_model(p);
  const double y1 = 1.3;
  RandomStream rng(10);
  const std::size_t n = 100000;
  const ParticleSystem ps = apf_init(*m, y1, n, rng);
  double mean = 0.0, sq = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mean += ps.w[i] * ps.x[i];
    sq += ps.w[i] * ps.x[i] * ps.x[i];
  }
  double ess = 0.0;
  for (double w : ps.w) ess += w * w;
  const double se = std::sqrt((sq - mean * mean) * ess);
  const auto k = kalman_trace(p, std::vector<double>{y1});
  CHECK(std::abs(mean - k[0].filtered.mean) < 3.0 * se);
}

TEST_CASE("filtered means and log-likelihood agree with Kalman across replicates") {
  const Ar1Params p{0.8, 0.5, 1.0};
  const auto m = ar1_model(p);
  RandomStream data(12);
  const auto y = simulate(*m, 200, data).y;
  const auto kal = kalman_trace(p, y);
  const int reps = 20;
  std::vector<std::vector<double>> means(y.size());
  std::vector<double> lls;
  for (int r = 0; r < 50; ++r) {
    RandomStream rng(derive_seed(77, {static_cast<std::uint64_t>(r)}));
    ParticleSystem ps = apf_init(*m, y[0], 10000, rng);
    double ll = ps.loglik_increment;
    for (std::size_t t = 0; t < y.size(); ++t) {
      if (t > 0) {
        ps = apf_step(ps, *m, y[t], rng);
        ll += ps.loglik_increment;
      }
      if (r < reps) {
        double mu = 0.0;
        for (std::size_t i = 0; i < ps.size(); ++i) mu += ps.w[i] * ps.x[i];
        means[t].push_back(mu);
      }
    }
    lls.push_back(ll);
  }
  int inside = 0;
  for (std::size_t t = 0; t < y.size(); ++t) {
    const double se = std::sqrt(testing::variance(means[t]) / reps);
    if (std::abs(testing::mean(means[t]) - kal[t].filtered.mean) < 3.0 * se) ++inside;
  }
  // Pointwise 3-SE bands over 200 steps: a few misses are expected.
  CHECK(inside >= 194);
  const double se = std::sqrt(testing::variance(lls) / lls.size());
  CHECK(std::abs(testing::mean(lls) - kalman_loglik(p, y)) < 3.0 * se);
}

TEST_CASE("simulated path has the stationary variance") {
  RandomStream rng(13);
  const auto path = simulate(*ar1_model({0.8, 0.5, 1.0}), 10000, rng);
  CHECK(std::abs(testing::variance(path.x) / (0.25 / 0.36) - 1.0) < 0.05);
}
