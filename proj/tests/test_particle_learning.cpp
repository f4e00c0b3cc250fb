#include <doctest.h>

#include <cmath>
#include <sstream>

#include "rbscore/ar1_model.hpp"
#include "rbscore/particle_learning.hpp"
#include "support.hpp"

using namespace rbscore;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

struct FixedPath {
  double x0 = 0.3;
  std::vector<double> x{0.9, -0.4, 1.7, 0.2, -1.1};
  std::vector<double> y{1.2, -0.1, 2.5, -0.6, -0.9};
};

SuffStats run_stats(const FixedPath& fp, PlUpdate mode) {
  SuffStats s;
  double prev = fp.x0;
  for (std::size_t t = 0; t < fp.x.size(); ++t) {
    s = pl_update_stats(s, prev, fp.x[t], fp.y[t], mode);
    CHECK(s.valid());
    prev = fp.x[t];
  }
  return s;
}

}  // namespace

TEST_CASE("stats update special cases") {
  const SuffStats s0;
  const SuffStats z = pl_update_stats(s0, 0.0, 0.0, 1.0);
  CHECK(z.q == s0.q);
  CHECK(z.p == s0.p);
  CHECK(z.a == s0.a + 1.0);
  CHECK(z.b == s0.b);
  const SuffStats e = pl_update_stats(s0, 0.4, 0.7, 0.7);
  CHECK(e.d == s0.d);
  CHECK(e.c == s0.c + 1.0);
}

TEST_CASE("textbook stats reproduce the dense conjugate regression posterior") {
  const FixedPath fp;
  const SuffStats s = run_stats(fp, PlUpdate::textbook);
  const SuffStats prior;
  const int T = 5;
  VectorXd X(T), x(T), y(T);
  for (int t = 0; t < T; ++t) {
    X[t] = t == 0 ? fp.x0 : fp.x[t - 1];
    x[t] = fp.x[t];
    y[t] = fp.y[t];
  }
  // Normal-inverse-gamma regression of x on X.
  const double prec = 1.0 / prior.q + X.dot(X);
  const double mean = (prior.p / prior.q + X.dot(x)) / prec;
  const VectorXd resid = x - mean * X;
  const double b = prior.b + resid.dot(resid) + (mean - prior.p) * (mean - prior.p) / prior.q;
  CHECK(std::abs(s.q - 1.0 / prec) < 1e-10);
  CHECK(std::abs(s.p - mean) < 1e-10);
  CHECK(std::abs(s.a - (prior.a + T)) < 1e-10);
  CHECK(std::abs(s.b - b) < 1e-10);
  CHECK(std::abs(s.c - (prior.c + T)) < 1e-10);
  CHECK(std::abs(s.d - (prior.d + (y - x).squaredNorm())) < 1e-10);
}

TEST_CASE("literal stats match their telescoped closed form") {
  const FixedPath fp;
  const SuffStats s = run_stats(fp, PlUpdate::literal);
  const SuffStats prior;
  double sxx = 0.0, sxp = 0.0;
  double prev = fp.x0;
  for (double xt : fp.x) {
    sxx += xt * xt;
    sxp += prev * xt;
    prev = xt;
  }
  const double q_inv = 1.0 / prior.q + sxx;
  const double p = (prior.p / prior.q + sxp) / q_inv;
  CHECK(std::abs(1.0 / s.q - q_inv) < 1e-10);
  CHECK(std::abs(s.p - p) < 1e-10);
  CHECK(std::abs(s.b - (prior.b + sxx + prior.p * prior.p / prior.q - p * p * q_inv)) < 1e-10);
}

TEST_CASE("empty stream returns the prior means") {
  RandomStream rng(1);
  PlOptions opts;
  opts.particles = 10;
  const auto res = pl_run({}, opts, rng);
  REQUIRE(res.summaries.size() == 1u);
  CHECK(res.summaries[0].phi_mean == doctest::Approx(0.6));
  CHECK(res.summaries[0].sigma2_mean == doctest::Approx(3.5 / 3.0));
  CHECK(res.summaries[0].tau2_mean == doctest::Approx(5.0 / 3.0));
}

TEST_CASE("lineage count never increases and the run is reproducible") {
  const auto m = ar1_model({0.9, std::sqrt(0.19), 1.0});
  RandomStream data(3);
  const auto y = simulate(*m, 300, data).y;
  PlOptions opts;
  opts.particles = 200;
  RandomStream a(5), b(5);
  const auto r1 = pl_run(y, opts, a);
  const auto r2 = pl_run(y, opts, b);
  REQUIRE(r1.distinct_lineages.size() == 301u);
  for (std::size_t t = 1; t < r1.distinct_lineages.size(); ++t)
    CHECK(r1.distinct_lineages[t] <= r1.distinct_lineages[t - 1]);
  CHECK(r1.distinct_lineages.back() < 200u);
  std::ostringstream s1, s2;
  write_pl_csv(r1, s1);
  write_pl_csv(r2, s2);
  CHECK(s1.str() == s2.str());
  CHECK(s1.str().rfind("t,phi_mean,sigma2_mean,tau2_mean\n", 0) == 0);
  for (const auto& s : r1.summaries) CHECK((s.sigma2_mean > 0.0 && s.tau2_mean > 0.0));
  RandomStream c(1);
  PlOptions one;
  one.particles = 1;
  CHECK_THROWS_AS(pl_run(y, one, c), std::invalid_argument);
}
