#include <doctest.h>

#include <cmath>

#include "rbscore/ar1_model.hpp"
#include "rbscore/estimators.hpp"
#include "rbscore/kalman.hpp"
#include "rbscore/polio_model.hpp"
#include "rbscore/score_state.hpp"
#include "support.hpp"

using namespace rbscore;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

std::vector<double> ar1_data(int T, std::uint64_t seed, const Ar1Params& p = {0.8, 0.5, 1.0}) {
  RandomStream rng(seed);
  return simulate(*ar1_model(p), T, rng).y;
}

bool same(const MatrixXd& a, const MatrixXd& b) {
  return a.rows() == b.rows() && a.cols() == b.cols() && (a.array() == b.array()).all();
}

StepIncrements synthetic_increments(int d, std::size_t n, RandomStream& rng) {
  StepIncrements inc;
  inc.resize(d, n, true);
  for (auto& v : inc.grad) v = rng.normal();
  for (std::size_t i = 0; i < n; ++i)
    for (int r = 0; r < d; ++r)
      for (int c = 0; c <= r; ++c) {
        const double v = rng.normal();
        inc.hess[i * d * d + r * d + c] = v;
        inc.hess[i * d * d + c * d + r] = v;
      }
  return inc;
}

}  // namespace

TEST_CASE("lambda = 1 collapses to the path recursion bitwise") {
  const auto m = ar1_model({0.8, 0.5, 1.0});
  const auto y = ar1_data(200, 1);
  RandomStream a(42), b(42);
  RunOptions opts;
  opts.record_trace = true;
  const auto rb = rb_run(*m, y, 300, 1.0, a, true, opts);
  const auto path = poyiadjis_n_run(*m, y, 300, b, true, opts);
  CHECK(same(rb.score, path.score));
  CHECK(same(rb.information, path.information));
  REQUIRE(rb.trace.size() == path.trace.size());
  for (std::size_t i = 0; i < rb.trace.size(); ++i) CHECK(same(rb.trace[i].score, path.trace[i].score));
}

TEST_CASE("first step uses only the initial and observation terms") {
  const auto m = ar1_model({0.8, 0.5, 1.0});
  const std::vector<double> y{0.7};
  for (double lambda : {0.3, 0.95}) {
    RandomStream rng(3);
    const auto est = rb_run(*m, y, 50, lambda, rng);
    RandomStream again(3);
    const ParticleSystem ps = apf_init(*m, y[0], 50, again);
    VectorXd expect = VectorXd::Zero(3);
    std::vector<double> g(3), h(3);
    for (std::size_t i = 0; i < 50; ++i) {
      m->grad_log_g(y[0], ps.x[i], 1, g);
      m->grad_log_init(ps.x[i], h);
      for (int k = 0; k < 3; ++k) expect[k] += ps.w[i] * (g[k] + h[k]);
    }
    CHECK(testing::rel_error(est.score, expect) < 1e-13);
  }
  RandomStream r1(8), r2(8);
  CHECK(same(rb_run(*m, y, 40, 0.2, r1).score, rb_run(*m, y, 40, 0.9, r2).score));
}

TEST_CASE("both forms of the information agree and V grows in Loewner order") {
  const auto m = ar1_model({0.8, 0.5, 1.0});
  const auto y = ar1_data(60, 2);
  RandomStream rng(11);
  const std::size_t n = 200;
  RbScoreState state(3, n, 0.9);
  CHECK(state.h2() == 1.0 - 0.9 * 0.9);
  ParticleSystem prev, cur;
  StepIncrements inc;
  MatrixXd v_prev = MatrixXd::Zero(3, 3);
  for (int t = 1; t <= 60; ++t) {
    if (t == 1)
      apf_init(*m, y[0], n, rng, cur);
    else
      apf_step(prev, *m, y[t - 1], rng, {}, cur);
    compute_increments(*m, t == 1 ? nullptr : &prev, cur, y[t - 1], true, inc);
    state.step(cur.ancestors, cur.w, inc);
    const MatrixXd i1 = state.information();
    const MatrixXd i2 = state.information_inside_sum();
    CHECK((i1 - i2).cwiseAbs().maxCoeff() <= 1e-12 * std::max(1.0, i1.cwiseAbs().maxCoeff()));
    CHECK(same(i1, i1.transpose()));
    const MatrixXd v = state.shrinkage_variance();
    CHECK(same(v, v.transpose()));
    Eigen::SelfAdjointEigenSolver<MatrixXd> eig(v - v_prev);
    CHECK(eig.eigenvalues().minCoeff() >= -1e-10 * std::max(1.0, v.norm()));
    v_prev = v;
    std::swap(prev, cur);
  }
  CHECK(state.time() == 60);
}

TEST_CASE("fixed lag at least T equals the full path recursion bitwise") {
  const auto m = ar1_model({0.8, 0.5, 1.0});
  const auto y = ar1_data(40, 3);
  for (int lag : {40, 100}) {
    RandomStream a(5), b(5);
    const auto fl = fixed_lag_run(*m, y, 100, lag, a);
    const auto rb = rb_run(*m, y, 100, 1.0, b);
    CHECK(same(fl.score, rb.score));
    CHECK(same(fl.information, rb.information));
  }
}

TEST_CASE("fixed-lag bookkeeping matches enumeration over every resampling outcome") {
  // N = 2, T = 3: 2^2 ancestor choices at t = 2 and t = 3, with random
  // increments and weights for each configuration.
  const int d = 2;
  const std::size_t n = 2;
  RandomStream rng(17);
  for (int config = 0; config < 16; ++config) {
    const std::vector<std::vector<int>> anc{
        {0, 1}, {config & 1, (config >> 1) & 1}, {(config >> 2) & 1, (config >> 3) & 1}};
    std::vector<StepIncrements> incs;
    std::vector<std::vector<double>> w;
    for (int t = 0; t < 3; ++t) {
      incs.push_back(synthetic_increments(d, n, rng));
      const double u = 0.05 + 0.9 * rng.uniform();
      w.push_back({u, 1.0 - u});
    }
    for (int lag : {1, 2, 3}) {
      FixedLagScoreState state(d, n, lag);
      for (int t = 0; t < 3; ++t) state.step(anc[t], w[t], incs[t]);
      CHECK(state.buffered_generations() == static_cast<std::size_t>(std::min(lag, 3)));

      // Direct formula: increment s is weighted by w at min(s + L, T) along the
      // lineage traced back from that time.
      VectorXd expect = VectorXd::Zero(d);
      for (int s = 1; s <= 3; ++s) {
        const int at = std::min(s + lag, 3);
        for (std::size_t i = 0; i < n; ++i) {
          int j = static_cast<int>(i);
          for (int u = at; u > s; --u) j = anc[u - 1][j];
          for (int k = 0; k < d; ++k) expect[k] += w[at - 1][i] * incs[s - 1].grad[j * d + k];
        }
      }
      CHECK(testing::rel_error(state.score(), expect) < 1e-14);
    }
  }
}

TEST_CASE("marginal recursion with one particle collapses to the path recursion") {
  const auto m = ar1_model({0.8, 0.5, 1.0});
  RandomStream rng(23);
  const auto path = simulate(*m, 30, rng);
  MarginalScoreState marg(3, 1);
  PathScoreState single(3, 1);
  ParticleSystem prev, cur;
  StepIncrements inc;
  for (int t = 1; t <= 30; ++t) {
    cur.resize(1);
    cur.t = t;
    cur.x[0] = path.x[t - 1];
    cur.w[0] = 1.0;
    cur.log_w[0] = 0.0;
    cur.ancestors[0] = 0;
    const ParticleSystem* before = t == 1 ? nullptr : &prev;
    marg.step(*m, before, cur, path.y[t - 1]);
    compute_increments(*m, before, cur, path.y[t - 1], true, inc);
    single.step(cur.ancestors, cur.w, inc);
    std::swap(prev, cur);
  }
  CHECK(same(marg.score(), single.score()));
  CHECK(testing::rel_error(marg.information(), single.information()) < 1e-10);
}

TEST_CASE("shrinkage coefficients") {
  const auto tab = shrinkage_coeffs(0.5, 5);
  CHECK(tab.closed(3, 3, 3) == 1.0);
  CHECK(tab.recursive(3, 3, 3) == 1.0);
  CHECK(tab.closed(3, 1, 2) == doctest::Approx(0.25).epsilon(1e-15));
  CHECK(tab.recursive(3, 1, 2) == doctest::Approx(0.25).epsilon(1e-15));
  for (double lambda : {0.3, 0.5, 0.9}) {
    const auto t = shrinkage_coeffs(lambda, 12);
    for (int k = 1; k <= 12; ++k)
      for (int u = 1; u <= k; ++u)
        for (int s = u; s <= k; ++s) CHECK(std::abs(t.recursive(k, u, s) - t.closed(k, u, s)) <= 1e-12);
  }
  CHECK_THROWS_AS(shrinkage_coeffs(1.0, 5), std::invalid_argument);
  CHECK_THROWS_AS(shrinkage_coeffs(0.5, 21), std::invalid_argument);
}

TEST_CASE("shared filter feeds every accumulator from the same particles") {
  const auto m = ar1_model({0.8, 0.5, 1.0});
  const auto y = ar1_data(50, 4);
  const std::vector<AccumulatorSpec> specs{{EstimatorKind::rb, 0.9, 0}, {EstimatorKind::fixed_lag, 1.0, 5}};
  RandomStream a(7), b(7), c(7);
  const auto both = run_shared_filter(*m, y, 100, specs, true, {}, a);
  CHECK(same(both[0].score, rb_run(*m, y, 100, 0.9, b).score));
  CHECK(same(both[1].information, fixed_lag_run(*m, y, 100, 5, c).information));
}

TEST_CASE("estimators are deterministic and reject bad input") {
  const auto m = ar1_model({0.8, 0.5, 1.0});
  const auto y = ar1_data(30, 5);
  for (auto kind : {EstimatorKind::rb, EstimatorKind::poyiadjis_n, EstimatorKind::poyiadjis_n2,
                    EstimatorKind::fixed_lag, EstimatorKind::kalman}) {
    EstimatorConfig cfg;
    cfg.kind = kind;
    cfg.particles = 60;
    RandomStream a(1), b(1);
    const auto e1 = run_estimator(*m, y, cfg, a);
    const auto e2 = run_estimator(*m, y, cfg, b);
    CHECK(same(e1.score, e2.score));
    CHECK(same(e1.information, e2.information));
    CHECK(parse_estimator_kind(to_string(kind)) == kind);
  }
  RandomStream rng(1);
  CHECK_THROWS_AS(rb_run(*m, y, 10, 0.0, rng), std::invalid_argument);
  CHECK_THROWS_AS(rb_run(*m, y, 10, 1.5, rng), std::invalid_argument);
  CHECK_THROWS_AS(fixed_lag_run(*m, y, 10, 0, rng), std::invalid_argument);
  CHECK_THROWS_AS(rb_run(*m, {}, 10, 0.5, rng), std::invalid_argument);
  CHECK_THROWS_AS(parse_estimator_kind("bogus"), std::invalid_argument);

  RbScoreState state(2, 4, 0.5);
  StepIncrements inc;
  inc.resize(3, 4, true);
  const std::vector<int> anc{0, 1, 2, 3};
  const std::vector<double> w(4, 0.25);
  CHECK_THROWS_AS(state.step(anc, w, inc), std::invalid_argument);

  const auto polio = polio_model(PolioParams{});
  CHECK_THROWS_AS(kalman_run(*polio, y), std::invalid_argument);
}

TEST_CASE("score-only runs match the score of full runs") {
  const auto m = ar1_model({0.8, 0.5, 1.0});
  const auto y = ar1_data(40, 6);
  RandomStream a(2), b(2);
  const auto full = rb_run(*m, y, 100, 0.95, a, true);
  const auto lean = rb_run(*m, y, 100, 0.95, b, false);
  CHECK(same(full.score, lean.score));
  CHECK(lean.information.size() == 0);
}

TEST_CASE("kalman trace recording honours the stride") {
  const auto m = ar1_model({0.8, 0.5, 1.0});
  const auto y = ar1_data(25, 7);
  RunOptions opts;
  opts.record_trace = true;
  opts.trace_every = 10;
  const auto est = kalman_run(*m, y, opts);
  REQUIRE(est.trace.size() == 3u);
  CHECK(est.trace[0].t == 10);
  CHECK(est.trace[2].t == 25);
  CHECK(same(est.trace[2].score, est.score));
}
