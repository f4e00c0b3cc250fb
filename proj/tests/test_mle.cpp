#include <doctest.h>

#include <cmath>
#include <sstream>

#include "rbscore/ar1_model.hpp"
#include "rbscore/kalman.hpp"
#include "rbscore/mle.hpp"
#include "support.hpp"

using namespace rbscore;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

// AR(1) densities with every derivative forced to zero: a model whose score
// vanishes identically.
class FlatModel final : public StateSpaceModel {
 public:
  explicit FlatModel(const Ar1Params& p) : inner_(ar1_model(p, false)) {}
  std::string id() const override { return "flat"; }
  const ThetaVector& theta() const override { return inner_->theta(); }
  ModelPtr with_theta(const VectorXd& th) const override {
    return std::make_shared<FlatModel>(Ar1Params::from_vector(th));
  }
  bool admissible(const VectorXd& th) const override { return inner_->admissible(th); }
  VectorXd project(const VectorXd& th) const override { return inner_->project(th); }
  double init_logpdf(double x) const override { return inner_->init_logpdf(x); }
  double init_sample(RandomStream& rng) const override { return inner_->init_sample(rng); }
  double trans_logpdf(double x, double xp) const override { return inner_->trans_logpdf(x, xp); }
  double trans_sample(RandomStream& rng, double xp) const override { return inner_->trans_sample(rng, xp); }
  double obs_logpdf(double y, double x, int t) const override { return inner_->obs_logpdf(y, x, t); }
  double obs_sample(RandomStream& rng, double x, int t) const override { return inner_->obs_sample(rng, x, t); }
  void grad_log_init(double, std::span<double> o) const override { std::fill(o.begin(), o.end(), 0.0); }
  void grad_log_f(double, double, std::span<double> o) const override { std::fill(o.begin(), o.end(), 0.0); }
  void grad_log_g(double, double, int, std::span<double> o) const override { std::fill(o.begin(), o.end(), 0.0); }
  void hess_log_init(double, std::span<double> o) const override { std::fill(o.begin(), o.end(), 0.0); }
  void hess_log_f(double, double, std::span<double> o) const override { std::fill(o.begin(), o.end(), 0.0); }
  void hess_log_g(double, double, int, std::span<double> o) const override { std::fill(o.begin(), o.end(), 0.0); }

 private:
  std::shared_ptr<const Ar1Model> inner_;
};

std::vector<double> ar1_data(int T, std::uint64_t seed, const Ar1Params& p) {
  RandomStream rng(seed);
  return simulate(*ar1_model(p), T, rng).y;
}

}  // namespace

TEST_CASE("power schedule") {
  StepSchedule s;
  s.scale = 0.5;
  s.alpha = 0.7;
  CHECK(s.gamma(1) == 0.5);
  for (int k = 1; k < 100; ++k) CHECK(s.gamma(k + 1) < s.gamma(k));
  s.per_coordinate_scale = Eigen::Vector2d(1.0, 0.1);
  CHECK(s.gains(4, 2)[1] == doctest::Approx(0.1 * s.gamma(4)));
  CHECK_THROWS_AS(s.validate(3), std::invalid_argument);
  StepSchedule bad;
  bad.alpha = 0.5;
  CHECK_THROWS_AS(bad.validate(1), std::invalid_argument);
  StepSchedule c;
  c.kind = StepSchedule::Kind::constant;
  c.scale = 0.2;
  CHECK(c.gamma(50) == 0.2);
}

TEST_CASE("newton safeguard") {
  const VectorXd s = Eigen::Vector3d(1.0, -2.0, 0.5);
  CHECK(testing::rel_error(newton_safeguard(MatrixXd::Identity(3, 3), s), s) < 1e-15);

  RandomStream rng(4);
  for (int rep = 0; rep < 50; ++rep) {
    MatrixXd a(4, 4);
    for (Eigen::Index i = 0; i < a.size(); ++i) a.data()[i] = rng.normal();
    const MatrixXd spd = a * a.transpose() + 0.1 * MatrixXd::Identity(4, 4);
    VectorXd g(4);
    for (auto& v : g) v = rng.normal();
    const VectorXd oracle = spd.fullPivLu().solve(g);
    CHECK((newton_safeguard(spd, g) - oracle).cwiseAbs().maxCoeff() <= 1e-10 * std::max(1.0, oracle.norm()));

    MatrixXd indef = spd;
    indef -= 2.0 * spd.trace() * VectorXd::Unit(4, rep % 4) * VectorXd::Unit(4, rep % 4).transpose();
    const VectorXd step = newton_safeguard(indef, g);
    CHECK(step.allFinite());
    CHECK(g.dot(step) >= 0.0);
  }
  const VectorXd fallback = newton_safeguard(MatrixXd::Constant(3, 3, NAN), s);
  CHECK(testing::rel_error(fallback, s) == 0.0);
  CHECK(s.dot(newton_safeguard(MatrixXd::Zero(3, 3), s)) >= 0.0);
}

TEST_CASE("batch Newton with the exact score reaches the likelihood maximum") {
  const auto y = ar1_data(1000, 31, {0.9, 0.7, 1.0});
  // Independent optimizer on the likelihood value alone.
  auto ll = [&](const VectorXd& th) {
    if (std::abs(th[0]) >= 1.0 || th[1] <= 0.0 || th[2] <= 0.0) return -1e300;
    return kalman_loglik(Ar1Params::from_vector(th), y);
  };
  VectorXd nm = testing::nelder_mead_max(ll, Eigen::Vector3d(0.6, 1.0, 0.7), 0.1, 2000);

  const auto m = ar1_model({0.6, 1.0, 0.7});
  EstimatorConfig est;
  est.kind = EstimatorKind::kalman;
  StepSchedule sched;
  sched.kind = StepSchedule::Kind::constant;
  sched.scale = 1.0;
  BatchOptions opts;
  opts.iterations = 100;
  opts.newton = true;
  opts.tol = 1e-12;
  const auto trace = batch_ascent(*m, y, Eigen::Vector3d(0.6, 1.0, 0.7), est, sched, opts, 1);
  const auto at = kalman_score_info(Ar1Params::from_vector(trace.final_theta), y);
  CHECK(at.score.norm() <= 1e-4);
  CHECK((trace.final_theta - nm).cwiseAbs().maxCoeff() < 1e-3);
  CHECK(Eigen::SelfAdjointEigenSolver<MatrixXd>(at.obs_info).eigenvalues().minCoeff() > 0.0);
  CHECK(trace.status == AscentStatus::converged);
  for (const auto& r : trace.records) CHECK(r.score_norm >= 0.0);
}

TEST_CASE("zero score leaves theta in place") {
  const FlatModel m({0.5, 0.5, 1.0});
  const auto y = ar1_data(20, 3, {0.5, 0.5, 1.0});
  EstimatorConfig est;
  est.particles = 50;
  StepSchedule sched;
  BatchOptions opts;
  opts.iterations = 3;
  const VectorXd th0 = Eigen::Vector3d(0.5, 0.5, 1.0);
  const auto trace = batch_ascent(m, y, th0, est, sched, opts, 9);
  REQUIRE(trace.records.size() == 3u);
  CHECK((trace.records[0].theta.array() == th0.array()).all());
  CHECK(trace.records[0].step_norm == 0.0);
}

TEST_CASE("batch ascent is deterministic and writes its trace") {
  const auto m = ar1_model({0.6, 1.0, 0.7});
  const auto y = ar1_data(100, 5, {0.9, 0.7, 1.0});
  EstimatorConfig est;
  est.particles = 100;
  StepSchedule sched;
  sched.scale = 0.002;
  BatchOptions opts;
  opts.iterations = 5;
  const auto a = batch_ascent(*m, y, Eigen::Vector3d(0.6, 1.0, 0.7), est, sched, opts, 77);
  const auto b = batch_ascent(*m, y, Eigen::Vector3d(0.6, 1.0, 0.7), est, sched, opts, 77);
  std::ostringstream sa, sb;
  write_ascent_csv(a, sa);
  write_ascent_csv(b, sb);
  CHECK(sa.str() == sb.str());
  CHECK(sa.str().rfind("k,theta_1,theta_2,theta_3,score_norm,step_norm\n", 0) == 0);
  CHECK(a.records.size() == 5u);
  CHECK(a.status == AscentStatus::max_iters);
  CHECK(to_string(AscentStatus::diverged) == "diverged");
  CHECK_THROWS_AS(batch_ascent(*m, y, Eigen::Vector3d(1.2, 1.0, 0.7), est, sched, opts, 1), std::invalid_argument);
}

TEST_CASE("projection keeps iterates admissible") {
  const auto m = ar1_model({0.6, 1.0, 0.7});
  const auto y = ar1_data(200, 6, {0.95, 0.3, 1.0});
  EstimatorConfig est;
  est.kind = EstimatorKind::kalman;
  StepSchedule sched;
  sched.kind = StepSchedule::Kind::constant;
  sched.scale = 1.0;  // far too large for gradient steps
  BatchOptions opts;
  opts.iterations = 20;
  const auto trace = batch_ascent(*m, y, Eigen::Vector3d(0.6, 1.0, 0.7), est, sched, opts, 1);
  for (const auto& r : trace.records) CHECK(m->admissible(r.theta));
}

TEST_CASE("recursive ascent") {
  const Ar1Params truth{0.9, std::sqrt(1.0 - 0.81), 1.0};
  const auto m = ar1_model({0.5, 0.6, 1.0});
  const VectorXd th0 = m->theta().values();
  RecursiveOptions opts;
  opts.particles = 100;

  SUBCASE("zero gain keeps theta fixed") {
    const std::vector<double> y(30, 0.4);
    StepSchedule s;
    s.per_coordinate_scale = VectorXd::Zero(3);
    RandomStream rng(1);
    const auto trace = recursive_ascent(*m, y, th0, s, opts, rng);
    REQUIRE(trace.records.size() == 30u);
    for (const auto& r : trace.records) CHECK((r.theta.array() == th0.array()).all());
  }
  SUBCASE("a single observation gives one update along S_1") {
    const std::vector<double> y{0.8};
    StepSchedule s;
    s.scale = 0.1;
    RandomStream a(4), b(4);
    const auto trace = recursive_ascent(*m, y, th0, s, opts, a);
    const auto s1 = rb_run(*m, y, 100, opts.lambda, b, false).score;
    REQUIRE(trace.records.size() == 1u);
    CHECK(testing::rel_error(trace.final_theta, m->project(th0 + 0.1 * s1)) < 1e-15);
  }
  SUBCASE("estimates move toward the truth") {
    const auto y = ar1_data(5000, 8, truth);
    StepSchedule s;
    s.scale = 0.01;
    s.alpha = 0.6;
    s.per_coordinate_scale = Eigen::Vector3d(1.0, 1.0, 0.0);
    RandomStream rng(2);
    opts.record_every = 1000;
    const auto trace = recursive_ascent(*m, y, th0, s, opts, rng);
    CHECK(trace.records.size() == 5u);
    CHECK(std::abs(trace.final_theta[0] - 0.9) < std::abs(th0[0] - 0.9));
  }
}
