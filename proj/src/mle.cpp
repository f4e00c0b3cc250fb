#include "rbscore/mle.hpp"

#include <cmath>
#include <ostream>
#include <stdexcept>

#include "rbscore/data_io.hpp"
#include "rbscore/score_state.hpp"

namespace rbscore {

double StepSchedule::gamma(int k) const {
  if (k < 1) throw std::invalid_argument("step index must be >= 1");
  if (kind == Kind::constant) return scale;
  return scale * std::pow(static_cast<double>(k), -alpha);
}

Eigen::VectorXd StepSchedule::gains(int k, int d) const {
  Eigen::VectorXd g = Eigen::VectorXd::Constant(d, gamma(k));
  if (per_coordinate_scale.size() > 0) g = g.cwiseProduct(per_coordinate_scale);
  return g;
}

void StepSchedule::validate(int d) const {
  if (!(scale > 0.0) || !std::isfinite(scale)) throw std::invalid_argument("schedule.scale must be > 0");
  if (kind == Kind::power && !(alpha > 0.5 && alpha <= 1.0))
    throw std::invalid_argument("schedule.alpha must lie in (0.5, 1]");
  if (per_coordinate_scale.size() > 0) {
    if (per_coordinate_scale.size() != d)
      throw std::invalid_argument("schedule.per_coordinate_scale must have one entry per parameter");
    for (double v : per_coordinate_scale)
      if (!(v >= 0.0) || !std::isfinite(v))
        throw std::invalid_argument("schedule.per_coordinate_scale entries must be finite and >= 0");
  }
}

std::string to_string(AscentStatus status) {
  switch (status) {
    case AscentStatus::max_iters: return "max-iters";
    case AscentStatus::converged: return "converged";
    case AscentStatus::diverged: return "diverged";
  }
  return "unknown";
}

void write_ascent_csv(const AscentTrace& trace, std::ostream& out) {
  const Eigen::Index d = trace.theta0.size();
  out << "k";
  for (Eigen::Index i = 1; i <= d; ++i) out << ",theta_" << i;
  out << ",score_norm,step_norm\n";
  for (const auto& r : trace.records) {
    out << r.k;
    for (Eigen::Index i = 0; i < d; ++i) out << ',' << format_double(r.theta[i]);
    out << ',' << format_double(r.score_norm) << ',' << format_double(r.step_norm) << '\n';
  }
}

Eigen::VectorXd newton_safeguard(const Eigen::MatrixXd& info, const Eigen::VectorXd& score) {
  const Eigen::Index d = score.size();
  if (info.rows() != d || info.cols() != d) throw std::invalid_argument("newton_safeguard: dimension mismatch");
  if (!info.allFinite() || !score.allFinite()) return score;
  const Eigen::MatrixXd sym = 0.5 * (info + info.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(sym);
  if (eig.info() != Eigen::Success) return score;
  const Eigen::VectorXd& ev = eig.eigenvalues();
  const double scale = std::max(std::abs(sym.trace()), ev.cwiseAbs().maxCoeff()) / static_cast<double>(d);
  const double eps = 1e-8 * scale;

  auto accept = [&](const Eigen::VectorXd& step) { return step.allFinite() && score.dot(step) >= 0.0; };

  if (ev.minCoeff() > eps && eps > 0.0) {
    Eigen::VectorXd step = sym.ldlt().solve(score);
    if (accept(step)) return step;
  }
  if (scale > 0.0) {
    // Reflect the most negative eigenvalue, but never below a tenth of the
    // average curvature: near-singular directions otherwise take huge steps.
    const double ridge = -ev.minCoeff() + std::max(std::abs(ev.minCoeff()), 0.1 * scale);
    // (I + ridge)^{-1} S through the eigenbasis already at hand.
    const Eigen::VectorXd shifted = ev + Eigen::VectorXd::Constant(d, ridge);
    Eigen::VectorXd step = eig.eigenvectors() * (eig.eigenvectors().transpose() * score).cwiseQuotient(shifted);
    if (accept(step)) return step;
  }
  return score;
}

namespace {

// Projects theta + step into the admissible set, halving the step when the
// projection still fails. Returns false when no admissible point is found.
bool advance(const StateSpaceModel& model, const Eigen::VectorXd& theta, Eigen::VectorXd step,
             Eigen::VectorXd& out) {
  for (int attempt = 0; attempt < 20; ++attempt) {
    if (step.allFinite()) {
      Eigen::VectorXd next = model.project(theta + step);
      if (next.allFinite() && model.admissible(next)) {
        out = std::move(next);
        return true;
      }
    }
    step *= 0.5;
  }
  return false;
}

}  // namespace

AscentTrace batch_ascent(const StateSpaceModel& model, std::span<const double> y, const Eigen::VectorXd& theta0,
                         const EstimatorConfig& estimator, const StepSchedule& schedule, const BatchOptions& options,
                         std::uint64_t seed) {
  const int d = model.dim();
  if (theta0.size() != d) throw std::invalid_argument("batch_ascent: theta0 has the wrong dimension");
  if (options.iterations < 1) throw std::invalid_argument("batch_ascent: iterations must be >= 1");
  if (!model.admissible(theta0)) throw std::invalid_argument("batch_ascent: theta0 is not admissible");
  schedule.validate(d);

  EstimatorConfig cfg = estimator;
  cfg.information = options.newton;

  AscentTrace trace;
  trace.theta0 = theta0;
  Eigen::VectorXd theta = theta0;
  for (int k = 1; k <= options.iterations; ++k) {
    const auto bound = model.with_theta(theta);
    RandomStream rng(derive_seed(seed, {static_cast<std::uint64_t>(options.common_random_numbers ? 1 : k)}));
    ScoreEstimate est;
    try {
      est = run_estimator(*bound, y, cfg, rng);
    } catch (const DegenerateFilterError&) {
      trace.status = AscentStatus::diverged;
      break;
    }
    if (!est.score.allFinite()) {
      trace.status = AscentStatus::diverged;
      break;
    }
    const Eigen::VectorXd direction = options.newton ? newton_safeguard(est.information, est.score) : est.score;
    Eigen::VectorXd next;
    if (!advance(model, theta, schedule.gains(k, d).cwiseProduct(direction), next)) {
      trace.status = AscentStatus::diverged;
      break;
    }
    AscentRecord rec;
    rec.k = k;
    rec.score = est.score;
    rec.score_norm = est.score.norm();
    rec.step_norm = (next - theta).norm();
    rec.theta = next;
    theta = next;
    trace.records.push_back(std::move(rec));
    if (options.tol > 0.0 && trace.records.back().step_norm < options.tol) {
      trace.status = AscentStatus::converged;
      break;
    }
  }
  trace.final_theta = theta;
  return trace;
}

AscentTrace recursive_ascent(const StateSpaceModel& model, std::span<const double> y, const Eigen::VectorXd& theta0,
                             const StepSchedule& schedule, const RecursiveOptions& options, RandomStream& rng) {
  const int d = model.dim();
  if (theta0.size() != d) throw std::invalid_argument("recursive_ascent: theta0 has the wrong dimension");
  if (y.empty()) throw std::invalid_argument("recursive_ascent: empty observation stream");
  if (options.record_every < 1) throw std::invalid_argument("recursive_ascent: record_every must be >= 1");
  if (!model.admissible(theta0)) throw std::invalid_argument("recursive_ascent: theta0 is not admissible");
  schedule.validate(d);

  AscentTrace trace;
  trace.theta0 = theta0;
  Eigen::VectorXd theta = theta0;
  RbScoreState state(d, options.particles, options.lambda, false);
  ParticleSystem prev, cur;
  StepIncrements inc;
  Eigen::VectorXd last_score = Eigen::VectorXd::Zero(d);
  const int T = static_cast<int>(y.size());
  for (int t = 1; t <= T; ++t) {
    const auto bound = model.with_theta(theta);
    const double yt = y[t - 1];
    try {
      if (t == 1)
        apf_init(*bound, yt, options.particles, rng, cur);
      else
        apf_step(prev, *bound, yt, rng, options.filter, cur);
    } catch (const DegenerateFilterError&) {
      trace.status = AscentStatus::diverged;
      break;
    }
    compute_increments(*bound, t == 1 ? nullptr : &prev, cur, yt, false, inc);
    state.step(cur.ancestors, cur.w, inc);
    const Eigen::VectorXd delta = state.score() - last_score;
    last_score = state.score();
    Eigen::VectorXd next;
    if (!delta.allFinite() || !advance(model, theta, schedule.gains(t, d).cwiseProduct(delta), next)) {
      trace.status = AscentStatus::diverged;
      break;
    }
    const double step_norm = (next - theta).norm();
    theta = next;
    std::swap(prev, cur);
    if (t % options.record_every == 0 || t == T) {
      AscentRecord rec;
      rec.k = t;
      rec.theta = theta;
      rec.score = delta;
      rec.score_norm = delta.norm();
      rec.step_norm = step_norm;
      trace.records.push_back(std::move(rec));
    }
  }
  trace.final_theta = theta;
  return trace;
}

}  // namespace rbscore
