#include "rbscore/estimators.hpp"

#include <memory>
#include <stdexcept>

#include "rbscore/ar1_model.hpp"
#include "rbscore/kalman.hpp"
#include "rbscore/score_state.hpp"

namespace rbscore {

std::string to_string(EstimatorKind kind) {
  switch (kind) {
    case EstimatorKind::rb: return "rb";
    case EstimatorKind::poyiadjis_n: return "poyiadjis_n";
    case EstimatorKind::poyiadjis_n2: return "poyiadjis_n2";
    case EstimatorKind::fixed_lag: return "fixed_lag";
    case EstimatorKind::kalman: return "kalman";
  }
  return "unknown";
}

EstimatorKind parse_estimator_kind(const std::string& name) {
  if (name == "rb") return EstimatorKind::rb;
  if (name == "poyiadjis_n") return EstimatorKind::poyiadjis_n;
  if (name == "poyiadjis_n2") return EstimatorKind::poyiadjis_n2;
  if (name == "fixed_lag") return EstimatorKind::fixed_lag;
  if (name == "kalman") return EstimatorKind::kalman;
  throw std::invalid_argument("unknown estimator '" + name + "'");
}

namespace {

// Type-erased accumulator over the four particle recursions.
class Accumulator {
 public:
  Accumulator(const AccumulatorSpec& spec, int d, std::size_t n, bool info) : kind_(spec.kind) {
    switch (spec.kind) {
      case EstimatorKind::rb: rb_ = std::make_unique<RbScoreState>(d, n, spec.lambda, info); break;
      case EstimatorKind::poyiadjis_n: path_ = std::make_unique<PathScoreState>(d, n, info); break;
      case EstimatorKind::fixed_lag: lag_ = std::make_unique<FixedLagScoreState>(d, n, spec.lag, info); break;
      case EstimatorKind::poyiadjis_n2: marg_ = std::make_unique<MarginalScoreState>(d, n, info); break;
      case EstimatorKind::kalman: throw std::invalid_argument("kalman cannot share a particle filter");
    }
  }

  bool needs_increments() const { return kind_ != EstimatorKind::poyiadjis_n2; }

  void step(const StateSpaceModel& model, const ParticleSystem* prev, const ParticleSystem& cur, double y,
            const StepIncrements& inc) {
    switch (kind_) {
      case EstimatorKind::rb: rb_->step(cur.ancestors, cur.w, inc); break;
      case EstimatorKind::poyiadjis_n: path_->step(cur.ancestors, cur.w, inc); break;
      case EstimatorKind::fixed_lag: lag_->step(cur.ancestors, cur.w, inc); break;
      case EstimatorKind::poyiadjis_n2: marg_->step(model, prev, cur, y); break;
      case EstimatorKind::kalman: break;
    }
  }

  const Eigen::VectorXd& score() const {
    switch (kind_) {
      case EstimatorKind::rb: return rb_->score();
      case EstimatorKind::poyiadjis_n: return path_->score();
      case EstimatorKind::fixed_lag: return lag_->score();
      default: return marg_->score();
    }
  }

  Eigen::MatrixXd information() const {
    switch (kind_) {
      case EstimatorKind::rb: return rb_->information();
      case EstimatorKind::poyiadjis_n: return path_->information();
      case EstimatorKind::fixed_lag: return lag_->information();
      default: return marg_->information();
    }
  }

 private:
  EstimatorKind kind_;
  std::unique_ptr<RbScoreState> rb_;
  std::unique_ptr<PathScoreState> path_;
  std::unique_ptr<FixedLagScoreState> lag_;
  std::unique_ptr<MarginalScoreState> marg_;
};

TracePoint make_point(int t, const Accumulator& acc, bool info) {
  TracePoint p;
  p.t = t;
  p.score = acc.score();
  if (info) p.info_diag = acc.information().diagonal();
  return p;
}

ScoreEstimate single(const StateSpaceModel& model, std::span<const double> y, std::size_t n,
                     const AccumulatorSpec& spec, RandomStream& rng, bool info, const RunOptions& options,
                     const FilterOptions& filter) {
  auto out = run_shared_filter(model, y, n, std::span<const AccumulatorSpec>(&spec, 1), info, filter, rng, options);
  return std::move(out.front());
}

}  // namespace

std::vector<ScoreEstimate> run_shared_filter(const StateSpaceModel& model, std::span<const double> y,
                                             std::size_t particles, std::span<const AccumulatorSpec> specs,
                                             bool information, const FilterOptions& filter, RandomStream& rng,
                                             const RunOptions& options) {
  if (y.empty()) throw std::invalid_argument("estimator: empty observation sequence");
  if (specs.empty()) throw std::invalid_argument("estimator: no accumulators requested");
  if (options.trace_every < 1) throw std::invalid_argument("estimator: trace_every must be >= 1");
  const int d = model.dim();
  const int T = static_cast<int>(y.size());

  std::vector<Accumulator> accs;
  accs.reserve(specs.size());
  bool need_inc = false;
  for (const auto& s : specs) {
    accs.emplace_back(s, d, particles, information);
    need_inc = need_inc || accs.back().needs_increments();
  }
  std::vector<ScoreEstimate> results(specs.size());

  ParticleSystem prev, cur;
  StepIncrements inc;
  double loglik = 0.0;
  for (int t = 1; t <= T; ++t) {
    const double yt = y[t - 1];
    if (t == 1)
      apf_init(model, yt, particles, rng, cur);
    else
      apf_step(prev, model, yt, rng, filter, cur);
    loglik += cur.loglik_increment;
    const ParticleSystem* before = t == 1 ? nullptr : &prev;
    if (need_inc) compute_increments(model, before, cur, yt, information, inc);
    for (auto& acc : accs) acc.step(model, before, cur, yt, inc);
    if (options.record_trace && (t % options.trace_every == 0 || t == T))
      for (std::size_t a = 0; a < accs.size(); ++a) results[a].trace.push_back(make_point(t, accs[a], information));
    std::swap(prev, cur);
  }

  for (std::size_t a = 0; a < accs.size(); ++a) {
    results[a].score = accs[a].score();
    if (information) results[a].information = accs[a].information();
    results[a].loglik = loglik;
  }
  return results;
}

ScoreEstimate rb_run(const StateSpaceModel& model, std::span<const double> y, std::size_t particles, double lambda,
                     RandomStream& rng, bool information, const RunOptions& options, const FilterOptions& filter) {
  return single(model, y, particles, {EstimatorKind::rb, lambda, 0}, rng, information, options, filter);
}

ScoreEstimate poyiadjis_n_run(const StateSpaceModel& model, std::span<const double> y, std::size_t particles,
                              RandomStream& rng, bool information, const RunOptions& options,
                              const FilterOptions& filter) {
  return single(model, y, particles, {EstimatorKind::poyiadjis_n, 1.0, 0}, rng, information, options, filter);
}

ScoreEstimate poyiadjis_n2_run(const StateSpaceModel& model, std::span<const double> y, std::size_t particles,
                               RandomStream& rng, bool information, const RunOptions& options,
                               const FilterOptions& filter) {
  return single(model, y, particles, {EstimatorKind::poyiadjis_n2, 1.0, 0}, rng, information, options, filter);
}

ScoreEstimate fixed_lag_run(const StateSpaceModel& model, std::span<const double> y, std::size_t particles, int lag,
                            RandomStream& rng, bool information, const RunOptions& options,
                            const FilterOptions& filter) {
  return single(model, y, particles, {EstimatorKind::fixed_lag, 1.0, lag}, rng, information, options, filter);
}

ScoreEstimate kalman_run(const StateSpaceModel& model, std::span<const double> y, const RunOptions& options) {
  const auto* ar1 = dynamic_cast<const Ar1Model*>(&model);
  if (!ar1) throw std::invalid_argument("kalman estimator requires the ar1 model");
  ScoreEstimate out;
  if (!options.record_trace) {
    const KalmanResult r = kalman_score_info(ar1->params(), y);
    out.score = r.score;
    out.information = r.obs_info;
    out.loglik = r.loglik;
    return out;
  }
  if (options.trace_every < 1) throw std::invalid_argument("estimator: trace_every must be >= 1");
  const auto steps = kalman_trace(ar1->params(), y);
  const int T = static_cast<int>(steps.size());
  for (int t = 1; t <= T; ++t) {
    if (t % options.trace_every != 0 && t != T) continue;
    const KalmanStep& s = steps[t - 1];
    out.trace.push_back(TracePoint{t, s.score, s.obs_info.diagonal()});
  }
  out.score = steps.back().score;
  out.information = steps.back().obs_info;
  out.loglik = steps.back().filtered.loglik;
  return out;
}

ScoreEstimate run_estimator(const StateSpaceModel& model, std::span<const double> y, const EstimatorConfig& config,
                            RandomStream& rng, const RunOptions& options) {
  switch (config.kind) {
    case EstimatorKind::rb:
      return rb_run(model, y, config.particles, config.lambda, rng, config.information, options, config.filter);
    case EstimatorKind::poyiadjis_n:
      return poyiadjis_n_run(model, y, config.particles, rng, config.information, options, config.filter);
    case EstimatorKind::poyiadjis_n2:
      return poyiadjis_n2_run(model, y, config.particles, rng, config.information, options, config.filter);
    case EstimatorKind::fixed_lag:
      return fixed_lag_run(model, y, config.particles, config.lag, rng, config.information, options, config.filter);
    case EstimatorKind::kalman: {
      ScoreEstimate r = kalman_run(model, y, options);
      if (!config.information) {
        r.information.resize(0, 0);
        for (auto& p : r.trace) p.info_diag.resize(0);
      }
      return r;
    }
  }
  throw std::invalid_argument("unknown estimator");
}

}  // namespace rbscore
