#include "rbscore/score_state.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace rbscore {

namespace {

void check_sizes(std::size_t n, int d, std::span<const int> ancestors, std::span<const double> weights,
                 const StepIncrements& inc, bool need_hessian) {
  if (ancestors.size() != n || weights.size() != n || inc.particles != n)
    throw std::invalid_argument("score state: particle count mismatch");
  if (inc.dim != d) throw std::invalid_argument("score state: parameter dimension mismatch");
  if (need_hessian && !inc.has_hessian) throw std::invalid_argument("score state: increments lack Hessians");
}

// S S^T - sum_i w_i (a_i a_i^T + b_i)
Eigen::MatrixXd louis(int d, std::size_t n, const Eigen::VectorXd& s, const std::vector<double>& a,
                      const std::vector<double>& b, const std::vector<double>& w) {
  const std::size_t dd = static_cast<std::size_t>(d) * d;
  std::vector<double> acc(dd, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double* ai = a.data() + i * d;
    const double* bi = b.data() + i * dd;
    for (int r = 0; r < d; ++r)
      for (int c = 0; c < d; ++c) acc[r * d + c] += w[i] * (ai[r] * ai[c] + bi[r * d + c]);
  }
  Eigen::MatrixXd out(d, d);
  for (int r = 0; r < d; ++r)
    for (int c = 0; c < d; ++c) out(r, c) = s[r] * s[c] - acc[r * d + c];
  return out;
}

}  // namespace

void StepIncrements::resize(int d, std::size_t n, bool with_hessian) {
  dim = d;
  particles = n;
  has_hessian = with_hessian;
  grad.resize(n * d);
  hess.resize(with_hessian ? n * d * d : 0);
}

void compute_increments(const StateSpaceModel& model, const ParticleSystem* prev, const ParticleSystem& cur,
                        double y, bool with_hessian, StepIncrements& out) {
  const int d = model.dim();
  const std::size_t n = cur.size();
  const std::size_t dd = static_cast<std::size_t>(d) * d;
  out.resize(d, n, with_hessian);
  std::vector<double> tmp(std::max<std::size_t>(dd, d));
  const int t = cur.t;
  for (std::size_t i = 0; i < n; ++i) {
    std::span<double> g(out.grad.data() + i * d, d);
    model.grad_log_g(y, cur.x[i], t, g);
    std::span<double> tg(tmp.data(), d);
    if (prev)
      model.grad_log_f(cur.x[i], prev->x[cur.ancestors[i]], tg);
    else
      model.grad_log_init(cur.x[i], tg);
    for (int a = 0; a < d; ++a) g[a] += tg[a];
    if (with_hessian) {
      std::span<double> h(out.hess.data() + i * dd, dd);
      model.hess_log_g(y, cur.x[i], t, h);
      std::span<double> th(tmp.data(), dd);
      if (prev)
        model.hess_log_f(cur.x[i], prev->x[cur.ancestors[i]], th);
      else
        model.hess_log_init(cur.x[i], th);
      for (std::size_t a = 0; a < dd; ++a) h[a] += th[a];
    }
  }
}

// ---------------------------------------------------------------------------

RbScoreState::RbScoreState(int dim, std::size_t particles, double lambda, bool with_information)
    : dim_(dim), n_(particles), lambda_(lambda), h2_(1.0 - lambda * lambda), info_(with_information) {
  if (!(lambda > 0.0 && lambda <= 1.0)) throw std::invalid_argument("shrinkage lambda must lie in (0, 1]");
  if (dim < 1 || particles < 1) throw std::invalid_argument("score state: empty dimensions");
  m_.assign(n_ * dim_, 0.0);
  m_next_.assign(n_ * dim_, 0.0);
  if (info_) {
    nmat_.assign(n_ * dim_ * dim_, 0.0);
    nmat_next_.assign(n_ * dim_ * dim_, 0.0);
  }
  w_.assign(n_, 1.0 / static_cast<double>(n_));
  score_ = Eigen::VectorXd::Zero(dim_);
  mean_hessian_ = Eigen::MatrixXd::Zero(dim_, dim_);
  shrink_var_ = Eigen::MatrixXd::Zero(dim_, dim_);
}

void RbScoreState::step(std::span<const int> ancestors, std::span<const double> weights,
                        const StepIncrements& inc) {
  check_sizes(n_, dim_, ancestors, weights, inc, info_);
  const int d = dim_;
  const std::size_t dd = static_cast<std::size_t>(d) * d;

  if (info_) {
    // Spread of the previous generation's means about S_{t-1}.
    for (std::size_t i = 0; i < n_; ++i) {
      const double* mi = m_.data() + i * d;
      for (int r = 0; r < d; ++r)
        for (int c = 0; c < d; ++c)
          shrink_var_(r, c) += w_[i] * ((mi[r] - score_[r]) * (mi[c] - score_[c]));
    }
  }

  const double keep = lambda_;
  const double pull = 1.0 - lambda_;
  for (std::size_t i = 0; i < n_; ++i) {
    const double* mk = m_.data() + static_cast<std::size_t>(ancestors[i]) * d;
    const double* gi = inc.grad.data() + i * d;
    double* out = m_next_.data() + i * d;
    for (int a = 0; a < d; ++a) out[a] = keep * mk[a] + pull * score_[a] + gi[a];
  }
  if (info_) {
    for (std::size_t i = 0; i < n_; ++i) {
      const double* nk = nmat_.data() + static_cast<std::size_t>(ancestors[i]) * dd;
      const double* hi = inc.hess.data() + i * dd;
      double* out = nmat_next_.data() + i * dd;
      for (int r = 0; r < d; ++r)
        for (int c = 0; c < d; ++c)
          out[r * d + c] = keep * nk[r * d + c] + pull * mean_hessian_(r, c) + hi[r * d + c];
    }
    std::swap(nmat_, nmat_next_);
  }
  std::swap(m_, m_next_);
  std::copy(weights.begin(), weights.end(), w_.begin());

  score_.setZero();
  for (std::size_t i = 0; i < n_; ++i)
    for (int a = 0; a < d; ++a) score_[a] += w_[i] * m_[i * d + a];
  if (info_) {
    mean_hessian_.setZero();
    for (std::size_t i = 0; i < n_; ++i)
      for (int r = 0; r < d; ++r)
        for (int c = 0; c < d; ++c) mean_hessian_(r, c) += w_[i] * nmat_[i * dd + r * d + c];
  }
  ++t_;
}

Eigen::MatrixXd RbScoreState::information() const {
  if (!info_) throw std::logic_error("information not tracked");
  Eigen::MatrixXd out = louis(dim_, n_, score_, m_, nmat_, w_);
  for (int r = 0; r < dim_; ++r)
    for (int c = 0; c < dim_; ++c) out(r, c) = out(r, c) - h2_ * shrink_var_(r, c);
  return out;
}

Eigen::MatrixXd RbScoreState::information_inside_sum() const {
  if (!info_) throw std::logic_error("information not tracked");
  const int d = dim_;
  const std::size_t dd = static_cast<std::size_t>(d) * d;
  Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(d, d);
  for (std::size_t i = 0; i < n_; ++i)
    for (int r = 0; r < d; ++r)
      for (int c = 0; c < d; ++c)
        acc(r, c) += w_[i] * (m_[i * d + r] * m_[i * d + c] + h2_ * shrink_var_(r, c) + nmat_[i * dd + r * d + c]);
  return score_ * score_.transpose() - acc;
}

// ---------------------------------------------------------------------------

PathScoreState::PathScoreState(int dim, std::size_t particles, bool with_information)
    : dim_(dim), n_(particles), info_(with_information) {
  if (dim < 1 || particles < 1) throw std::invalid_argument("score state: empty dimensions");
  a_.assign(n_ * dim_, 0.0);
  a_next_.assign(n_ * dim_, 0.0);
  if (info_) {
    b_.assign(n_ * dim_ * dim_, 0.0);
    b_next_.assign(n_ * dim_ * dim_, 0.0);
  }
  w_.assign(n_, 1.0 / static_cast<double>(n_));
  score_ = Eigen::VectorXd::Zero(dim_);
}

void PathScoreState::step(std::span<const int> ancestors, std::span<const double> weights,
                          const StepIncrements& inc) {
  check_sizes(n_, dim_, ancestors, weights, inc, info_);
  const int d = dim_;
  const std::size_t dd = static_cast<std::size_t>(d) * d;
  for (std::size_t i = 0; i < n_; ++i) {
    const double* ak = a_.data() + static_cast<std::size_t>(ancestors[i]) * d;
    const double* gi = inc.grad.data() + i * d;
    double* out = a_next_.data() + i * d;
    for (int a = 0; a < d; ++a) out[a] = ak[a] + gi[a];
  }
  if (info_) {
    for (std::size_t i = 0; i < n_; ++i) {
      const double* bk = b_.data() + static_cast<std::size_t>(ancestors[i]) * dd;
      const double* hi = inc.hess.data() + i * dd;
      double* out = b_next_.data() + i * dd;
      for (std::size_t a = 0; a < dd; ++a) out[a] = bk[a] + hi[a];
    }
    std::swap(b_, b_next_);
  }
  std::swap(a_, a_next_);
  std::copy(weights.begin(), weights.end(), w_.begin());
  score_.setZero();
  for (std::size_t i = 0; i < n_; ++i)
    for (int a = 0; a < d; ++a) score_[a] += w_[i] * a_[i * d + a];
}

Eigen::MatrixXd PathScoreState::information() const {
  if (!info_) throw std::logic_error("information not tracked");
  return louis(dim_, n_, score_, a_, b_, w_);
}

// ---------------------------------------------------------------------------

FixedLagScoreState::FixedLagScoreState(int dim, std::size_t particles, int lag, bool with_information)
    : dim_(dim), n_(particles), lag_(lag), info_(with_information) {
  if (lag < 1) throw std::invalid_argument("fixed lag must be >= 1");
  if (dim < 1 || particles < 1) throw std::invalid_argument("score state: empty dimensions");
  a_.assign(n_ * dim_, 0.0);
  a_next_.assign(n_ * dim_, 0.0);
  if (info_) {
    b_.assign(n_ * dim_ * dim_, 0.0);
    b_next_.assign(n_ * dim_ * dim_, 0.0);
  }
  w_.assign(n_, 1.0 / static_cast<double>(n_));
  frozen_grad_.assign(dim_, 0.0);
  frozen_hess_.assign(static_cast<std::size_t>(dim_) * dim_, 0.0);
  trace_.resize(n_);
  score_ = Eigen::VectorXd::Zero(dim_);
}

void FixedLagScoreState::step(std::span<const int> ancestors, std::span<const double> weights,
                              const StepIncrements& inc) {
  check_sizes(n_, dim_, ancestors, weights, inc, info_);
  const int d = dim_;
  const std::size_t dd = static_cast<std::size_t>(d) * d;

  for (std::size_t i = 0; i < n_; ++i) {
    const double* ak = a_.data() + static_cast<std::size_t>(ancestors[i]) * d;
    const double* gi = inc.grad.data() + i * d;
    double* out = a_next_.data() + i * d;
    for (int a = 0; a < d; ++a) out[a] = ak[a] + gi[a];
  }
  if (info_) {
    for (std::size_t i = 0; i < n_; ++i) {
      const double* bk = b_.data() + static_cast<std::size_t>(ancestors[i]) * dd;
      const double* hi = inc.hess.data() + i * dd;
      double* out = b_next_.data() + i * dd;
      for (std::size_t a = 0; a < dd; ++a) out[a] = bk[a] + hi[a];
    }
    std::swap(b_, b_next_);
  }
  std::swap(a_, a_next_);
  std::copy(weights.begin(), weights.end(), w_.begin());

  window_.push_back(Generation{std::vector<int>(ancestors.begin(), ancestors.end()), inc.grad,
                               info_ ? inc.hess : std::vector<double>{}});

  if (window_.size() > static_cast<std::size_t>(lag_)) {
    // Freeze the oldest generation s = t - L with the time-t weights.
    for (std::size_t i = 0; i < n_; ++i) {
      int j = static_cast<int>(i);
      for (std::size_t g = window_.size() - 1; g >= 1; --g) j = window_[g].ancestors[j];
      trace_[i] = j;
    }
    const Generation& oldest = window_.front();
    for (std::size_t i = 0; i < n_; ++i) {
      const double* phi = oldest.grad.data() + static_cast<std::size_t>(trace_[i]) * d;
      double* ai = a_.data() + i * d;
      for (int a = 0; a < d; ++a) {
        frozen_grad_[a] += w_[i] * phi[a];
        ai[a] -= phi[a];
      }
      if (info_) {
        const double* psi = oldest.hess.data() + static_cast<std::size_t>(trace_[i]) * dd;
        double* bi = b_.data() + i * dd;
        for (std::size_t a = 0; a < dd; ++a) {
          frozen_hess_[a] += w_[i] * psi[a];
          bi[a] -= psi[a];
        }
      }
    }
    window_.pop_front();
  }

  for (int a = 0; a < d; ++a) score_[a] = frozen_grad_[a];
  for (std::size_t i = 0; i < n_; ++i)
    for (int a = 0; a < d; ++a) score_[a] += w_[i] * a_[i * d + a];
}

Eigen::MatrixXd FixedLagScoreState::information() const {
  if (!info_) throw std::logic_error("information not tracked");
  const int d = dim_;
  const std::size_t dd = static_cast<std::size_t>(d) * d;
  std::vector<double> alpha(n_ * d), beta(n_ * dd);
  for (std::size_t i = 0; i < n_; ++i) {
    for (int a = 0; a < d; ++a) alpha[i * d + a] = frozen_grad_[a] + a_[i * d + a];
    for (std::size_t a = 0; a < dd; ++a) beta[i * dd + a] = frozen_hess_[a] + b_[i * dd + a];
  }
  return louis(d, n_, score_, alpha, beta, w_);
}

// ---------------------------------------------------------------------------

MarginalScoreState::MarginalScoreState(int dim, std::size_t particles, bool with_information)
    : dim_(dim), n_(particles), info_(with_information) {
  if (dim < 1 || particles < 1) throw std::invalid_argument("score state: empty dimensions");
  const std::size_t dd = static_cast<std::size_t>(dim) * dim;
  a_.assign(n_ * dim_, 0.0);
  a_next_.assign(n_ * dim_, 0.0);
  if (info_) {
    g_.assign(n_ * dd, 0.0);
    g_next_.assign(n_ * dd, 0.0);
  }
  w_.assign(n_, 1.0 / static_cast<double>(n_));
  log_bw_.resize(n_);
  grad_g_.resize(dim_);
  hess_g_.resize(dd);
  grad_f_.resize(dim_);
  hess_f_.resize(dd);
  phi_.resize(dim_);
  score_ = Eigen::VectorXd::Zero(dim_);
}

void MarginalScoreState::step(const StateSpaceModel& model, const ParticleSystem* prev,
                              const ParticleSystem& cur, double y) {
  if (cur.size() != n_ || (prev && prev->size() != n_))
    throw std::invalid_argument("score state: particle count mismatch");
  if (model.dim() != dim_) throw std::invalid_argument("score state: parameter dimension mismatch");
  const int d = dim_;
  const std::size_t dd = static_cast<std::size_t>(d) * d;
  const int t = cur.t;

  for (std::size_t i = 0; i < n_; ++i) {
    const double xi = cur.x[i];
    model.grad_log_g(y, xi, t, grad_g_);
    if (info_) model.hess_log_g(y, xi, t, hess_g_);
    double* ai = a_next_.data() + i * d;
    double* gi = info_ ? g_next_.data() + i * dd : nullptr;

    if (!prev) {
      model.grad_log_init(xi, grad_f_);
      for (int a = 0; a < d; ++a) ai[a] = grad_g_[a] + grad_f_[a];
      if (info_) {
        model.hess_log_init(xi, hess_f_);
        for (int r = 0; r < d; ++r)
          for (int c = 0; c < d; ++c) gi[r * d + c] = ai[r] * ai[c] + hess_g_[r * d + c] + hess_f_[r * d + c];
      }
      continue;
    }

    // Backward weights over the previous generation.
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < n_; ++j) {
      log_bw_[j] = prev->log_w[j] + model.trans_logpdf(xi, prev->x[j]);
      if (log_bw_[j] > mx) mx = log_bw_[j];
    }
    if (!std::isfinite(mx)) throw DegenerateFilterError("marginal recursion: no admissible predecessor");
    double total = 0.0;
    for (std::size_t j = 0; j < n_; ++j) {
      log_bw_[j] = std::exp(log_bw_[j] - mx);
      total += log_bw_[j];
    }

    std::fill(ai, ai + d, 0.0);
    if (info_) std::fill(gi, gi + dd, 0.0);
    for (std::size_t j = 0; j < n_; ++j) {
      const double bw = log_bw_[j] / total;
      if (bw == 0.0) continue;
      const double* aj = a_.data() + j * d;
      model.grad_log_f(xi, prev->x[j], grad_f_);
      for (int a = 0; a < d; ++a) {
        phi_[a] = grad_g_[a] + grad_f_[a];
        ai[a] += bw * (aj[a] + phi_[a]);
      }
      if (info_) {
        model.hess_log_f(xi, prev->x[j], hess_f_);
        const double* gj = g_.data() + j * dd;
        for (int r = 0; r < d; ++r)
          for (int c = 0; c < d; ++c)
            gi[r * d + c] += bw * (gj[r * d + c] + aj[r] * phi_[c] + phi_[r] * aj[c] + phi_[r] * phi_[c] +
                                   hess_g_[r * d + c] + hess_f_[r * d + c]);
      }
    }
  }
  std::swap(a_, a_next_);
  if (info_) std::swap(g_, g_next_);
  std::copy(cur.w.begin(), cur.w.end(), w_.begin());
  score_.setZero();
  for (std::size_t i = 0; i < n_; ++i)
    for (int a = 0; a < d; ++a) score_[a] += w_[i] * a_[i * d + a];
}

Eigen::MatrixXd MarginalScoreState::information() const {
  if (!info_) throw std::logic_error("information not tracked");
  const int d = dim_;
  const std::size_t dd = static_cast<std::size_t>(d) * d;
  Eigen::MatrixXd out = score_ * score_.transpose();
  for (std::size_t i = 0; i < n_; ++i)
    for (int r = 0; r < d; ++r)
      for (int c = 0; c < d; ++c) out(r, c) -= w_[i] * g_[i * dd + r * d + c];
  return out;
}

}  // namespace rbscore
