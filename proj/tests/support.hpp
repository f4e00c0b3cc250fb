#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include <Eigen/Dense>

namespace testing {

// Central differences of a scalar function.
inline Eigen::VectorXd fd_gradient(const std::function<double(const Eigen::VectorXd&)>& f, const Eigen::VectorXd& x) {
  Eigen::VectorXd g(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double h = 1e-5 * std::max(1.0, std::abs(x[i]));
    Eigen::VectorXd a = x, b = x;
    a[i] += h;
    b[i] -= h;
    g[i] = (f(a) - f(b)) / (2.0 * h);
  }
  return g;
}

// Central differences of a vector function; column j holds d f / d x_j.
inline Eigen::MatrixXd fd_jacobian(const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& f,
                                   const Eigen::VectorXd& x) {
  const Eigen::VectorXd f0 = f(x);
  Eigen::MatrixXd j(f0.size(), x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double h = 1e-5 * std::max(1.0, std::abs(x[i]));
    Eigen::VectorXd a = x, b = x;
    a[i] += h;
    b[i] -= h;
    j.col(i) = (f(a) - f(b)) / (2.0 * h);
  }
  return j;
}

// max_i |a_i - b_i| / max(1, |b_i|)
inline double rel_error(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  double worst = 0.0;
  for (Eigen::Index i = 0; i < a.size(); ++i)
    worst = std::max(worst, std::abs(a.data()[i] - b.data()[i]) / std::max(1.0, std::abs(b.data()[i])));
  return worst;
}

inline double mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

inline double variance(const std::vector<double>& v) {
  const double m = mean(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return s / static_cast<double>(v.size() - 1);
}

// Nelder-Mead simplex maximizer, used as an optimizer independent of any
// derivative code.
inline Eigen::VectorXd nelder_mead_max(const std::function<double(const Eigen::VectorXd&)>& f, Eigen::VectorXd x0,
                                       double step, int iterations) {
  const Eigen::Index d = x0.size();
  std::vector<Eigen::VectorXd> pts{x0};
  for (Eigen::Index i = 0; i < d; ++i) {
    Eigen::VectorXd p = x0;
    p[i] += step;
    pts.push_back(p);
  }
  std::vector<double> val;
  for (const auto& p : pts) val.push_back(-f(p));
  for (int it = 0; it < iterations; ++it) {
    std::vector<std::size_t> order(pts.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return val[a] < val[b]; });
    std::vector<Eigen::VectorXd> p2;
    std::vector<double> v2;
    for (auto i : order) {
      p2.push_back(pts[i]);
      v2.push_back(val[i]);
    }
    pts = p2;
    val = v2;
    Eigen::VectorXd c = Eigen::VectorXd::Zero(d);
    for (Eigen::Index i = 0; i < d; ++i) c += pts[i];
    c /= static_cast<double>(d);
    const Eigen::VectorXd xr = c + (c - pts.back());
    const double fr = -f(xr);
    if (fr < val.front()) {
      const Eigen::VectorXd xe = c + 2.0 * (c - pts.back());
      const double fe = -f(xe);
      if (fe < fr) {
        pts.back() = xe;
        val.back() = fe;
      } else {
        pts.back() = xr;
        val.back() = fr;
      }
    } else if (fr < val[d - 1]) {
      pts.back() = xr;
      val.back() = fr;
    } else {
      const Eigen::VectorXd xc = c + 0.5 * (pts.back() - c);
      const double fc = -f(xc);
      if (fc < val.back()) {
        pts.back() = xc;
        val.back() = fc;
      } else {
        for (std::size_t i = 1; i < pts.size(); ++i) {
          pts[i] = pts[0] + 0.5 * (pts[i] - pts[0]);
          val[i] = -f(pts[i]);
        }
      }
    }
  }
  std::size_t best = 0;
  for (std::size_t i = 1; i < pts.size(); ++i)
    if (val[i] < val[best]) best = i;
  return pts[best];
}

}  // namespace testing
