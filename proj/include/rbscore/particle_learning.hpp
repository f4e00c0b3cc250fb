#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <vector>

#include "rbscore/rng.hpp"

namespace rbscore {

// Conjugate statistics for AR(1) plus noise:
//   phi | sigma^2 ~ N(p, sigma^2 q),  sigma^2 ~ IG(a/2, b/2),  tau^2 ~ IG(c/2, d/2).
struct SuffStats {
  double p = 0.6;
  double q = 1.0;
  double a = 5.0;
  double b = 3.5;
  double c = 5.0;
  double d = 5.0;

  bool valid() const { return q > 0.0 && a > 0.0 && b > 0.0 && c > 0.0 && d > 0.0; }
  double phi_mean() const { return p; }
  double sigma2_mean() const { return b / (a - 2.0); }
  double tau2_mean() const { return d / (c - 2.0); }
};

// literal: q^-1 accumulates x_t^2. textbook: q^-1 accumulates the regressor
// x_{t-1}^2, the standard conjugate AR(1) regression.
enum class PlUpdate { literal, textbook };

SuffStats pl_update_stats(const SuffStats& s, double x_prev, double x, double y,
                          PlUpdate mode = PlUpdate::literal);

struct PlSummary {
  int t = 0;
  double phi_mean = 0.0;
  double sigma2_mean = 0.0;
  double tau2_mean = 0.0;
};

struct PlResult {
  std::vector<PlSummary> summaries;  // t = 0..T, t = 0 holds the prior means
  std::vector<std::size_t> distinct_lineages;  // founders still alive after step t, t = 0..T
};

struct PlOptions {
  std::size_t particles = 1000;
  SuffStats prior;
  PlUpdate mode = PlUpdate::literal;
};

// Particle learning: each particle carries x, its statistics and a parameter
// draw. Per step: propagate x_t ~ N(phi x_{t-1}, sigma^2) from x_0 = 0, weight
// by N(y_t | x_t, tau^2), update statistics, resample, redraw parameters.
PlResult pl_run(std::span<const double> y, const PlOptions& options, RandomStream& rng);

// `t,phi_mean,sigma2_mean,tau2_mean`
void write_pl_csv(const PlResult& result, std::ostream& out);

}  // namespace rbscore
