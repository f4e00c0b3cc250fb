#include <cmath>
#include <stdexcept>

#include "rbscore/estimators.hpp"

namespace rbscore {

std::size_t ShrinkageCoeffTable::index(int k, int u, int s) const {
  if (k < 1 || k > horizon || u < 1 || u > horizon || s < 1 || s > horizon)
    throw std::out_of_range("shrinkage_coeffs index out of range");
  const auto h = static_cast<std::size_t>(horizon);
  return (static_cast<std::size_t>(k - 1) * h + static_cast<std::size_t>(u - 1)) * h + static_cast<std::size_t>(s - 1);
}

ShrinkageCoeffTable shrinkage_coeffs(double lambda, int horizon) {
  if (!(lambda > 0.0 && lambda < 1.0)) throw std::invalid_argument("shrinkage_coeffs: lambda must lie in (0, 1)");
  if (horizon < 1 || horizon > 20) throw std::invalid_argument("shrinkage_coeffs: horizon must lie in [1, 20]");
  ShrinkageCoeffTable tab;
  tab.lambda = lambda;
  tab.horizon = horizon;
  const auto h = static_cast<std::size_t>(horizon);
  tab.recursion.assign(h * h * h, 0.0);
  tab.closed_form.assign(h * h * h, 0.0);

  for (int k = 1; k <= horizon; ++k) {
    for (int u = 1; u <= k; ++u) {
      // Fresh increment at s = k: weight lambda^{k-u}, built by repeated shrinkage.
      tab.recursion[tab.index(k, u, k)] = u == k ? 1.0 : lambda * tab.recursion[tab.index(k - 1, u, k - 1)];
      for (int s = u; s < k; ++s) {
        double acc = 0.0;
        for (int j = s; j <= k - 1; ++j)
          acc += (1.0 - lambda) * std::pow(lambda, k - j - 1) * tab.recursion[tab.index(j, u, s)];
        tab.recursion[tab.index(k, u, s)] = acc;
      }
      for (int s = u; s <= k; ++s) {
        const double base = std::pow(lambda, s - u);
        tab.closed_form[tab.index(k, u, s)] = s == k ? base : (1.0 - lambda) * base;
      }
    }
  }
  return tab;
}

}  // namespace rbscore
