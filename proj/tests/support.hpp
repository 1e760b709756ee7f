#pragma once

// Independent reference implementations used as test oracles.

#include <cmath>
#include <functional>
#include <numbers>
#include <utility>
#include <vector>

#include <boost/math/distributions/normal.hpp>

#include "mfdc/core.hpp"

namespace oracle {

/// Gaussian upper tail through Boost's normal distribution.
inline double q(double x) {
  return boost::math::cdf(boost::math::complement(boost::math::normal(), x));
}

/// Gauss-Legendre nodes and weights on [-1, 1], Newton iteration on P_n.
inline std::pair<std::vector<double>, std::vector<double>> legendre(int n) {
  std::vector<double> x(static_cast<std::size_t>(n)), w(static_cast<std::size_t>(n));
  for (int i = 0; i < (n + 1) / 2; ++i) {
    double z = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = z;
      for (int k = 2; k <= n; ++k) {
        const double p2 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      if (n == 1) p0 = 1.0;
      dp = n * (z * p1 - p0) / (z * z - 1.0);
      const double dz = p1 / dp;
      z -= dz;
      if (std::abs(dz) < 1e-16) break;
    }
    x[static_cast<std::size_t>(i)] = -z;
    x[static_cast<std::size_t>(n - 1 - i)] = z;
    w[static_cast<std::size_t>(i)] = w[static_cast<std::size_t>(n - 1 - i)] =
        2.0 / ((1.0 - z * z) * dp * dp);
  }
  return {x, w};
}

/// Composite Gauss-Legendre: `panels` equal panels with `order` nodes each.
inline double gauss_legendre(const std::function<double(double)>& f, double a, double b,
                             int panels = 500, int order = 20) {
  static const auto rule = legendre(order);
  const double h = (b - a) / panels;
  double sum = 0.0;
  for (int k = 0; k < panels; ++k) {
    const double mid = a + (k + 0.5) * h;
    for (int i = 0; i < order; ++i)
      sum += rule.second[static_cast<std::size_t>(i)] * f(mid + 0.5 * h * rule.first[static_cast<std::size_t>(i)]);
  }
  return 0.5 * h * sum;
}

/// Detection probability transliterated from the closed form.
inline double pd01(double t, double eps, double ts, double psen, double fs, double pp, double zeta,
                   double xi) {
  const double i = zeta * std::pow(psen, xi);
  const double g = pp / (1.0 + i);
  const double a = (ts - t) / ts;
  return q((eps / (1.0 + i) - a * g - 1.0) * std::sqrt(fs * ts) / std::sqrt(a * (g + 1) * (g + 1) + t / ts));
}

inline double pf00(double eps, double ts, double psen, double fs, double zeta, double xi) {
  const double i = zeta * std::pow(psen, xi);
  return q((eps / (1.0 + i) - 1.0) * std::sqrt(fs * ts));
}

/// Binomial coefficient by the product formula.
inline double choose(int n, int k) {
  double r = 1.0;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

inline mfdc::Scenario two_channel(int n_sus = 10) {
  mfdc::Scenario s;
  s.num_sus = n_sus;
  s.channels = {mfdc::ChannelModel{0.5, 0.05, 0.01}, mfdc::ChannelModel{1.0, 0.1, 0.01}};
  s.selection_probs = {0.5, 0.5};
  return s;
}

} // namespace oracle
