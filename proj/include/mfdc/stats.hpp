#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>

namespace mfdc::stats {

/// Streaming mean/variance (Welford).
class Accumulator {
 public:
  void add(double x) {
    ++n_;
    const double d = x - mean_;
    mean_ += d / static_cast<double>(n_);
    m2_ += d * (x - mean_);
  }
  std::uint64_t count() const { return n_; }
  double mean() const { return mean_; }
  double variance() const { return n_ > 1 ? m2_ / static_cast<double>(n_ - 1) : 0.0; }
  double std_error() const {
    return n_ > 1 ? std::sqrt(variance() / static_cast<double>(n_)) : 0.0;
  }

 private:
  std::uint64_t n_ = 0;
  double mean_ = 0.0;
  double m2_ = 0.0;
};

/// Two-sided normal critical value, e.g. 2.5758 for 0.99.
inline double normal_critical(double confidence) {
  return boost::math::quantile(boost::math::normal(), 0.5 + 0.5 * confidence);
}

inline double student_critical(double confidence, double dof) {
  return boost::math::quantile(boost::math::students_t(dof), 0.5 + 0.5 * confidence);
}

struct Interval {
  double mean = 0.0;
  double half_width = 0.0;

  bool contains(double x) const { return std::abs(x - mean) <= half_width; }
};

/// Student-t interval over independent batch means.
inline Interval batch_means(const std::vector<double>& batches, double confidence = 0.95) {
  Accumulator acc;
  for (double b : batches) acc.add(b);
  Interval r{acc.mean(), 0.0};
  if (batches.size() >= 2)
    r.half_width = student_critical(confidence, static_cast<double>(batches.size() - 1)) *
                   acc.std_error();
  return r;
}

} // namespace mfdc::stats
