#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

namespace metagen {

// Monte Carlo mean with its standard error.
struct MeanSE {
  double mean = 0.0;
  double se = 0.0;
  long n = 0;
};

// Fixed-order reduction over per-trial values; gives identical results no
// matter how the values were produced (serially or by a worker pool).
inline MeanSE mean_se(const std::vector<double>& values) {
  MeanSE out;
  out.n = static_cast<long>(values.size());
  if (out.n == 0) return out;
  double sum = 0.0;
  for (double v : values) sum += v;
  out.mean = sum / static_cast<double>(out.n);
  if (out.n < 2) return out;
  double ss = 0.0;
  for (double v : values) {
    const double d = v - out.mean;
    ss += d * d;
  }
  const double var = ss / static_cast<double>(out.n - 1);
  out.se = std::sqrt(var / static_cast<double>(out.n));
  return out;
}

// mean +- combined se for a difference of two independent estimates
inline double combined_se(double se_a, double se_b) {
  return std::sqrt(se_a * se_a + se_b * se_b);
}

}  // namespace metagen
