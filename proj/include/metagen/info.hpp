#pragma once

#include <Eigen/Dense>
#include <utility>
#include <vector>

#include "metagen/errors.hpp"

namespace metagen {

// All information quantities are in nats, with the 0*ln(0) = 0 convention.

// Probability vector over a finite support.
struct DiscreteDistribution {
  std::vector<double> probs;

  DiscreteDistribution() = default;
  // Validates: entries >= 0, sum within 1e-12 of 1, support size >= 1.
  explicit DiscreteDistribution(std::vector<double> p);

  static DiscreteDistribution uniform(std::size_t k);
  // Normalizes nonnegative weights (sum must be > 0).
  static DiscreteDistribution from_weights(const std::vector<double>& w);

  std::size_t size() const { return probs.size(); }
  double operator[](std::size_t i) const { return probs[i]; }
};

// Joint probability table over a product of two finite supports.
struct JointTable {
  Eigen::MatrixXd mass;  // |X| x |Y|, entries >= 0, total mass 1 within 1e-12

  JointTable() = default;
  explicit JointTable(Eigen::MatrixXd m);

  std::vector<double> x_marginal() const;  // row sums
  std::vector<double> y_marginal() const;  // column sums
};

struct CovarianceEstimate {
  Eigen::MatrixXd matrix;  // symmetric within 1e-10
  long sample_count = 0;
};

// D(p || q) = sum_i p_i ln(p_i / q_i). Throws AbsoluteContinuityViolation if
// some p_i > 0 has q_i = 0.
double kl_discrete(const DiscreteDistribution& p, const DiscreteDistribution& q);

// I(X;Y) = D(joint || product of marginals), >= 0.
double mutual_information(const JointTable& joint);

// I(X;Y|Z) = sum_z w_z I(X;Y | Z=z) for a weighted family of conditionals.
double conditional_mutual_information(const std::vector<std::pair<double, JointTable>>& family);

// Donsker-Varadhan witness value E_p[f] - ln E_q[e^f]; always <= D(p || q),
// with equality at f = ln(p/q).
double dv_gap(const DiscreteDistribution& p, const DiscreteDistribution& q,
              const std::vector<double>& f);

// (d/2) ln(2 pi e) + (1/2) ln det(cov). Cholesky with diagonal jitter 1e-9 on
// failure; SingularCovariance if the jittered factorization still fails.
double gaussian_entropy(const CovarianceEstimate& cov);

// ln det(scale * cov + I); >= 0 for PSD cov, monotone nondecreasing in scale.
double log_det_ratio_term(double scale, const CovarianceEstimate& cov);

// Unbiased sample covariance of the rows (k-1 divisor); k >= 2 rows required.
CovarianceEstimate sample_covariance(const Eigen::MatrixXd& samples);

// Plug-in mutual information between a +-1 sign and an equal-width-binned
// scalar; in [0, ln 2]. A constant scalar column collapses to one bin (MI 0).
double binned_mi_binary(const std::vector<std::pair<int, double>>& pairs, int bins);

}  // namespace metagen
