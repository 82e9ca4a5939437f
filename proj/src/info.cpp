#include "metagen/info.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace metagen {

namespace {

constexpr double kMassTolerance = 1e-12;

// clamp away the epsilon-negative results rounding can leave on quantities
// that are nonnegative by definition
double clamp_nonneg(double v) { return (v < 0.0 && v > -1e-9) ? 0.0 : v; }

}  // namespace

DiscreteDistribution::DiscreteDistribution(std::vector<double> p) : probs(std::move(p)) {
  if (probs.empty()) throw std::invalid_argument("DiscreteDistribution: empty support");
  double sum = 0.0;
  for (double x : probs) {
    if (!(x >= 0.0)) throw std::invalid_argument("DiscreteDistribution: negative entry");
    sum += x;
  }
  if (std::abs(sum - 1.0) > kMassTolerance)
    throw std::invalid_argument("DiscreteDistribution: mass " + std::to_string(sum) +
                                " not within 1e-12 of 1");
}

DiscreteDistribution DiscreteDistribution::uniform(std::size_t k) {
  DiscreteDistribution d;
  d.probs.assign(k, 1.0 / static_cast<double>(k));
  return d;
}

DiscreteDistribution DiscreteDistribution::from_weights(const std::vector<double>& w) {
  if (w.empty()) throw std::invalid_argument("from_weights: empty support");
  double sum = 0.0;
  for (double x : w) {
    if (!(x >= 0.0)) throw std::invalid_argument("from_weights: negative weight");
    sum += x;
  }
  if (sum <= 0.0) throw std::invalid_argument("from_weights: zero total weight");
  DiscreteDistribution d;
  d.probs.resize(w.size());
  for (std::size_t i = 0; i < w.size(); ++i) d.probs[i] = w[i] / sum;
  return d;
}

JointTable::JointTable(Eigen::MatrixXd m) : mass(std::move(m)) {
  if (mass.size() == 0) throw std::invalid_argument("JointTable: empty table");
  if ((mass.array() < 0.0).any()) throw std::invalid_argument("JointTable: negative entry");
  const double total = mass.sum();
  if (std::abs(total - 1.0) > kMassTolerance)
    throw std::invalid_argument("JointTable: mass " + std::to_string(total) +
                                " not within 1e-12 of 1");
}

std::vector<double> JointTable::x_marginal() const {
  std::vector<double> out(mass.rows());
  for (Eigen::Index i = 0; i < mass.rows(); ++i) out[i] = mass.row(i).sum();
  return out;
}

std::vector<double> JointTable::y_marginal() const {
  std::vector<double> out(mass.cols());
  for (Eigen::Index j = 0; j < mass.cols(); ++j) out[j] = mass.col(j).sum();
  return out;
}

double kl_discrete(const DiscreteDistribution& p, const DiscreteDistribution& q) {
  if (p.size() != q.size()) throw DimensionMismatch("kl_discrete: support sizes differ");
  double sum = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] == 0.0) continue;
    if (q[i] == 0.0)
      throw AbsoluteContinuityViolation("kl_discrete: p has mass where q vanishes (index " +
                                        std::to_string(i) + ")");
    sum += p[i] * std::log(p[i] / q[i]);
  }
  return clamp_nonneg(sum);
}

double mutual_information(const JointTable& joint) {
  const auto px = joint.x_marginal();
  const auto py = joint.y_marginal();
  double total = 0.0;
  for (Eigen::Index i = 0; i < joint.mass.rows(); ++i) {
    for (Eigen::Index j = 0; j < joint.mass.cols(); ++j) {
      const double m = joint.mass(i, j);
      if (m == 0.0) continue;
      total += m * std::log(m / (px[i] * py[j]));
    }
  }
  return clamp_nonneg(total);
}

double conditional_mutual_information(
    const std::vector<std::pair<double, JointTable>>& family) {
  std::vector<double> w;
  w.reserve(family.size());
  for (const auto& [weight, table] : family) w.push_back(weight);
  DiscreteDistribution conditioning(w);  // validates the weights
  double total = 0.0;
  for (std::size_t z = 0; z < family.size(); ++z) {
    if (family[z].first == 0.0) continue;
    total += family[z].first * mutual_information(family[z].second);
  }
  return clamp_nonneg(total);
}

double dv_gap(const DiscreteDistribution& p, const DiscreteDistribution& q,
              const std::vector<double>& f) {
  if (p.size() != q.size() || f.size() != p.size())
    throw DimensionMismatch("dv_gap: support sizes differ");
  double mean_p = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] == 0.0) continue;
    if (q[i] == 0.0)
      throw AbsoluteContinuityViolation("dv_gap: p has mass where q vanishes");
    if (!std::isfinite(f[i])) throw std::invalid_argument("dv_gap: witness not finite on support");
    mean_p += p[i] * f[i];
  }
  // log-sum-exp over the q support
  double fmax = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < q.size(); ++i)
    if (q[i] > 0.0 && f[i] > fmax) fmax = f[i];
  double acc = 0.0;
  for (std::size_t i = 0; i < q.size(); ++i)
    if (q[i] > 0.0) acc += q[i] * std::exp(f[i] - fmax);
  return mean_p - (fmax + std::log(acc));
}

namespace {

// ln det via Cholesky; retries once with 1e-9 jitter on the diagonal.
double log_det_spd(const Eigen::MatrixXd& m) {
  Eigen::MatrixXd sym = 0.5 * (m + m.transpose());
  Eigen::LLT<Eigen::MatrixXd> llt(sym);
  if (llt.info() != Eigen::Success) {
    sym.diagonal().array() += 1e-9;
    llt.compute(sym);
    if (llt.info() != Eigen::Success)
      throw SingularCovariance("log_det_spd: Cholesky failed even with 1e-9 jitter");
  }
  double ld = 0.0;
  const auto& L = llt.matrixLLT();
  for (Eigen::Index i = 0; i < L.rows(); ++i) ld += std::log(L(i, i));
  return 2.0 * ld;
}

}  // namespace

double gaussian_entropy(const CovarianceEstimate& cov) {
  const double d = static_cast<double>(cov.matrix.rows());
  return 0.5 * d * std::log(2.0 * M_PI * M_E) + 0.5 * log_det_spd(cov.matrix);
}

double log_det_ratio_term(double scale, const CovarianceEstimate& cov) {
  if (!(scale >= 0.0)) throw std::invalid_argument("log_det_ratio_term: negative scale");
  const Eigen::Index d = cov.matrix.rows();
  Eigen::MatrixXd m = scale * cov.matrix;
  m.diagonal().array() += 1.0;
  return std::max(0.0, log_det_spd(m));
}

CovarianceEstimate sample_covariance(const Eigen::MatrixXd& samples) {
  const Eigen::Index k = samples.rows();
  if (k < 2) throw InsufficientSamples("sample_covariance: need at least 2 rows, got " +
                                       std::to_string(k));
  const Eigen::RowVectorXd mean = samples.colwise().mean();
  const Eigen::MatrixXd centered = samples.rowwise() - mean;
  Eigen::MatrixXd cov = (centered.transpose() * centered) / static_cast<double>(k - 1);
  cov = 0.5 * (cov + cov.transpose()).eval();
  CovarianceEstimate out;
  out.matrix = std::move(cov);
  out.sample_count = static_cast<long>(k);
  return out;
}

double binned_mi_binary(const std::vector<std::pair<int, double>>& pairs, int bins) {
  if (pairs.empty()) throw std::invalid_argument("binned_mi_binary: no pairs");
  if (bins < 1) throw std::invalid_argument("binned_mi_binary: bins must be >= 1");
  double lo = pairs.front().second, hi = pairs.front().second;
  for (const auto& [sign, x] : pairs) {
    lo = std::min(lo, x);
    hi = std::max(hi, x);
  }
  const double width = hi - lo;
  const int effective_bins = width > 0.0 ? bins : 1;
  Eigen::MatrixXd counts = Eigen::MatrixXd::Zero(2, effective_bins);
  for (const auto& [sign, x] : pairs) {
    const int row = sign > 0 ? 1 : 0;
    int bin = 0;
    if (width > 0.0) {
      bin = static_cast<int>((x - lo) / width * effective_bins);
      bin = std::clamp(bin, 0, effective_bins - 1);
    }
    counts(row, bin) += 1.0;
  }
  JointTable joint(counts / static_cast<double>(pairs.size()));
  return std::min(mutual_information(joint), std::log(2.0));
}

}  // namespace metagen
