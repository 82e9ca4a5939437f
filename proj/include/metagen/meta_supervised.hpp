#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "metagen/info.hpp"
#include "metagen/rng.hpp"
#include "metagen/stats.hpp"

namespace metagen {

// Losses live in [0, 1], so they are sigma-sub-Gaussian with sigma = 1/2;
// that constant is baked into the bound helpers below.
inline constexpr double kLossSubGaussianSigma = 0.5;

using Dataset = std::vector<int>;                      // m sample-alphabet indices
using LossTable = std::vector<std::vector<double>>;    // [hypothesis][symbol] in [0, 1]

struct FiniteTask {
  DiscreteDistribution sample_dist;  // over the sample alphabet
  LossTable loss_table;

  int n_hypotheses() const { return static_cast<int>(loss_table.size()); }
  int alphabet_size() const { return static_cast<int>(sample_dist.size()); }
  void validate() const;
};

struct TaskEnvironment {
  std::vector<FiniteTask> tasks;
  DiscreteDistribution weights;

  void validate() const;
  // The learner is a channel of (theta, Z) only, so every task in an
  // environment must share one loss table; returns it or throws.
  const LossTable& shared_loss() const;

  static TaskEnvironment from_json_text(const std::string& text);
  static TaskEnvironment load(const std::string& path);
  std::string to_json_text() const;
};

// Gibbs base- and meta-learner over finite index grids. Positions on both
// grids are normalized to [0, 1]; the coupling penalty is the absolute
// distance between the hypothesis and meta positions.
struct GibbsLearnerSpec {
  int n_hypotheses = 1;
  int n_meta = 1;
  double base_temperature = 1.0;
  double meta_temperature = 1.0;
  double coupling = 0.0;

  void validate() const;
  double penalty(int w, int theta) const;
};

// (1/m) sum_j loss[w][z_j]
double hypothesis_empirical_risk(int w, const Dataset& data, const LossTable& loss);

// P(w) proportional to exp(-base_temperature * (m * L(w, Z) + coupling * penalty(w, theta)))
DiscreteDistribution base_posterior(int theta, const Dataset& data, const LossTable& loss,
                                    const GibbsLearnerSpec& spec);

// (1/n) sum_i E_{W ~ base_posterior} [(1/m) sum_j loss(W, S_ij)]
double empirical_meta_risk(int theta, const std::vector<Dataset>& datasets, const LossTable& loss,
                           const GibbsLearnerSpec& spec);

// Gibbs over the meta grid: P(theta) proportional to
// exp(-meta_temperature * empirical_meta_risk(theta, ...)).
DiscreteDistribution meta_posterior(const std::vector<Dataset>& datasets, const LossTable& loss,
                                    const GibbsLearnerSpec& spec);

// Exact E_{task ~ env} E_{Z ~ task^m} E_{W | Z, theta} E_{S ~ task} loss(W, S)
// by full dataset enumeration; guard |alphabet|^m <= 1e6.
double population_meta_risk(int theta, const TaskEnvironment& env, int m,
                            const GibbsLearnerSpec& spec);

// Exact joint law of (Z_{1:n}, theta, W_{1:n}) under the training environment,
// flattened as a JointTable with X = dataset tuple and Y = (theta, W tuple).
struct ExactJoint {
  JointTable joint;
  double i_joint = 0.0;        // I(theta, W_{1:n}; Z_{1:n})
  double i_theta_data = 0.0;   // I(theta; Z_{1:n})
  int dataset_space = 0;       // |alphabet|^m per task
};

ExactJoint exact_joint_enumeration(const TaskEnvironment& env, int n, int m,
                                   const GibbsLearnerSpec& spec);

// D(P_{Z_{1:n}} || Q_{Z_{1:n}}) computed over the full product dataset space.
double dataset_marginal_kl(const TaskEnvironment& train, const TaskEnvironment& test, int n,
                           int m);

// sqrt(2 sigma^2 (I + KL) / (n m)) — the mismatch-setting bound.
double mismatch_gen_bound(double i_joint, double kl_datasets, double sigma, int n, int m);

// Exact E_{theta, Z}[empirical meta-risk - population meta-risk under test].
double ood_gap_exact(const TaskEnvironment& train, const TaskEnvironment& test, int n, int m,
                     const GibbsLearnerSpec& spec);

// Paired draws (task, dataset)^2 with uniform +-1 selectors; the selectors
// come from a separate seed stream so they are independent of pair contents.
struct SuperSamplePair {
  int task_plus = 0;
  int task_minus = 0;
  Dataset data_plus;
  Dataset data_minus;
};

struct SuperSample {
  std::vector<SuperSamplePair> pairs;
  std::vector<int> signs;  // +-1
};

SuperSample build_supersample(const TaskEnvironment& env, int n, int m, std::uint64_t seed);

struct SubtaskResult {
  double mean = 0.0;
  double se = 0.0;
  long draws = 0;       // non-degenerate draws that entered the average
  long degenerate = 0;  // skipped draws with n_target = 0
};

// Monte Carlo estimate of the subtask generalization error for one target
// task. Throws AllDrawsDegenerate if no draw contains the target.
SubtaskResult gen_sub_estimate(const TaskEnvironment& env, int target_task, int n, int m,
                               const GibbsLearnerSpec& spec, int trials, std::uint64_t seed);

// Monte Carlo estimate of the matching conditional-MI bound: per supersample,
// signs are resampled, the per-pair witness f_i is binned against the sign,
// and the bound averages (1/n_target) sum_i sqrt(2 sigma^2 I_i / m).
SubtaskResult subtask_gen_bound(const TaskEnvironment& env, int target_task, int n, int m,
                                const GibbsLearnerSpec& spec, int trials, int sign_resamples,
                                int bins, std::uint64_t seed);

}  // namespace metagen
