#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "metagen/info.hpp"
#include "metagen/mdp.hpp"
#include "metagen/stats.hpp"

namespace metagen {

// Weighted family of MDPs sharing dimensions, gamma, and horizon, so one
// parameter vector fits every task.
struct MDPEnvironment {
  std::vector<TabularMDP> mdps;
  DiscreteDistribution weights;

  void validate() const;
  double gamma() const { return mdps.front().gamma; }
  int horizon() const { return mdps.front().horizon; }
  int param_dim() const { return mdps.front().n_states * mdps.front().n_actions; }

  static MDPEnvironment from_json_text(const std::string& text);
  static MDPEnvironment load(const std::string& path);
  std::string to_json_text() const;
};

// Knobs of the two-level noisy gradient algorithm: M outer updates over a
// batch of b tasks, T inner policy-gradient updates per task, with isotropic
// Gaussian noise on every step.
struct NoiseSchedule {
  int outer_steps = 1;   // M
  int inner_steps = 1;   // T
  int batch_size = 1;    // b
  std::vector<double> outer_rates;     // alpha_m, length M
  std::vector<double> outer_noise_sd;  // length M
  std::vector<double> inner_rates;     // beta_t, length T
  std::vector<double> inner_noise_sd;  // length T

  void validate() const;
  NoiseSchedule with_noise_scaled(double factor) const;
  static NoiseSchedule constant(int outer_steps, int inner_steps, int batch_size,
                                double outer_rate, double outer_sd, double inner_rate,
                                double inner_sd);
};

// Per-task parameters at a recorded inner state: phis[i] is task i's parameter
// right before the (outer_step, inner_step) update.
struct InnerState {
  int outer_step = 0;
  int inner_step = 0;
  std::vector<Eigen::VectorXd> phis;
};

struct TrainLog {
  std::vector<Eigen::VectorXd> theta_trace;  // theta^0 .. theta^M
  std::vector<InnerState> snapshots;         // every (m, t) visited
  std::vector<Eigen::VectorXd> final_phis;   // phi^T_{1:n} of the last outer round
};

struct AdaptResult {
  Eigen::VectorXd phi;                  // phi^T
  std::vector<Eigen::VectorXd> states;  // phi^0 .. phi^T
};

// T noisy policy-gradient updates from phi^0 = theta, one fresh trajectory per
// step. Deterministic per seed.
AdaptResult inner_adapt(const Eigen::VectorXd& theta, const TabularMDP& mdp,
                        const NoiseSchedule& sched, std::uint64_t seed);

// First-order meta-gradient: adapt, then a policy gradient at phi^T from one
// fresh trajectory.
Eigen::VectorXd meta_gradient_estimate(const Eigen::VectorXd& theta, const TabularMDP& mdp,
                                       const NoiseSchedule& sched, std::uint64_t seed);

// M outer rounds from theta^0 = 0. Every task is adapted each round (the log
// needs all n parameter stacks); the uniformly-drawn batch of size b decides
// which meta-gradients enter the update.
std::pair<Eigen::VectorXd, TrainLog> meta_train(const std::vector<TabularMDP>& tasks,
                                                const NoiseSchedule& sched, std::uint64_t seed);

// (1/n) sum_i mean over K replicates of exact_return(inner_adapt(theta, M_i)).
MeanSE empirical_meta_objective(const Eigen::VectorXd& theta, const std::vector<TabularMDP>& tasks,
                                const NoiseSchedule& sched, int replicates, std::uint64_t seed);

// Exact weighted sum over the environment of per-MDP replicate means.
MeanSE population_meta_objective(const Eigen::VectorXd& theta, const MDPEnvironment& env,
                                 const NoiseSchedule& sched, int replicates, std::uint64_t seed);

// Per trial: draw n training MDPs, meta-train, empirical minus population.
MeanSE rl_gen_gap(const MDPEnvironment& train, const MDPEnvironment& test, int n,
                  const NoiseSchedule& sched, int trials, int replicates, std::uint64_t seed);

// Sample covariances of the resampled gradients at every recorded state:
// outer[m] is the d x d covariance of fresh batch-averaged meta-gradients at
// theta^m, inner[m][t] the nd x nd covariance of the stacked per-task inner
// gradients at the recorded phi state.
struct GradCovProfile {
  std::vector<CovarianceEstimate> outer;
  std::vector<std::vector<CovarianceEstimate>> inner;
};

GradCovProfile resample_gradient_covariances(const TrainLog& log,
                                             const std::vector<TabularMDP>& tasks,
                                             const NoiseSchedule& sched, int resamples,
                                             std::uint64_t seed);

// e1 = sum_m ln det((alpha_m/outer_sd_m)^2 Cov_m + I_d),
// e2 = sum_{m,t} ln det((beta_t/inner_sd_t)^2 Cov_{m,t} + I_{nd}).
std::pair<double, double> info_terms_from_profile(const GradCovProfile& profile,
                                                  const NoiseSchedule& sched);

std::pair<double, double> estimate_info_terms(const TrainLog& log,
                                              const std::vector<TabularMDP>& tasks,
                                              const NoiseSchedule& sched, int resamples,
                                              std::uint64_t seed);

// sqrt((2 kl + e1 + e2) / (n (1 - gamma)^2))
double noisy_metagrad_bound(double kl_term, double e1, double e2, int n, double gamma);

// n * KL(train weights || test weights) over a shared MDP registry; +inf when
// the test environment misses part of the training support.
double env_kl(const MDPEnvironment& train, const MDPEnvironment& test, int n);

struct SubtaskRLResult {
  double mean = 0.0;
  double se = 0.0;
  long draws = 0;
  long degenerate = 0;
};

// Subtask pipeline with MDP pairs instead of datasets: theta is meta-trained
// on the selected members, task performance is E_{phi|theta,M} J estimated by
// K adaptation replicates with exact returns.
SubtaskRLResult gen_sub_rl_estimate(const MDPEnvironment& env, int target_mdp, int n,
                                    const NoiseSchedule& sched, int trials, int replicates,
                                    std::uint64_t seed);

SubtaskRLResult subtask_rl_bound(const MDPEnvironment& env, int target_mdp, int n,
                                 const NoiseSchedule& sched, int trials, int sign_resamples,
                                 int replicates, int bins, std::uint64_t seed);

// Everything the bound verdict needs; bound_value is recomputable from the
// parts (enforced in the constructor helper).
struct BoundReport {
  double gap_estimate = 0.0;
  double gap_se = 0.0;
  double kl_term = 0.0;
  double e1 = 0.0;
  double e2 = 0.0;
  int n_tasks = 1;
  double gamma = 0.0;
  double bound_value = 0.0;
  bool holds = false;

  std::string to_json_text() const;
};

BoundReport make_bound_report(double gap, double gap_se, double kl, double e1, double e2, int n,
                              double gamma);

// Both sides of the suboptimality chain: left = E[J_U(theta*) - J_U(theta_hat)],
// right = gen_ood(theta_hat) - gen_ood(theta*), with theta_hat the per-draw
// empirical argmax over the candidates and theta* the population argmax.
struct RegretReport {
  double left = 0.0;
  double left_se = 0.0;
  double right = 0.0;
  double right_se = 0.0;
  bool holds = false;
};

RegretReport meta_suboptimality_check(const std::vector<Eigen::VectorXd>& candidates,
                                      const MDPEnvironment& train, const MDPEnvironment& test,
                                      int n, const NoiseSchedule& sched, int trials,
                                      int replicates, std::uint64_t seed);

// Plug-in MI between the quantized learner output (theta^M, phi^T_{1:n};
// per-coordinate rounding to step 0.5) and the drawn task tuple, estimated
// over repeated training runs. A lower bound proxy for I(theta, phi; M_{1:n}).
double quantized_plugin_mi(const MDPEnvironment& env, int n, const NoiseSchedule& sched,
                           int trials, std::uint64_t seed, double step = 0.5);

}  // namespace metagen
