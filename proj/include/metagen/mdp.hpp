#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "metagen/info.hpp"
#include "metagen/rng.hpp"

namespace metagen {

// Finite-state, finite-action MDP with a fixed horizon. Rewards live in
// [0, 1], so every discounted return is bounded by (1 - gamma^(H+1))/(1 - gamma).
struct TabularMDP {
  int n_states = 0;
  int n_actions = 0;
  std::vector<std::vector<DiscreteDistribution>> transition;  // [s][a] -> dist over s'
  std::vector<std::vector<double>> reward;                    // [s][a] in [0, 1]
  DiscreteDistribution initial;                               // rho
  double gamma = 0.9;  // in [0, 1)
  int horizon = 0;     // H >= 0; trajectories have H+1 steps

  void validate() const;
  double return_cap() const;  // (1 - gamma^(H+1)) / (1 - gamma)

  static TabularMDP from_json_text(const std::string& text);
  static TabularMDP load(const std::string& path);
  std::string to_json_text() const;
};

// Row-wise softmax policy over logits; the flattened logits (row-major, index
// s * n_actions + a) are the parameter vector.
struct SoftmaxPolicy {
  Eigen::MatrixXd logits;  // S x A

  SoftmaxPolicy() = default;
  SoftmaxPolicy(int n_states, int n_actions)
      : logits(Eigen::MatrixXd::Zero(n_states, n_actions)) {}
  explicit SoftmaxPolicy(Eigen::MatrixXd l) : logits(std::move(l)) {}

  int n_states() const { return static_cast<int>(logits.rows()); }
  int n_actions() const { return static_cast<int>(logits.cols()); }
  int dim() const { return static_cast<int>(logits.size()); }

  Eigen::VectorXd probs(int s) const;  // numerically stable softmax of row s

  Eigen::VectorXd to_vector() const;
  static SoftmaxPolicy from_vector(const Eigen::VectorXd& v, int n_states, int n_actions);
};

struct Trajectory {
  struct Step {
    int state;
    int action;
    double reward;
    int next_state;
  };
  std::vector<Step> steps;  // exactly horizon + 1 entries, h = 0..H
};

// s_0 ~ rho, a_h ~ pi(.|s_h), s_{h+1} ~ P(.|s_h, a_h). Identical seed gives an
// identical trajectory.
Trajectory sample_trajectory(const TabularMDP& mdp, const SoftmaxPolicy& policy,
                             std::uint64_t seed);
Trajectory sample_trajectory(const TabularMDP& mdp, const SoftmaxPolicy& policy, Rng& rng);

// sum_{j=0..H} gamma^j r_j
double discounted_return(const Trajectory& traj, double gamma);

// Exact E[sum gamma^j r_j] by backward recursion.
double exact_return(const TabularMDP& mdp, const SoftmaxPolicy& policy);

// Score-function estimator: (sum_h gamma^h r_h) * (sum_k grad ln pi(a_k|s_k)),
// both sums over 0..H. The score of ln pi(a|s) is (indicator - probs) on the
// logits row of s and zero elsewhere.
Eigen::VectorXd reinforce_gradient(const Trajectory& traj, const SoftmaxPolicy& policy,
                                   double gamma);

// Exact gradient of exact_return: probability-weighted per-trajectory
// gradients over every trajectory. Guard: (S*A)^(H+1) <= 1e6, else
// EnumerationTooLarge.
Eigen::VectorXd exact_policy_gradient(const TabularMDP& mdp, const SoftmaxPolicy& policy);

struct ValueIterationResult {
  // values[h](s) = V*_h(s) for h = 0..H (values[H+1] would be zero)
  std::vector<Eigen::VectorXd> values;
  // greedy[h][s] = argmax_a Q*_h(s, a), lowest index on ties
  std::vector<std::vector<int>> greedy;

  double optimal_return(const DiscreteDistribution& rho) const;
};

ValueIterationResult value_iteration_finite_horizon(const TabularMDP& mdp);

}  // namespace metagen
