#include "metagen/mdp.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "metagen/errors.hpp"

namespace metagen {

using nlohmann::json;

void TabularMDP::validate() const {
  if (n_states < 1 || n_actions < 1) throw std::invalid_argument("TabularMDP: empty state/action space");
  if (static_cast<int>(transition.size()) != n_states ||
      static_cast<int>(reward.size()) != n_states)
    throw DimensionMismatch("TabularMDP: transition/reward table shape");
  for (int s = 0; s < n_states; ++s) {
    if (static_cast<int>(transition[s].size()) != n_actions ||
        static_cast<int>(reward[s].size()) != n_actions)
      throw DimensionMismatch("TabularMDP: row shape at state " + std::to_string(s));
    for (int a = 0; a < n_actions; ++a) {
      if (static_cast<int>(transition[s][a].size()) != n_states)
        throw DimensionMismatch("TabularMDP: next-state support size");
      const double r = reward[s][a];
      if (!(r >= 0.0 && r <= 1.0))
        throw std::invalid_argument("TabularMDP: reward outside [0,1] at (" + std::to_string(s) +
                                    "," + std::to_string(a) + ")");
    }
  }
  if (static_cast<int>(initial.size()) != n_states)
    throw DimensionMismatch("TabularMDP: initial distribution size");
  if (!(gamma >= 0.0 && gamma < 1.0)) throw std::invalid_argument("TabularMDP: gamma outside [0,1)");
  if (horizon < 0) throw std::invalid_argument("TabularMDP: negative horizon");
}

double TabularMDP::return_cap() const {
  if (gamma == 0.0) return 1.0;
  return (1.0 - std::pow(gamma, horizon + 1)) / (1.0 - gamma);
}

namespace {

DiscreteDistribution dist_from_json(const json& arr) {
  return DiscreteDistribution(arr.get<std::vector<double>>());
}

}  // namespace

TabularMDP TabularMDP::from_json_text(const std::string& text) {
  const json j = json::parse(text);
  TabularMDP m;
  m.n_states = j.at("n_states").get<int>();
  m.n_actions = j.at("n_actions").get<int>();
  m.reward = j.at("reward").get<std::vector<std::vector<double>>>();
  m.initial = dist_from_json(j.at("initial"));
  m.gamma = j.at("gamma").get<double>();
  m.horizon = j.at("horizon").get<int>();
  const auto& t = j.at("transition");
  m.transition.resize(m.n_states);
  for (int s = 0; s < m.n_states; ++s) {
    m.transition[s].reserve(m.n_actions);
    for (int a = 0; a < m.n_actions; ++a) m.transition[s].push_back(dist_from_json(t.at(s).at(a)));
  }
  m.validate();
  return m;
}

TabularMDP TabularMDP::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw EnvironmentFileMissing("cannot open MDP file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return from_json_text(ss.str());
}

std::string TabularMDP::to_json_text() const {
  json t = json::array();
  for (int s = 0; s < n_states; ++s) {
    json row = json::array();
    for (int a = 0; a < n_actions; ++a) row.push_back(transition[s][a].probs);
    t.push_back(row);
  }
  json j{{"n_states", n_states}, {"n_actions", n_actions}, {"transition", t},
         {"reward", reward},     {"initial", initial.probs}, {"gamma", gamma},
         {"horizon", horizon}};
  return j.dump(2);
}

Eigen::VectorXd SoftmaxPolicy::probs(int s) const {
  const Eigen::VectorXd row = logits.row(s).transpose();
  const double m = row.maxCoeff();
  Eigen::VectorXd e = (row.array() - m).exp();
  return e / e.sum();
}

Eigen::VectorXd SoftmaxPolicy::to_vector() const {
  Eigen::VectorXd v(dim());
  for (int s = 0; s < n_states(); ++s)
    for (int a = 0; a < n_actions(); ++a) v[s * n_actions() + a] = logits(s, a);
  return v;
}

SoftmaxPolicy SoftmaxPolicy::from_vector(const Eigen::VectorXd& v, int n_states, int n_actions) {
  if (v.size() != static_cast<Eigen::Index>(n_states) * n_actions)
    throw DimensionMismatch("SoftmaxPolicy::from_vector: size mismatch");
  Eigen::MatrixXd l(n_states, n_actions);
  for (int s = 0; s < n_states; ++s)
    for (int a = 0; a < n_actions; ++a) l(s, a) = v[s * n_actions + a];
  return SoftmaxPolicy(std::move(l));
}

namespace {

void check_dims(const TabularMDP& mdp, const SoftmaxPolicy& policy) {
  if (policy.n_states() != mdp.n_states || policy.n_actions() != mdp.n_actions)
    throw DimensionMismatch("policy dimensions do not match MDP");
}

}  // namespace

Trajectory sample_trajectory(const TabularMDP& mdp, const SoftmaxPolicy& policy, Rng& rng) {
  check_dims(mdp, policy);
  Trajectory traj;
  traj.steps.reserve(mdp.horizon + 1);
  int s = rng.categorical(mdp.initial.probs);
  for (int h = 0; h <= mdp.horizon; ++h) {
    const Eigen::VectorXd p = policy.probs(s);
    std::vector<double> pv(p.data(), p.data() + p.size());
    const int a = rng.categorical(pv);
    const int s_next = rng.categorical(mdp.transition[s][a].probs);
    traj.steps.push_back({s, a, mdp.reward[s][a], s_next});
    s = s_next;
  }
  return traj;
}

Trajectory sample_trajectory(const TabularMDP& mdp, const SoftmaxPolicy& policy,
                             std::uint64_t seed) {
  Rng rng(seed);
  return sample_trajectory(mdp, policy, rng);
}

double discounted_return(const Trajectory& traj, double gamma) {
  double total = 0.0;
  double g = 1.0;
  for (const auto& step : traj.steps) {
    total += g * step.reward;
    g *= gamma;
  }
  return total;
}

double exact_return(const TabularMDP& mdp, const SoftmaxPolicy& policy) {
  check_dims(mdp, policy);
  // V_h(s) = sum_a pi(a|s) [r(s,a) + gamma * sum_{s'} P(s'|s,a) V_{h+1}(s')]
  Eigen::VectorXd v = Eigen::VectorXd::Zero(mdp.n_states);
  for (int h = mdp.horizon; h >= 0; --h) {
    Eigen::VectorXd next(mdp.n_states);
    for (int s = 0; s < mdp.n_states; ++s) {
      const Eigen::VectorXd p = policy.probs(s);
      double acc = 0.0;
      for (int a = 0; a < mdp.n_actions; ++a) {
        double cont = 0.0;
        for (int t = 0; t < mdp.n_states; ++t) cont += mdp.transition[s][a][t] * v[t];
        acc += p[a] * (mdp.reward[s][a] + mdp.gamma * cont);
      }
      next[s] = acc;
    }
    v = next;
  }
  double total = 0.0;
  for (int s = 0; s < mdp.n_states; ++s) total += mdp.initial[s] * v[s];
  return total;
}

Eigen::VectorXd reinforce_gradient(const Trajectory& traj, const SoftmaxPolicy& policy,
                                   double gamma) {
  const int A = policy.n_actions();
  Eigen::VectorXd score = Eigen::VectorXd::Zero(policy.dim());
  double ret = 0.0;
  double g = 1.0;
  for (const auto& step : traj.steps) {
    if (step.state >= policy.n_states() || step.action >= A)
      throw DimensionMismatch("reinforce_gradient: trajectory outside policy dimensions");
    ret += g * step.reward;
    g *= gamma;
    const Eigen::VectorXd p = policy.probs(step.state);
    for (int a = 0; a < A; ++a)
      score[step.state * A + a] += (a == step.action ? 1.0 : 0.0) - p[a];
  }
  return ret * score;
}

namespace {

// DFS over all trajectories, accumulating prob * return * score.
void enumerate_gradient(const TabularMDP& mdp, const SoftmaxPolicy& policy, int h, int s,
                        double prob, double ret, Eigen::VectorXd& score, Eigen::VectorXd& acc) {
  if (h > mdp.horizon) {
    acc += (prob * ret) * score;
    return;
  }
  const int A = mdp.n_actions;
  const Eigen::VectorXd p = policy.probs(s);
  const double discount = std::pow(mdp.gamma, h);
  for (int a = 0; a < A; ++a) {
    if (p[a] == 0.0) continue;
    // push the score contribution of choosing a in s, pop on the way out
    for (int b = 0; b < A; ++b) score[s * A + b] += (b == a ? 1.0 : 0.0) - p[b];
    const double r = ret + discount * mdp.reward[s][a];
    for (int t = 0; t < mdp.n_states; ++t) {
      const double pt = mdp.transition[s][a][t];
      if (pt == 0.0) continue;
      enumerate_gradient(mdp, policy, h + 1, t, prob * p[a] * pt, r, score, acc);
    }
    for (int b = 0; b < A; ++b) score[s * A + b] -= (b == a ? 1.0 : 0.0) - p[b];
  }
}

}  // namespace

Eigen::VectorXd exact_policy_gradient(const TabularMDP& mdp, const SoftmaxPolicy& policy) {
  check_dims(mdp, policy);
  const double count = std::pow(static_cast<double>(mdp.n_states) * mdp.n_actions,
                                static_cast<double>(mdp.horizon + 1));
  if (count > 1e6)
    throw EnumerationTooLarge("exact_policy_gradient: (S*A)^(H+1) = " + std::to_string(count));
  Eigen::VectorXd acc = Eigen::VectorXd::Zero(policy.dim());
  Eigen::VectorXd score = Eigen::VectorXd::Zero(policy.dim());
  for (int s = 0; s < mdp.n_states; ++s) {
    if (mdp.initial[s] == 0.0) continue;
    enumerate_gradient(mdp, policy, 0, s, mdp.initial[s], 0.0, score, acc);
  }
  return acc;
}

double ValueIterationResult::optimal_return(const DiscreteDistribution& rho) const {
  double total = 0.0;
  for (std::size_t s = 0; s < rho.size(); ++s) total += rho[s] * values.front()[s];
  return total;
}

ValueIterationResult value_iteration_finite_horizon(const TabularMDP& mdp) {
  ValueIterationResult out;
  out.values.assign(mdp.horizon + 1, Eigen::VectorXd::Zero(mdp.n_states));
  out.greedy.assign(mdp.horizon + 1, std::vector<int>(mdp.n_states, 0));
  Eigen::VectorXd next = Eigen::VectorXd::Zero(mdp.n_states);
  for (int h = mdp.horizon; h >= 0; --h) {
    for (int s = 0; s < mdp.n_states; ++s) {
      double best = -1.0;
      int best_a = 0;
      for (int a = 0; a < mdp.n_actions; ++a) {
        double cont = 0.0;
        for (int t = 0; t < mdp.n_states; ++t) cont += mdp.transition[s][a][t] * next[t];
        const double q = mdp.reward[s][a] + mdp.gamma * cont;
        if (q > best) {  // strict: ties keep the lowest action index
          best = q;
          best_a = a;
        }
      }
      out.values[h][s] = best;
      out.greedy[h][s] = best_a;
    }
    next = out.values[h];
  }
  return out;
}

}  // namespace metagen
