#include "metagen/meta_rl.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

#include <json.hpp>

#include "metagen/errors.hpp"
#include "metagen/parallel.hpp"

namespace metagen {

using nlohmann::json;

void MDPEnvironment::validate() const {
  if (mdps.empty()) throw std::invalid_argument("MDPEnvironment: no MDPs");
  if (weights.size() != mdps.size())
    throw DimensionMismatch("MDPEnvironment: weights size != MDP count");
  const auto& first = mdps.front();
  for (const auto& m : mdps) {
    m.validate();
    if (m.n_states != first.n_states || m.n_actions != first.n_actions ||
        m.gamma != first.gamma || m.horizon != first.horizon)
      throw DimensionMismatch("MDPEnvironment: MDPs must share dimensions, gamma and horizon");
  }
}

MDPEnvironment MDPEnvironment::from_json_text(const std::string& text) {
  const json j = json::parse(text);
  MDPEnvironment env;
  for (const auto& mj : j.at("mdps")) env.mdps.push_back(TabularMDP::from_json_text(mj.dump()));
  env.weights = DiscreteDistribution(j.at("weights").get<std::vector<double>>());
  env.validate();
  return env;
}

MDPEnvironment MDPEnvironment::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw EnvironmentFileMissing("cannot open environment file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return from_json_text(ss.str());
}

std::string MDPEnvironment::to_json_text() const {
  json arr = json::array();
  for (const auto& m : mdps) arr.push_back(json::parse(m.to_json_text()));
  return json{{"mdps", arr}, {"weights", weights.probs}}.dump(2);
}

void NoiseSchedule::validate() const {
  if (outer_steps < 0 || inner_steps < 0) throw std::invalid_argument("NoiseSchedule: negative steps");
  if (batch_size < 1) throw std::invalid_argument("NoiseSchedule: batch size must be >= 1");
  auto check = [](const std::vector<double>& v, std::size_t len, const char* name, bool rate) {
    if (v.size() != len)
      throw DimensionMismatch(std::string("NoiseSchedule: ") + name + " length mismatch");
    for (double x : v)
      if (!(x >= 0.0))
        throw std::invalid_argument(std::string("NoiseSchedule: negative ") + name);
    (void)rate;
  };
  check(outer_rates, outer_steps, "outer_rates", true);
  check(outer_noise_sd, outer_steps, "outer_noise_sd", false);
  check(inner_rates, inner_steps, "inner_rates", true);
  check(inner_noise_sd, inner_steps, "inner_noise_sd", false);
}

NoiseSchedule NoiseSchedule::with_noise_scaled(double factor) const {
  NoiseSchedule s = *this;
  for (double& x : s.outer_noise_sd) x *= factor;
  for (double& x : s.inner_noise_sd) x *= factor;
  return s;
}

NoiseSchedule NoiseSchedule::constant(int outer_steps, int inner_steps, int batch_size,
                                      double outer_rate, double outer_sd, double inner_rate,
                                      double inner_sd) {
  NoiseSchedule s;
  s.outer_steps = outer_steps;
  s.inner_steps = inner_steps;
  s.batch_size = batch_size;
  s.outer_rates.assign(outer_steps, outer_rate);
  s.outer_noise_sd.assign(outer_steps, outer_sd);
  s.inner_rates.assign(inner_steps, inner_rate);
  s.inner_noise_sd.assign(inner_steps, inner_sd);
  return s;
}

namespace {

Eigen::VectorXd gaussian_vector(Rng& rng, int d, double sd) {
  Eigen::VectorXd v(d);
  for (int i = 0; i < d; ++i) v[i] = sd > 0.0 ? rng.normal(0.0, sd) : 0.0;
  return v;
}

AdaptResult inner_adapt_rng(const Eigen::VectorXd& theta, const TabularMDP& mdp,
                            const NoiseSchedule& sched, Rng& rng) {
  const int d = mdp.n_states * mdp.n_actions;
  if (theta.size() != d) throw DimensionMismatch("inner_adapt: theta size != S*A");
  AdaptResult out;
  out.states.reserve(sched.inner_steps + 1);
  Eigen::VectorXd phi = theta;
  out.states.push_back(phi);
  for (int t = 0; t < sched.inner_steps; ++t) {
    const SoftmaxPolicy policy = SoftmaxPolicy::from_vector(phi, mdp.n_states, mdp.n_actions);
    const Trajectory traj = sample_trajectory(mdp, policy, rng);
    const Eigen::VectorXd grad = reinforce_gradient(traj, policy, mdp.gamma);
    phi += sched.inner_rates[t] * grad + gaussian_vector(rng, d, sched.inner_noise_sd[t]);
    out.states.push_back(phi);
  }
  out.phi = phi;
  return out;
}

Eigen::VectorXd policy_gradient_sample(const Eigen::VectorXd& phi, const TabularMDP& mdp,
                                       Rng& rng) {
  const SoftmaxPolicy policy = SoftmaxPolicy::from_vector(phi, mdp.n_states, mdp.n_actions);
  const Trajectory traj = sample_trajectory(mdp, policy, rng);
  return reinforce_gradient(traj, policy, mdp.gamma);
}

}  // namespace

AdaptResult inner_adapt(const Eigen::VectorXd& theta, const TabularMDP& mdp,
                        const NoiseSchedule& sched, std::uint64_t seed) {
  sched.validate();
  Rng rng(seed);
  return inner_adapt_rng(theta, mdp, sched, rng);
}

Eigen::VectorXd meta_gradient_estimate(const Eigen::VectorXd& theta, const TabularMDP& mdp,
                                       const NoiseSchedule& sched, std::uint64_t seed) {
  sched.validate();
  Rng rng(seed);
  const AdaptResult adapted = inner_adapt_rng(theta, mdp, sched, rng);
  return policy_gradient_sample(adapted.phi, mdp, rng);
}

std::pair<Eigen::VectorXd, TrainLog> meta_train(const std::vector<TabularMDP>& tasks,
                                                const NoiseSchedule& sched, std::uint64_t seed) {
  sched.validate();
  if (tasks.empty()) throw std::invalid_argument("meta_train: no tasks");
  const int n = static_cast<int>(tasks.size());
  if (sched.batch_size > n)
    throw BatchLargerThanTaskSet("meta_train: batch " + std::to_string(sched.batch_size) +
                                 " > task count " + std::to_string(n));
  const int d = tasks.front().n_states * tasks.front().n_actions;
  Rng rng(derive_seed(seed, 0x3E7Au));

  TrainLog log;
  Eigen::VectorXd theta = Eigen::VectorXd::Zero(d);
  log.theta_trace.push_back(theta);
  for (int m = 0; m < sched.outer_steps; ++m) {
    // adapt every task from the current meta-parameter; record each inner state
    std::vector<AdaptResult> adapted(n);
    for (int i = 0; i < n; ++i) {
      Rng task_rng(derive_seed(seed, 0xADA7u, m, i));
      adapted[i] = inner_adapt_rng(theta, tasks[i], sched, task_rng);
    }
    for (int t = 0; t < sched.inner_steps; ++t) {
      InnerState state;
      state.outer_step = m;
      state.inner_step = t;
      state.phis.reserve(n);
      for (int i = 0; i < n; ++i) state.phis.push_back(adapted[i].states[t]);
      log.snapshots.push_back(std::move(state));
    }
    const std::vector<int> batch = rng.sample_without_replacement(n, sched.batch_size);
    Eigen::VectorXd mean_grad = Eigen::VectorXd::Zero(d);
    for (int i : batch) {
      Rng grad_rng(derive_seed(seed, 0x96ADu, m, i));
      mean_grad += policy_gradient_sample(adapted[i].phi, tasks[i], grad_rng);
    }
    mean_grad /= static_cast<double>(sched.batch_size);
    theta += sched.outer_rates[m] * mean_grad + gaussian_vector(rng, d, sched.outer_noise_sd[m]);
    log.theta_trace.push_back(theta);
    if (m == sched.outer_steps - 1) {
      log.final_phis.clear();
      for (int i = 0; i < n; ++i) log.final_phis.push_back(adapted[i].phi);
    }
  }
  if (sched.outer_steps == 0)
    log.final_phis.assign(n, theta);
  return {theta, std::move(log)};
}

MeanSE empirical_meta_objective(const Eigen::VectorXd& theta, const std::vector<TabularMDP>& tasks,
                                const NoiseSchedule& sched, int replicates, std::uint64_t seed) {
  if (replicates < 2) throw std::invalid_argument("empirical_meta_objective: replicates >= 2");
  const int n = static_cast<int>(tasks.size());
  double mean = 0.0;
  double var_of_mean = 0.0;
  for (int i = 0; i < n; ++i) {
    std::vector<double> values = parallel_map(replicates, [&](std::size_t k) {
      const AdaptResult a = inner_adapt(theta, tasks[i], sched, derive_seed(seed, 0xE41u, i, k));
      return exact_return(tasks[i],
                          SoftmaxPolicy::from_vector(a.phi, tasks[i].n_states, tasks[i].n_actions));
    });
    const MeanSE ms = mean_se(values);
    mean += ms.mean / n;
    var_of_mean += (ms.se * ms.se) / (static_cast<double>(n) * n);
  }
  return {mean, std::sqrt(var_of_mean), static_cast<long>(n) * replicates};
}

MeanSE population_meta_objective(const Eigen::VectorXd& theta, const MDPEnvironment& env,
                                 const NoiseSchedule& sched, int replicates, std::uint64_t seed) {
  if (replicates < 2) throw std::invalid_argument("population_meta_objective: replicates >= 2");
  env.validate();
  double mean = 0.0;
  double var_of_mean = 0.0;
  for (std::size_t i = 0; i < env.mdps.size(); ++i) {
    const double w = env.weights[i];
    if (w == 0.0) continue;
    std::vector<double> values = parallel_map(replicates, [&](std::size_t k) {
      const AdaptResult a =
          inner_adapt(theta, env.mdps[i], sched, derive_seed(seed, 0x909u, i, k));
      return exact_return(env.mdps[i], SoftmaxPolicy::from_vector(a.phi, env.mdps[i].n_states,
                                                                  env.mdps[i].n_actions));
    });
    const MeanSE ms = mean_se(values);
    mean += w * ms.mean;
    var_of_mean += w * w * ms.se * ms.se;
  }
  return {mean, std::sqrt(var_of_mean), static_cast<long>(env.mdps.size()) * replicates};
}

namespace {

std::vector<TabularMDP> draw_tasks(const MDPEnvironment& env, int n, Rng& rng) {
  std::vector<TabularMDP> tasks;
  tasks.reserve(n);
  for (int i = 0; i < n; ++i) tasks.push_back(env.mdps[rng.categorical(env.weights.probs)]);
  return tasks;
}

}  // namespace

MeanSE rl_gen_gap(const MDPEnvironment& train, const MDPEnvironment& test, int n,
                  const NoiseSchedule& sched, int trials, int replicates, std::uint64_t seed) {
  if (trials < 2) throw std::invalid_argument("rl_gen_gap: trials must be >= 2");
  train.validate();
  test.validate();
  std::vector<double> gaps = parallel_map(trials, [&](std::size_t t) {
    Rng rng(derive_seed(seed, 0x6A9u, t));
    const auto tasks = draw_tasks(train, n, rng);
    const auto [theta, log] = meta_train(tasks, sched, derive_seed(seed, 0x7124u, t));
    const MeanSE emp =
        empirical_meta_objective(theta, tasks, sched, replicates, derive_seed(seed, 0xE3Du, t));
    const MeanSE pop =
        population_meta_objective(theta, test, sched, replicates, derive_seed(seed, 0x90Bu, t));
    return emp.mean - pop.mean;
  });
  return mean_se(gaps);
}

GradCovProfile resample_gradient_covariances(const TrainLog& log,
                                             const std::vector<TabularMDP>& tasks,
                                             const NoiseSchedule& sched, int resamples,
                                             std::uint64_t seed) {
  if (resamples < 2)
    throw InsufficientResamples("resample_gradient_covariances: need >= 2 resamples");
  const int n = static_cast<int>(tasks.size());
  const int d = tasks.front().n_states * tasks.front().n_actions;
  GradCovProfile profile;
  profile.outer.resize(sched.outer_steps);
  profile.inner.assign(sched.outer_steps, std::vector<CovarianceEstimate>(sched.inner_steps));

  // outer: fresh batch choice + fresh adaptation + fresh gradient per resample
  for (int m = 0; m < sched.outer_steps; ++m) {
    const Eigen::VectorXd& theta = log.theta_trace[m];
    Eigen::MatrixXd samples(resamples, d);
    parallel_for(resamples, [&](std::size_t r) {
      Rng rng(derive_seed(seed, 0xE100u + m, r));
      const std::vector<int> batch = rng.sample_without_replacement(n, sched.batch_size);
      Eigen::VectorXd grad = Eigen::VectorXd::Zero(d);
      for (int i : batch)
        grad += meta_gradient_estimate(theta, tasks[i], sched, derive_seed(seed, 0xE101u, m, r * n + i));
      samples.row(r) = grad / static_cast<double>(sched.batch_size);
    });
    profile.outer[m] = sample_covariance(samples);
  }

  // inner: stacked per-task gradients at each recorded state
  for (const InnerState& state : log.snapshots) {
    Eigen::MatrixXd samples(resamples, static_cast<Eigen::Index>(n) * d);
    parallel_for(resamples, [&](std::size_t r) {
      for (int i = 0; i < n; ++i) {
        Rng rng(derive_seed(seed, 0xE200u + state.outer_step * 64 + state.inner_step, r, i));
        samples.row(r).segment(static_cast<Eigen::Index>(i) * d, d) =
            policy_gradient_sample(state.phis[i], tasks[i], rng);
      }
    });
    profile.inner[state.outer_step][state.inner_step] = sample_covariance(samples);
  }
  return profile;
}

std::pair<double, double> info_terms_from_profile(const GradCovProfile& profile,
                                                  const NoiseSchedule& sched) {
  double e1 = 0.0;
  for (int m = 0; m < sched.outer_steps; ++m) {
    const double sd = sched.outer_noise_sd[m];
    if (sd <= 0.0) {
      // zero-noise channel: skip only if the gradient is exactly deterministic
      if (profile.outer[m].matrix.norm() > 0.0)
        return {std::numeric_limits<double>::infinity(), 0.0};
      continue;
    }
    const double scale = (sched.outer_rates[m] * sched.outer_rates[m]) / (sd * sd);
    e1 += log_det_ratio_term(scale, profile.outer[m]);
  }
  double e2 = 0.0;
  for (int m = 0; m < sched.outer_steps; ++m) {
    for (int t = 0; t < sched.inner_steps; ++t) {
      const double sd = sched.inner_noise_sd[t];
      if (sd <= 0.0) {
        if (profile.inner[m][t].matrix.norm() > 0.0)
          return {e1, std::numeric_limits<double>::infinity()};
        continue;
      }
      const double scale = (sched.inner_rates[t] * sched.inner_rates[t]) / (sd * sd);
      e2 += log_det_ratio_term(scale, profile.inner[m][t]);
    }
  }
  return {e1, e2};
}

std::pair<double, double> estimate_info_terms(const TrainLog& log,
                                              const std::vector<TabularMDP>& tasks,
                                              const NoiseSchedule& sched, int resamples,
                                              std::uint64_t seed) {
  const GradCovProfile profile = resample_gradient_covariances(log, tasks, sched, resamples, seed);
  return info_terms_from_profile(profile, sched);
}

double noisy_metagrad_bound(double kl_term, double e1, double e2, int n, double gamma) {
  if (kl_term < 0.0 || e1 < 0.0 || e2 < 0.0)
    throw std::invalid_argument("noisy_metagrad_bound: negative term");
  return std::sqrt((2.0 * kl_term + e1 + e2) / (n * (1.0 - gamma) * (1.0 - gamma)));
}

double env_kl(const MDPEnvironment& train, const MDPEnvironment& test, int n) {
  if (train.mdps.size() != test.mdps.size())
    throw DimensionMismatch("env_kl: environments must share one MDP registry");
  for (std::size_t i = 0; i < train.weights.size(); ++i)
    if (train.weights[i] > 0.0 && test.weights[i] == 0.0)
      return std::numeric_limits<double>::infinity();
  return n * kl_discrete(train.weights, test.weights);
}

namespace {

struct SupersampleRL {
  std::vector<int> task_plus;
  std::vector<int> task_minus;
  std::vector<int> signs;
};

SupersampleRL build_supersample_rl(const MDPEnvironment& env, int n, std::uint64_t seed) {
  Rng pair_rng(derive_seed(seed, 0x5353u));
  Rng sign_rng(derive_seed(seed, 0x5555u));
  SupersampleRL ss;
  ss.task_plus.resize(n);
  ss.task_minus.resize(n);
  ss.signs.resize(n);
  for (int i = 0; i < n; ++i) {
    ss.task_plus[i] = pair_rng.categorical(env.weights.probs);
    ss.task_minus[i] = pair_rng.categorical(env.weights.probs);
    ss.signs[i] = sign_rng.rademacher_positive() ? 1 : -1;
  }
  return ss;
}

int count_target_pairs_rl(const SupersampleRL& ss, int target) {
  int count = 0;
  for (std::size_t i = 0; i < ss.task_plus.size(); ++i)
    if (ss.task_plus[i] == target || ss.task_minus[i] == target) ++count;
  return count;
}

// E_{phi | theta, M} J(pi_phi, M): K adaptation replicates, exact returns.
double adapted_return(const Eigen::VectorXd& theta, const TabularMDP& mdp,
                      const NoiseSchedule& sched, int replicates, std::uint64_t seed) {
  double acc = 0.0;
  for (int k = 0; k < replicates; ++k) {
    const AdaptResult a = inner_adapt(theta, mdp, sched, derive_seed(seed, 0xA1u, k));
    acc += exact_return(mdp, SoftmaxPolicy::from_vector(a.phi, mdp.n_states, mdp.n_actions));
  }
  return acc / replicates;
}

Eigen::VectorXd train_on_selection(const MDPEnvironment& env, const SupersampleRL& ss,
                                   const std::vector<int>& signs, const NoiseSchedule& sched,
                                   std::uint64_t seed) {
  std::vector<TabularMDP> selected;
  selected.reserve(ss.task_plus.size());
  for (std::size_t i = 0; i < ss.task_plus.size(); ++i)
    selected.push_back(env.mdps[signs[i] > 0 ? ss.task_plus[i] : ss.task_minus[i]]);
  return meta_train(selected, sched, seed).first;
}

}  // namespace

SubtaskRLResult gen_sub_rl_estimate(const MDPEnvironment& env, int target_mdp, int n,
                                    const NoiseSchedule& sched, int trials, int replicates,
                                    std::uint64_t seed) {
  env.validate();
  if (target_mdp < 0 || target_mdp >= static_cast<int>(env.mdps.size()))
    throw std::invalid_argument("gen_sub_rl_estimate: target outside environment support");
  struct Draw {
    double value = 0.0;
    bool degenerate = true;
  };
  std::vector<Draw> draws(trials);
  parallel_for(trials, [&](std::size_t k) {
    const SupersampleRL ss = build_supersample_rl(env, n, derive_seed(seed, 0x431u, k));
    const int n_target = count_target_pairs_rl(ss, target_mdp);
    if (n_target == 0) return;
    const Eigen::VectorXd theta =
        train_on_selection(env, ss, ss.signs, sched, derive_seed(seed, 0x432u, k));
    double acc = 0.0;
    for (int i = 0; i < n; ++i) {
      const bool plus_selected = ss.signs[i] > 0;
      const int sel = plus_selected ? ss.task_plus[i] : ss.task_minus[i];
      const int held = plus_selected ? ss.task_minus[i] : ss.task_plus[i];
      if (sel == target_mdp)
        acc += adapted_return(theta, env.mdps[sel], sched, replicates,
                              derive_seed(seed, 0x433u, k, 2 * i));
      if (held == target_mdp)
        acc -= adapted_return(theta, env.mdps[held], sched, replicates,
                              derive_seed(seed, 0x433u, k, 2 * i + 1));
    }
    draws[k].value = acc / n_target;
    draws[k].degenerate = false;
  });
  std::vector<double> values;
  long degenerate = 0;
  for (const auto& d : draws)
    d.degenerate ? void(++degenerate) : values.push_back(d.value);
  if (values.empty()) throw AllDrawsDegenerate("gen_sub_rl_estimate: target never drawn");
  const MeanSE ms = mean_se(values);
  return {ms.mean, ms.se, ms.n, degenerate};
}

SubtaskRLResult subtask_rl_bound(const MDPEnvironment& env, int target_mdp, int n,
                                 const NoiseSchedule& sched, int trials, int sign_resamples,
                                 int replicates, int bins, std::uint64_t seed) {
  env.validate();
  if (sign_resamples < 2)
    throw std::invalid_argument("subtask_rl_bound: need at least 2 sign resamples");
  const double gamma = env.gamma();
  struct Draw {
    double value = 0.0;
    bool degenerate = true;
  };
  std::vector<Draw> draws(trials);
  parallel_for(trials, [&](std::size_t k) {
    const SupersampleRL ss = build_supersample_rl(env, n, derive_seed(seed, 0x612u, k));
    const int n_target = count_target_pairs_rl(ss, target_mdp);
    if (n_target == 0) return;
    Rng rng(derive_seed(seed, 0x613u, k));
    std::vector<std::vector<std::pair<int, double>>> observed(n);
    std::vector<int> signs(n);
    for (int r = 0; r < sign_resamples; ++r) {
      for (int i = 0; i < n; ++i) signs[i] = rng.rademacher_positive() ? 1 : -1;
      const Eigen::VectorXd theta =
          train_on_selection(env, ss, signs, sched, derive_seed(seed, 0x614u, k, r));
      for (int i = 0; i < n; ++i) {
        double f = 0.0;
        if (ss.task_minus[i] == target_mdp)
          f += adapted_return(theta, env.mdps[ss.task_minus[i]], sched, replicates,
                              derive_seed(seed, 0x615u, k, r * 2 * n + 2 * i));
        if (ss.task_plus[i] == target_mdp)
          f -= adapted_return(theta, env.mdps[ss.task_plus[i]], sched, replicates,
                              derive_seed(seed, 0x615u, k, r * 2 * n + 2 * i + 1));
        observed[i].push_back({signs[i], f});
      }
    }
    double acc = 0.0;
    for (int i = 0; i < n; ++i) {
      const double mi = binned_mi_binary(observed[i], bins);
      acc += std::sqrt(2.0 * mi / ((1.0 - gamma) * (1.0 - gamma)));
    }
    draws[k].value = acc / n_target;
    draws[k].degenerate = false;
  });
  std::vector<double> values;
  long degenerate = 0;
  for (const auto& d : draws)
    d.degenerate ? void(++degenerate) : values.push_back(d.value);
  if (values.empty()) throw AllDrawsDegenerate("subtask_rl_bound: target never drawn");
  const MeanSE ms = mean_se(values);
  return {ms.mean, ms.se, ms.n, degenerate};
}

std::string BoundReport::to_json_text() const {
  std::ostringstream os;
  auto num = [](double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.12g", v);
    return std::string(buf);
  };
  os << "{\n"
     << "  \"gap_estimate\": " << num(gap_estimate) << ",\n"
     << "  \"gap_se\": " << num(gap_se) << ",\n"
     << "  \"kl_term\": " << num(kl_term) << ",\n"
     << "  \"e1\": " << num(e1) << ",\n"
     << "  \"e2\": " << num(e2) << ",\n"
     << "  \"n_tasks\": " << n_tasks << ",\n"
     << "  \"gamma\": " << num(gamma) << ",\n"
     << "  \"bound_value\": " << num(bound_value) << ",\n"
     << "  \"holds\": " << (holds ? "true" : "false") << "\n}";
  return os.str();
}

BoundReport make_bound_report(double gap, double gap_se, double kl, double e1, double e2, int n,
                              double gamma) {
  BoundReport r;
  r.gap_estimate = gap;
  r.gap_se = gap_se;
  r.kl_term = kl;
  r.e1 = e1;
  r.e2 = e2;
  r.n_tasks = n;
  r.gamma = gamma;
  r.bound_value = noisy_metagrad_bound(kl, e1, e2, n, gamma);
  r.holds = gap <= r.bound_value + 3.0 * gap_se;
  return r;
}

RegretReport meta_suboptimality_check(const std::vector<Eigen::VectorXd>& candidates,
                                      const MDPEnvironment& train, const MDPEnvironment& test,
                                      int n, const NoiseSchedule& sched, int trials,
                                      int replicates, std::uint64_t seed) {
  if (candidates.size() < 1) throw std::invalid_argument("meta_suboptimality_check: no candidates");
  const int C = static_cast<int>(candidates.size());

  // population scores are draw-independent; pin them once per candidate
  std::vector<double> pop(C);
  for (int c = 0; c < C; ++c)
    pop[c] = population_meta_objective(candidates[c], test, sched, replicates,
                                       derive_seed(seed, 0xF0Fu, c))
                 .mean;
  int best_pop = 0;
  for (int c = 1; c < C; ++c)
    if (pop[c] > pop[best_pop]) best_pop = c;

  struct Draw {
    double left;
    double right;
  };
  std::vector<Draw> draws(trials);
  parallel_for(trials, [&](std::size_t t) {
    Rng rng(derive_seed(seed, 0x21u, t));
    const auto tasks = draw_tasks(train, n, rng);
    std::vector<double> emp(C);
    for (int c = 0; c < C; ++c)
      emp[c] = empirical_meta_objective(candidates[c], tasks, sched, replicates,
                                        derive_seed(seed, 0x22u, t, c))
                   .mean;
    int best_emp = 0;
    for (int c = 1; c < C; ++c)
      if (emp[c] > emp[best_emp]) best_emp = c;
    // left: population regret of the empirical pick
    draws[t].left = pop[best_pop] - pop[best_emp];
    // right: gen_ood(theta_hat) - gen_ood(theta*), one draw of each
    draws[t].right = (emp[best_emp] - pop[best_emp]) - (emp[best_pop] - pop[best_pop]);
  });
  std::vector<double> lefts(trials), rights(trials);
  for (int t = 0; t < trials; ++t) {
    lefts[t] = draws[t].left;
    rights[t] = draws[t].right;
  }
  const MeanSE lm = mean_se(lefts);
  const MeanSE rm = mean_se(rights);
  RegretReport rep;
  rep.left = lm.mean;
  rep.left_se = lm.se;
  rep.right = rm.mean;
  rep.right_se = rm.se;
  rep.holds = lm.mean <= rm.mean + 3.0 * combined_se(lm.se, rm.se);
  return rep;
}

double quantized_plugin_mi(const MDPEnvironment& env, int n, const NoiseSchedule& sched,
                           int trials, std::uint64_t seed, double step) {
  env.validate();
  struct Outcome {
    long task_key;
    std::vector<long> param_key;
  };
  std::vector<Outcome> outcomes(trials);
  parallel_for(trials, [&](std::size_t t) {
    Rng rng(derive_seed(seed, 0x5A5Au, t));
    std::vector<TabularMDP> tasks;
    long task_key = 0;
    for (int i = 0; i < n; ++i) {
      const int idx = rng.categorical(env.weights.probs);
      task_key = task_key * static_cast<long>(env.mdps.size()) + idx;
      tasks.push_back(env.mdps[idx]);
    }
    const auto [theta, log] = meta_train(tasks, sched, derive_seed(seed, 0xA5A5u, t));
    std::vector<long> key;
    key.reserve(theta.size() * (1 + n));
    auto push = [&](const Eigen::VectorXd& v) {
      for (Eigen::Index i = 0; i < v.size(); ++i)
        key.push_back(static_cast<long>(std::llround(v[i] / step)));
    };
    push(theta);
    for (const auto& phi : log.final_phis) push(phi);
    outcomes[t] = {task_key, std::move(key)};
  });

  // empirical joint over (task tuple, quantized output)
  std::map<long, int> x_ids;
  std::map<std::vector<long>, int> y_ids;
  std::map<std::pair<int, int>, double> joint;
  for (const auto& o : outcomes) {
    const int xi = static_cast<int>(x_ids.emplace(o.task_key, x_ids.size()).first->second);
    const int yi = static_cast<int>(y_ids.emplace(o.param_key, y_ids.size()).first->second);
    joint[{xi, yi}] += 1.0 / trials;
  }
  Eigen::MatrixXd mass = Eigen::MatrixXd::Zero(x_ids.size(), y_ids.size());
  for (const auto& [xy, p] : joint) mass(xy.first, xy.second) = p;
  // renormalize away accumulation rounding before the table validates
  mass /= mass.sum();
  return mutual_information(JointTable(mass));
}

}  // namespace metagen
