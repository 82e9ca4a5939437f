#include "metagen/meta_supervised.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "metagen/errors.hpp"
#include "metagen/parallel.hpp"

namespace metagen {

using nlohmann::json;

void FiniteTask::validate() const {
  if (loss_table.empty()) throw std::invalid_argument("FiniteTask: empty hypothesis grid");
  for (const auto& row : loss_table) {
    if (static_cast<int>(row.size()) != alphabet_size())
      throw DimensionMismatch("FiniteTask: loss table width != alphabet size");
    for (double v : row)
      if (!(v >= 0.0 && v <= 1.0))
        throw std::invalid_argument("FiniteTask: loss outside [0,1]");
  }
}

void TaskEnvironment::validate() const {
  if (tasks.empty()) throw std::invalid_argument("TaskEnvironment: no tasks");
  if (weights.size() != tasks.size())
    throw DimensionMismatch("TaskEnvironment: weights size != task count");
  for (const auto& t : tasks) t.validate();
}

const LossTable& TaskEnvironment::shared_loss() const {
  validate();
  const LossTable& first = tasks.front().loss_table;
  for (const auto& t : tasks)
    if (t.loss_table != first)
      throw std::invalid_argument(
          "TaskEnvironment: tasks carry different loss tables; the learner needs a shared one");
  return first;
}

TaskEnvironment TaskEnvironment::from_json_text(const std::string& text) {
  const json j = json::parse(text);
  TaskEnvironment env;
  for (const auto& tj : j.at("tasks")) {
    FiniteTask t;
    t.sample_dist = DiscreteDistribution(tj.at("sample_dist").get<std::vector<double>>());
    t.loss_table = tj.at("loss_table").get<LossTable>();
    env.tasks.push_back(std::move(t));
  }
  env.weights = DiscreteDistribution(j.at("weights").get<std::vector<double>>());
  env.validate();
  return env;
}

TaskEnvironment TaskEnvironment::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw EnvironmentFileMissing("cannot open environment file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return from_json_text(ss.str());
}

std::string TaskEnvironment::to_json_text() const {
  json tasks_j = json::array();
  for (const auto& t : tasks)
    tasks_j.push_back({{"sample_dist", t.sample_dist.probs}, {"loss_table", t.loss_table}});
  return json{{"tasks", tasks_j}, {"weights", weights.probs}}.dump(2);
}

void GibbsLearnerSpec::validate() const {
  if (n_hypotheses < 1 || n_meta < 1) throw std::invalid_argument("GibbsLearnerSpec: empty grid");
  if (!(base_temperature > 0.0) || !(meta_temperature > 0.0))
    throw std::invalid_argument("GibbsLearnerSpec: temperatures must be > 0");
  if (!(coupling >= 0.0)) throw std::invalid_argument("GibbsLearnerSpec: negative coupling");
}

double GibbsLearnerSpec::penalty(int w, int theta) const {
  const double pw = n_hypotheses > 1 ? static_cast<double>(w) / (n_hypotheses - 1) : 0.5;
  const double pt = n_meta > 1 ? static_cast<double>(theta) / (n_meta - 1) : 0.5;
  return std::abs(pw - pt);
}

double hypothesis_empirical_risk(int w, const Dataset& data, const LossTable& loss) {
  double acc = 0.0;
  for (int z : data) acc += loss[w][z];
  return acc / static_cast<double>(data.size());
}

namespace {

DiscreteDistribution gibbs_from_scores(const std::vector<double>& neg_energy) {
  double mx = neg_energy.front();
  for (double v : neg_energy) mx = std::max(mx, v);
  std::vector<double> w(neg_energy.size());
  for (std::size_t i = 0; i < w.size(); ++i) w[i] = std::exp(neg_energy[i] - mx);
  return DiscreteDistribution::from_weights(w);
}

}  // namespace

DiscreteDistribution base_posterior(int theta, const Dataset& data, const LossTable& loss,
                                    const GibbsLearnerSpec& spec) {
  if (data.empty()) throw std::invalid_argument("base_posterior: empty dataset");
  const double m = static_cast<double>(data.size());
  std::vector<double> score(spec.n_hypotheses);
  for (int w = 0; w < spec.n_hypotheses; ++w) {
    const double energy =
        m * hypothesis_empirical_risk(w, data, loss) + spec.coupling * spec.penalty(w, theta);
    score[w] = -spec.base_temperature * energy;
  }
  return gibbs_from_scores(score);
}

double empirical_meta_risk(int theta, const std::vector<Dataset>& datasets, const LossTable& loss,
                           const GibbsLearnerSpec& spec) {
  double acc = 0.0;
  for (const auto& data : datasets) {
    const DiscreteDistribution post = base_posterior(theta, data, loss, spec);
    for (int w = 0; w < spec.n_hypotheses; ++w)
      if (post[w] > 0.0) acc += post[w] * hypothesis_empirical_risk(w, data, loss);
  }
  return acc / static_cast<double>(datasets.size());
}

DiscreteDistribution meta_posterior(const std::vector<Dataset>& datasets, const LossTable& loss,
                                    const GibbsLearnerSpec& spec) {
  std::vector<double> score(spec.n_meta);
  for (int t = 0; t < spec.n_meta; ++t)
    score[t] = -spec.meta_temperature * empirical_meta_risk(t, datasets, loss, spec);
  return gibbs_from_scores(score);
}

namespace {

// Enumeration of alphabet^m datasets in lexicographic order; index digits are
// least-significant-first.
Dataset dataset_from_index(long idx, int m, int alphabet) {
  Dataset d(m);
  for (int j = 0; j < m; ++j) {
    d[j] = static_cast<int>(idx % alphabet);
    idx /= alphabet;
  }
  return d;
}

long pow_checked(long base, int exp, long cap) {
  long v = 1;
  for (int i = 0; i < exp; ++i) {
    v *= base;
    if (v > cap) return cap + 1;
  }
  return v;
}

// P(dataset | task t) and the environment-mixture marginal over datasets.
std::vector<double> dataset_probs_for_task(const FiniteTask& task, int m, long n_datasets) {
  std::vector<double> out(n_datasets);
  for (long z = 0; z < n_datasets; ++z) {
    const Dataset d = dataset_from_index(z, m, task.alphabet_size());
    double p = 1.0;
    for (int s : d) p *= task.sample_dist[s];
    out[z] = p;
  }
  return out;
}

std::vector<double> dataset_marginal(const TaskEnvironment& env, int m, long n_datasets) {
  std::vector<double> out(n_datasets, 0.0);
  for (std::size_t t = 0; t < env.tasks.size(); ++t) {
    const auto per_task = dataset_probs_for_task(env.tasks[t], m, n_datasets);
    for (long z = 0; z < n_datasets; ++z) out[z] += env.weights[t] * per_task[z];
  }
  return out;
}

}  // namespace

double population_meta_risk(int theta, const TaskEnvironment& env, int m,
                            const GibbsLearnerSpec& spec) {
  env.validate();
  spec.validate();
  const int alphabet = env.tasks.front().alphabet_size();
  const long n_datasets = pow_checked(alphabet, m, 1000000);
  if (n_datasets > 1000000)
    throw EnumerationTooLarge("population_meta_risk: |alphabet|^m exceeds 1e6");
  const LossTable& loss = env.shared_loss();
  double acc = 0.0;
  for (std::size_t t = 0; t < env.tasks.size(); ++t) {
    const FiniteTask& task = env.tasks[t];
    if (env.weights[t] == 0.0) continue;
    double task_acc = 0.0;
    for (long z = 0; z < n_datasets; ++z) {
      const Dataset d = dataset_from_index(z, m, alphabet);
      double pz = 1.0;
      for (int s : d) pz *= task.sample_dist[s];
      if (pz == 0.0) continue;
      const DiscreteDistribution post = base_posterior(theta, d, loss, spec);
      double risk = 0.0;
      for (int w = 0; w < spec.n_hypotheses; ++w) {
        if (post[w] == 0.0) continue;
        double pop = 0.0;  // E_{S ~ task} loss(w, S), the task's own loss
        for (int s = 0; s < alphabet; ++s) pop += task.sample_dist[s] * task.loss_table[w][s];
        risk += post[w] * pop;
      }
      task_acc += pz * risk;
    }
    acc += env.weights[t] * task_acc;
  }
  return acc;
}

ExactJoint exact_joint_enumeration(const TaskEnvironment& env, int n, int m,
                                   const GibbsLearnerSpec& spec) {
  env.validate();
  spec.validate();
  const int alphabet = env.tasks.front().alphabet_size();
  const long n_datasets = pow_checked(alphabet, m, 10000000);
  const long per_task = static_cast<long>(env.tasks.size()) * n_datasets;
  const long guard = pow_checked(per_task, n, 10000000 / std::max(1, spec.n_meta));
  if (guard * spec.n_meta > 10000000)
    throw EnumerationTooLarge("exact_joint_enumeration: state space exceeds 1e7");

  const LossTable& loss = env.shared_loss();
  const auto z_marginal = dataset_marginal(env, m, n_datasets);

  long z_space = 1;
  for (int i = 0; i < n; ++i) z_space *= n_datasets;
  long w_space = 1;
  for (int i = 0; i < n; ++i) w_space *= spec.n_hypotheses;
  const long y_space = spec.n_meta * w_space;

  Eigen::MatrixXd joint = Eigen::MatrixXd::Zero(z_space, y_space);
  Eigen::MatrixXd theta_joint = Eigen::MatrixXd::Zero(z_space, spec.n_meta);

  std::vector<Dataset> datasets(n);
  for (long zt = 0; zt < z_space; ++zt) {
    long rem = zt;
    double pz = 1.0;
    for (int i = 0; i < n; ++i) {
      const long zi = rem % n_datasets;
      rem /= n_datasets;
      datasets[i] = dataset_from_index(zi, m, alphabet);
      pz *= z_marginal[zi];
    }
    if (pz == 0.0) continue;
    const DiscreteDistribution theta_post = meta_posterior(datasets, loss, spec);
    for (int theta = 0; theta < spec.n_meta; ++theta) {
      const double ptheta = theta_post[theta];
      theta_joint(zt, theta) = pz * ptheta;
      if (ptheta == 0.0) continue;
      std::vector<DiscreteDistribution> posts;
      posts.reserve(n);
      for (int i = 0; i < n; ++i) posts.push_back(base_posterior(theta, datasets[i], loss, spec));
      for (long wt = 0; wt < w_space; ++wt) {
        long wrem = wt;
        double pw = 1.0;
        for (int i = 0; i < n; ++i) {
          pw *= posts[i][wrem % spec.n_hypotheses];
          wrem /= spec.n_hypotheses;
        }
        if (pw == 0.0) continue;
        joint(zt, static_cast<long>(theta) * w_space + wt) = pz * ptheta * pw;
      }
    }
  }

  ExactJoint out{JointTable(joint), 0.0, 0.0, static_cast<int>(n_datasets)};
  out.i_joint = mutual_information(out.joint);
  out.i_theta_data = mutual_information(JointTable(theta_joint));
  return out;
}

double dataset_marginal_kl(const TaskEnvironment& train, const TaskEnvironment& test, int n,
                           int m) {
  const int alphabet = train.tasks.front().alphabet_size();
  if (test.tasks.front().alphabet_size() != alphabet)
    throw DimensionMismatch("dataset_marginal_kl: alphabets differ");
  const long n_datasets = pow_checked(alphabet, m, 10000000);
  long z_space = 1;
  for (int i = 0; i < n; ++i) {
    z_space *= n_datasets;
    if (z_space > 10000000) throw EnumerationTooLarge("dataset_marginal_kl: space exceeds 1e7");
  }
  const auto p1 = dataset_marginal(train, m, n_datasets);
  const auto q1 = dataset_marginal(test, m, n_datasets);
  // product over i of independent marginals: KL over the full tuple space
  double total = 0.0;
  for (long zt = 0; zt < z_space; ++zt) {
    long rem = zt;
    double p = 1.0, q = 1.0;
    for (int i = 0; i < n; ++i) {
      p *= p1[rem % n_datasets];
      q *= q1[rem % n_datasets];
      rem /= n_datasets;
    }
    if (p == 0.0) continue;
    if (q == 0.0)
      throw AbsoluteContinuityViolation("dataset_marginal_kl: test marginal vanishes on support");
    total += p * std::log(p / q);
  }
  return std::max(0.0, total);
}

double mismatch_gen_bound(double i_joint, double kl_datasets, double sigma, int n, int m) {
  if (i_joint < 0.0 || kl_datasets < 0.0)
    throw std::invalid_argument("mismatch_gen_bound: negative information term");
  return std::sqrt(2.0 * sigma * sigma * (i_joint + kl_datasets) /
                   (static_cast<double>(n) * m));
}

double ood_gap_exact(const TaskEnvironment& train, const TaskEnvironment& test, int n, int m,
                     const GibbsLearnerSpec& spec) {
  const int alphabet = train.tasks.front().alphabet_size();
  const long n_datasets = pow_checked(alphabet, m, 10000000);
  long z_space = 1;
  for (int i = 0; i < n; ++i) {
    z_space *= n_datasets;
    if (z_space > 10000000) throw EnumerationTooLarge("ood_gap_exact: space exceeds 1e7");
  }
  const LossTable& loss = train.shared_loss();
  const auto z_marginal = dataset_marginal(train, m, n_datasets);

  // population side depends on theta only
  std::vector<double> pop(spec.n_meta);
  for (int theta = 0; theta < spec.n_meta; ++theta)
    pop[theta] = population_meta_risk(theta, test, m, spec);

  double gap = 0.0;
  std::vector<Dataset> datasets(n);
  for (long zt = 0; zt < z_space; ++zt) {
    long rem = zt;
    double pz = 1.0;
    for (int i = 0; i < n; ++i) {
      const long zi = rem % n_datasets;
      rem /= n_datasets;
      datasets[i] = dataset_from_index(zi, m, alphabet);
      pz *= z_marginal[zi];
    }
    if (pz == 0.0) continue;
    const DiscreteDistribution theta_post = meta_posterior(datasets, loss, spec);
    for (int theta = 0; theta < spec.n_meta; ++theta) {
      if (theta_post[theta] == 0.0) continue;
      const double emp = empirical_meta_risk(theta, datasets, loss, spec);
      gap += pz * theta_post[theta] * (emp - pop[theta]);
    }
  }
  return gap;
}

SuperSample build_supersample(const TaskEnvironment& env, int n, int m, std::uint64_t seed) {
  env.validate();
  // separate streams so signs stay independent of pair contents
  Rng pair_rng(derive_seed(seed, 0x5353u));   // "SS"
  Rng sign_rng(derive_seed(seed, 0x5555u));   // "UU"
  SuperSample ss;
  ss.pairs.resize(n);
  ss.signs.resize(n);
  const int alphabet = env.tasks.front().alphabet_size();
  auto draw = [&](int& task_out, Dataset& data_out) {
    task_out = pair_rng.categorical(env.weights.probs);
    data_out.resize(m);
    for (int j = 0; j < m; ++j)
      data_out[j] = pair_rng.categorical(env.tasks[task_out].sample_dist.probs);
    (void)alphabet;
  };
  for (int i = 0; i < n; ++i) {
    draw(ss.pairs[i].task_plus, ss.pairs[i].data_plus);
    draw(ss.pairs[i].task_minus, ss.pairs[i].data_minus);
    ss.signs[i] = sign_rng.rademacher_positive() ? 1 : -1;
  }
  return ss;
}

namespace {

int count_target_pairs(const SuperSample& ss, int target) {
  int count = 0;
  for (const auto& p : ss.pairs)
    if (p.task_plus == target || p.task_minus == target) ++count;
  return count;
}

std::vector<Dataset> selected_datasets(const SuperSample& ss, const std::vector<int>& signs) {
  std::vector<Dataset> out;
  out.reserve(ss.pairs.size());
  for (std::size_t i = 0; i < ss.pairs.size(); ++i)
    out.push_back(signs[i] > 0 ? ss.pairs[i].data_plus : ss.pairs[i].data_minus);
  return out;
}

// E_{W | theta, Z} of the empirical risk on Z itself.
double gibbs_empirical_risk(int theta, const Dataset& data, const LossTable& loss,
                            const GibbsLearnerSpec& spec) {
  const DiscreteDistribution post = base_posterior(theta, data, loss, spec);
  double acc = 0.0;
  for (int w = 0; w < spec.n_hypotheses; ++w)
    if (post[w] > 0.0) acc += post[w] * hypothesis_empirical_risk(w, data, loss);
  return acc;
}

}  // namespace

SubtaskResult gen_sub_estimate(const TaskEnvironment& env, int target_task, int n, int m,
                               const GibbsLearnerSpec& spec, int trials, std::uint64_t seed) {
  if (trials < 1) throw std::invalid_argument("gen_sub_estimate: trials must be >= 1");
  const LossTable& loss = env.shared_loss();
  struct Draw {
    double value = 0.0;
    bool degenerate = true;
  };
  std::vector<Draw> draws(trials);
  parallel_for(trials, [&](std::size_t k) {
    const SuperSample ss = build_supersample(env, n, m, derive_seed(seed, 0xE57Eu, k));
    const int n_target = count_target_pairs(ss, target_task);
    if (n_target == 0) return;
    Rng rng(derive_seed(seed, 0x7E7Au, k));
    const auto selected = selected_datasets(ss, ss.signs);
    const DiscreteDistribution theta_post = meta_posterior(selected, loss, spec);
    const int theta = rng.categorical(theta_post.probs);
    double acc = 0.0;
    for (int i = 0; i < n; ++i) {
      const auto& pair = ss.pairs[i];
      const bool plus_selected = ss.signs[i] > 0;
      const int sel_task = plus_selected ? pair.task_plus : pair.task_minus;
      const int held_task = plus_selected ? pair.task_minus : pair.task_plus;
      const Dataset& sel_data = plus_selected ? pair.data_plus : pair.data_minus;
      const Dataset& held_data = plus_selected ? pair.data_minus : pair.data_plus;
      if (sel_task == target_task) acc += gibbs_empirical_risk(theta, sel_data, loss, spec);
      if (held_task == target_task) acc -= gibbs_empirical_risk(theta, held_data, loss, spec);
    }
    draws[k].value = acc / n_target;
    draws[k].degenerate = false;
  });
  std::vector<double> values;
  long degenerate = 0;
  for (const auto& d : draws) {
    if (d.degenerate)
      ++degenerate;
    else
      values.push_back(d.value);
  }
  if (values.empty())
    throw AllDrawsDegenerate("gen_sub_estimate: target task never appeared in " +
                             std::to_string(trials) + " draws");
  const MeanSE ms = mean_se(values);
  return {ms.mean, ms.se, ms.n, degenerate};
}

SubtaskResult subtask_gen_bound(const TaskEnvironment& env, int target_task, int n, int m,
                                const GibbsLearnerSpec& spec, int trials, int sign_resamples,
                                int bins, std::uint64_t seed) {
  if (trials < 1) throw std::invalid_argument("subtask_gen_bound: trials must be >= 1");
  if (sign_resamples < 2)
    throw std::invalid_argument("subtask_gen_bound: need at least 2 sign resamples");
  const LossTable& loss = env.shared_loss();
  const double sigma2 = kLossSubGaussianSigma * kLossSubGaussianSigma;
  struct Draw {
    double value = 0.0;
    bool degenerate = true;
  };
  std::vector<Draw> draws(trials);
  parallel_for(trials, [&](std::size_t k) {
    const SuperSample ss = build_supersample(env, n, m, derive_seed(seed, 0xB0D2u, k));
    const int n_target = count_target_pairs(ss, target_task);
    if (n_target == 0) return;
    Rng rng(derive_seed(seed, 0xB0D3u, k));
    // witness f_i has fixed +- roles; it depends on the signs only through theta
    std::vector<std::vector<std::pair<int, double>>> observed(n);
    std::vector<int> signs(n);
    for (int r = 0; r < sign_resamples; ++r) {
      for (int i = 0; i < n; ++i) signs[i] = rng.rademacher_positive() ? 1 : -1;
      const auto selected = selected_datasets(ss, signs);
      const DiscreteDistribution theta_post = meta_posterior(selected, loss, spec);
      const int theta = rng.categorical(theta_post.probs);
      for (int i = 0; i < n; ++i) {
        const auto& pair = ss.pairs[i];
        double f = 0.0;
        if (pair.task_minus == target_task)
          f += gibbs_empirical_risk(theta, pair.data_minus, loss, spec);
        if (pair.task_plus == target_task)
          f -= gibbs_empirical_risk(theta, pair.data_plus, loss, spec);
        observed[i].push_back({signs[i], f});
      }
    }
    double acc = 0.0;
    for (int i = 0; i < n; ++i) {
      const double mi = binned_mi_binary(observed[i], bins);
      acc += std::sqrt(2.0 * sigma2 * mi / static_cast<double>(m));
    }
    draws[k].value = acc / n_target;
    draws[k].degenerate = false;
  });
  std::vector<double> values;
  long degenerate = 0;
  for (const auto& d : draws) {
    if (d.degenerate)
      ++degenerate;
    else
      values.push_back(d.value);
  }
  if (values.empty())
    throw AllDrawsDegenerate("subtask_gen_bound: target task never appeared in " +
                             std::to_string(trials) + " draws");
  const MeanSE ms = mean_se(values);
  return {ms.mean, ms.se, ms.n, degenerate};
}

}  // namespace metagen
