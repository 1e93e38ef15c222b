#pragma once

// Behavioral cloning with a Gaussian MLP policy: one network for the action
// mean, one for the per-dimension log standard deviation.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <istream>
#include <numbers>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "arcade/error.hpp"
#include "arcade/mlp.hpp"
#include "arcade/rng.hpp"
#include "arcade/simenv.hpp"
#include "arcade/text_format.hpp"
#include "arcade/trajectory.hpp"

namespace arcade {

enum class LossKind { gaussian_nll, mse };
enum class OptimizerKind { adam, sgd };

struct GaussianPolicy {
  Mlp mean_net;
  Mlp logstd_net;
  Eigen::VectorXd state_mean;
  Eigen::VectorXd state_scale;
  // The networks predict actions in normalized units; mean and log-std are
  // mapped back with these before clamping.
  Eigen::VectorXd action_mean;
  Eigen::VectorXd action_scale;
  double logstd_min = -5.0;
  double logstd_max = 2.0;

  int state_dim() const { return mean_net.input_size(); }
  int action_dim() const { return mean_net.output_size(); }

  Eigen::MatrixXd normalize(const Eigen::MatrixXd& states) const {
    return (states.colwise() - state_mean).array().colwise() / state_scale.array();
  }

  struct Distribution {
    Eigen::VectorXd mean;
    Eigen::VectorXd stddev;
  };

  Eigen::MatrixXd action_mean_of(const Eigen::MatrixXd& net_out) const {
    return (net_out.array().colwise() * action_scale.array()).colwise() + action_mean.array();
  }

  // Unclamped log standard deviation in action units.
  Eigen::MatrixXd raw_logstd_of(const Eigen::MatrixXd& net_out) const {
    return net_out.array().colwise() + action_scale.array().log();
  }

  Distribution distribution(const Eigen::VectorXd& state) const {
    const Eigen::MatrixXd x = normalize(state);
    Distribution d;
    d.mean = action_mean_of(mean_net.forward(x)).col(0);
    d.stddev = raw_logstd_of(logstd_net.forward(x)).col(0).cwiseMax(logstd_min).cwiseMin(logstd_max).array().exp();
    return d;
  }
};

inline GaussianPolicy make_policy(int state_dim, int action_dim, const std::vector<int>& hidden, Rng& rng) {
  std::vector<int> sizes{state_dim};
  sizes.insert(sizes.end(), hidden.begin(), hidden.end());
  sizes.push_back(action_dim);
  GaussianPolicy p;
  p.mean_net = Mlp(sizes, rng);
  p.logstd_net = Mlp(sizes, rng);
  p.state_mean = Eigen::VectorXd::Zero(state_dim);
  p.state_scale = Eigen::VectorXd::Ones(state_dim);
  p.action_mean = Eigen::VectorXd::Zero(action_dim);
  p.action_scale = Eigen::VectorXd::Ones(action_dim);
  return p;
}

struct PolicyGradients {
  Mlp::Gradients mean;
  Mlp::Gradients logstd;
};

struct LossResult {
  double loss = 0.0;
  PolicyGradients grad;
};

/// Mean per-pair loss over a column batch, with exact parameter gradients.
/// Gaussian NLL per pair: sum_d [log sigma_d + (a_d - mu_d)^2 / (2 sigma_d^2)] + (D/2) log(2 pi).
inline LossResult batch_loss(const GaussianPolicy& policy, const Eigen::MatrixXd& states,
                             const Eigen::MatrixXd& actions, LossKind kind = LossKind::gaussian_nll) {
  if (states.rows() != policy.state_dim() || actions.rows() != policy.action_dim() ||
      states.cols() != actions.cols() || states.cols() == 0) {
    throw DimensionError("state/action batch does not match the policy dimensions");
  }
  const double batch = static_cast<double>(states.cols());
  const Eigen::MatrixXd x = policy.normalize(states);
  Mlp::Cache mean_cache, logstd_cache;
  const Eigen::MatrixXd mu = policy.action_mean_of(policy.mean_net.forward(x, &mean_cache));
  const Eigen::MatrixXd diff = actions - mu;
  const Eigen::ArrayXd& scale = policy.action_scale.array();

  LossResult r;
  if (kind == LossKind::mse) {
    r.loss = 0.5 * diff.squaredNorm() / batch;
    r.grad.mean = policy.mean_net.backward(mean_cache, ((-diff.array()).colwise() * scale / batch).matrix());
    policy.logstd_net.forward(x, &logstd_cache);
    r.grad.logstd = policy.logstd_net.backward(logstd_cache, Eigen::MatrixXd::Zero(actions.rows(), actions.cols()));
    return r;
  }

  const Eigen::MatrixXd raw = policy.raw_logstd_of(policy.logstd_net.forward(x, &logstd_cache));
  const Eigen::ArrayXXd logstd = raw.array().max(policy.logstd_min).min(policy.logstd_max);
  const Eigen::ArrayXXd inv_var = (-2.0 * logstd).exp();
  const Eigen::ArrayXXd sq = diff.array().square();
  const double log_two_pi = std::log(2.0 * std::numbers::pi);
  r.loss = (logstd + 0.5 * sq * inv_var).sum() / batch + 0.5 * static_cast<double>(actions.rows()) * log_two_pi;

  const Eigen::MatrixXd d_mu = ((-(diff.array() * inv_var)).colwise() * scale / batch).matrix();
  // The clamp passes gradient only strictly inside its bounds.
  const Eigen::ArrayXXd inside =
      ((raw.array() > policy.logstd_min) && (raw.array() < policy.logstd_max)).cast<double>();
  const Eigen::MatrixXd d_logstd = ((1.0 - sq * inv_var) * inside / batch).matrix();
  r.grad.mean = policy.mean_net.backward(mean_cache, d_mu);
  r.grad.logstd = policy.logstd_net.backward(logstd_cache, d_logstd);
  return r;
}

inline LossResult nll_loss(const GaussianPolicy& policy, const Eigen::VectorXd& state, const Eigen::VectorXd& action) {
  if (!state.allFinite() || !action.allFinite()) throw ValidationError("non-finite state or action");
  return batch_loss(policy, state, action, LossKind::gaussian_nll);
}

struct TrainConfig {
  std::size_t epochs = 100;
  std::size_t batch_size = 64;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::uint64_t seed = 0;
  bool include_gripper = false;
  std::vector<int> hidden = {64, 64};
  LossKind loss = LossKind::gaussian_nll;
  OptimizerKind optimizer = OptimizerKind::adam;
  double logstd_min = -5.0;
  double logstd_max = 2.0;

  void validate() const {
    if (!(learning_rate > 0.0)) throw ConfigError("learning rate must be > 0");
    if (batch_size < 1) throw ConfigError("batch size must be >= 1");
    if (epochs < 1) throw ConfigError("epochs must be >= 1");
    if (!(logstd_min < logstd_max)) throw ConfigError("log-std bounds require min < max");
  }
};

struct TrainResult {
  GaussianPolicy policy;
  std::vector<double> loss_trace;  // mean per-pair loss, one entry per epoch
};

struct PairMatrices {
  Eigen::MatrixXd states;
  Eigen::MatrixXd actions;
};

inline PairMatrices collect_pairs(const Dataset& data, bool include_gripper) {
  if (data.demos.empty()) throw ValidationError("cannot train on an empty dataset");
  std::vector<StateAction> pairs;
  for (const auto& d : data.demos) {
    auto p = state_action_pairs(d, include_gripper);
    pairs.insert(pairs.end(), std::make_move_iterator(p.begin()), std::make_move_iterator(p.end()));
  }
  const auto ds = pairs.front().state.size(), da = pairs.front().action.size();
  PairMatrices m{Eigen::MatrixXd(ds, static_cast<Eigen::Index>(pairs.size())),
                 Eigen::MatrixXd(da, static_cast<Eigen::Index>(pairs.size()))};
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    if (pairs[i].state.size() != ds || pairs[i].action.size() != da) {
      throw DimensionError("state/action dimensions differ across demonstrations");
    }
    m.states.col(static_cast<Eigen::Index>(i)) = pairs[i].state;
    m.actions.col(static_cast<Eigen::Index>(i)) = pairs[i].action;
  }
  return m;
}

inline TrainResult train(const Dataset& data, const TrainConfig& config) {
  config.validate();
  const auto pairs = collect_pairs(data, config.include_gripper);
  const auto n = pairs.states.cols();
  Rng rng(config.seed);

  TrainResult r;
  r.policy = make_policy(static_cast<int>(pairs.states.rows()), static_cast<int>(pairs.actions.rows()),
                         config.hidden, rng);
  r.policy.logstd_min = config.logstd_min;
  r.policy.logstd_max = config.logstd_max;
  r.policy.state_mean = pairs.states.rowwise().mean();
  const Eigen::VectorXd var =
      (pairs.states.colwise() - r.policy.state_mean).array().square().rowwise().sum() / static_cast<double>(n);
  r.policy.state_scale = var.array().sqrt().unaryExpr([](double s) { return s > 1e-8 ? s : 1.0; });
  r.policy.action_mean = pairs.actions.rowwise().mean();
  const Eigen::VectorXd avar =
      (pairs.actions.colwise() - r.policy.action_mean).array().square().rowwise().sum() / static_cast<double>(n);
  r.policy.action_scale = avar.array().sqrt().unaryExpr([](double s) { return s > 1e-8 ? s : 1.0; });

  const Adam::Options opt{config.learning_rate, config.beta1, config.beta2, config.epsilon};
  Adam mean_opt(r.policy.mean_net, opt), logstd_opt(r.policy.logstd_net, opt);

  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  const auto bs = static_cast<Eigen::Index>(config.batch_size);
  Eigen::MatrixXd sb, ab;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double total = 0.0;
    for (Eigen::Index start = 0; start < n; start += bs) {
      const Eigen::Index m = std::min(bs, n - start);
      sb.resize(pairs.states.rows(), m);
      ab.resize(pairs.actions.rows(), m);
      for (Eigen::Index k = 0; k < m; ++k) {
        sb.col(k) = pairs.states.col(order[static_cast<std::size_t>(start + k)]);
        ab.col(k) = pairs.actions.col(order[static_cast<std::size_t>(start + k)]);
      }
      const auto loss = batch_loss(r.policy, sb, ab, config.loss);
      total += loss.loss * static_cast<double>(m);
      if (config.optimizer == OptimizerKind::adam) {
        mean_opt.step(r.policy.mean_net, loss.grad.mean);
        logstd_opt.step(r.policy.logstd_net, loss.grad.logstd);
      } else {
        sgd_step(r.policy.mean_net, loss.grad.mean, config.learning_rate);
        sgd_step(r.policy.logstd_net, loss.grad.logstd, config.learning_rate);
      }
    }
    r.loss_trace.push_back(total / static_cast<double>(n));
  }
  return r;
}

// ---------------------------------------------------------------------------

enum class RolloutMode { mean, sample };

struct RolloutResult {
  Trace trace;
  double tce = 0.0;
};

inline RolloutResult rollout(const GaussianPolicy& policy, const TaskSpec& task, const ArmModel& arm,
                             std::size_t horizon, RolloutMode mode, std::uint64_t seed) {
  if (horizon < 1) throw ConfigError("rollout horizon must be >= 1");
  if (policy.action_dim() != action_dim(arm, task)) {
    throw DimensionError("policy action dimension does not match the task");
  }
  Rng rng(seed);
  std::normal_distribution<double> noise(0.0, 1.0);
  RolloutResult r;
  SimState s = initial_state(task);
  append(r.trace, arm, s);
  for (std::size_t t = 0; t < horizon; ++t) {
    const auto dist = policy.distribution(observe(s, task));
    Eigen::VectorXd a = dist.mean;
    if (mode == RolloutMode::sample) {
      for (Eigen::Index k = 0; k < a.size(); ++k) a(k) += dist.stddev(k) * noise(rng);
    }
    s = step(s, a, arm, task);
    append(r.trace, arm, s);
  }
  r.tce = tce(r.trace, task);
  return r;
}

struct EvalSummary {
  double mean = 0.0;
  double stddev = 0.0;  // sample standard deviation; 0 for a single trial
  std::vector<double> tces;
};

inline EvalSummary evaluate(const GaussianPolicy& policy, const TaskSpec& task, const ArmModel& arm,
                            std::size_t horizon, std::size_t trials, std::uint64_t seed,
                            RolloutMode mode = RolloutMode::sample) {
  if (trials < 1) throw ConfigError("trials must be >= 1");
  EvalSummary e;
  for (std::size_t i = 0; i < trials; ++i) {
    e.tces.push_back(rollout(policy, task, arm, horizon, mode, derive_seed(seed, i)).tce);
  }
  e.mean = std::accumulate(e.tces.begin(), e.tces.end(), 0.0) / static_cast<double>(trials);
  if (trials > 1) {
    double ss = 0.0;
    for (double t : e.tces) ss += (t - e.mean) * (t - e.mean);
    e.stddev = std::sqrt(ss / static_cast<double>(trials - 1));
  }
  return e;
}

// ---------------------------------------------------------------------------
// Checkpoint format (text, full-precision doubles):
//   arcade-policy v1
//   logstd_bounds=[lo,hi]
//   state_mean=[...]
//   state_scale=[...]
//   action_mean=[...]
//   action_scale=[...]
//   mean_net=[sizes...]
//   mean_params=[...]
//   logstd_net=[sizes...]
//   logstd_params=[...]

inline void write_policy(const GaussianPolicy& p, std::ostream& os) {
  auto sizes = [](const Mlp& m) {
    std::vector<long> s(m.sizes().begin(), m.sizes().end());
    return text::format_list(s);
  };
  auto params = [](const Mlp& m) {
    const auto v = m.flatten();
    return text::format_vector(Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size())));
  };
  os << "arcade-policy v1\n"
     << "logstd_bounds=" << text::format_vector(Eigen::Vector2d(p.logstd_min, p.logstd_max)) << '\n'
     << "state_mean=" << text::format_vector(p.state_mean) << '\n'
     << "state_scale=" << text::format_vector(p.state_scale) << '\n'
     << "action_mean=" << text::format_vector(p.action_mean) << '\n'
     << "action_scale=" << text::format_vector(p.action_scale) << '\n'
     << "mean_net=" << sizes(p.mean_net) << '\n'
     << "mean_params=" << params(p.mean_net) << '\n'
     << "logstd_net=" << sizes(p.logstd_net) << '\n'
     << "logstd_params=" << params(p.logstd_net) << '\n';
}

inline void write_policy(const GaussianPolicy& p, const std::filesystem::path& path) {
  std::ostringstream buf;
  write_policy(p, buf);
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw Error("cannot open '" + path.string() + "' for writing");
  os << buf.str();
}

inline GaussianPolicy read_policy(std::istream& is) {
  std::string raw;
  std::size_t line = 0;
  auto next = [&](std::string_view key) {
    while (std::getline(is, raw)) {
      ++line;
      if (raw.empty() || raw.front() == '#') continue;
      std::string_view k, v;
      if (!text::split_kv(raw, k, v) || k != key) throw ParseError(line, "expected '" + std::string(key) + "='");
      return std::string(v);
    }
    throw ParseError(line, "unexpected end of policy file");
  };
  auto vec = [&](std::string_view key) {
    auto v = text::parse_vector(next(key));
    if (!v) throw ParseError(line, "malformed vector for '" + std::string(key) + "'");
    return Eigen::VectorXd(Eigen::Map<const Eigen::VectorXd>(v->data(), static_cast<Eigen::Index>(v->size())));
  };
  auto net = [&](std::string_view sizes_key, std::string_view params_key) {
    auto s = text::parse_index_list(next(sizes_key));
    if (!s) throw ParseError(line, "malformed topology");
    Mlp m = Mlp::with_topology(std::vector<int>(s->begin(), s->end()));
    const Eigen::VectorXd p = vec(params_key);
    m.assign(std::vector<double>(p.data(), p.data() + p.size()));
    return m;
  };

  if (!std::getline(is, raw) || raw != "arcade-policy v1") throw ParseError(1, "missing 'arcade-policy v1' header");
  ++line;
  GaussianPolicy p;
  const auto bounds = vec("logstd_bounds");
  if (bounds.size() != 2) throw ParseError(line, "logstd_bounds needs two values");
  p.logstd_min = bounds(0);
  p.logstd_max = bounds(1);
  p.state_mean = vec("state_mean");
  p.state_scale = vec("state_scale");
  p.action_mean = vec("action_mean");
  p.action_scale = vec("action_scale");
  p.mean_net = net("mean_net", "mean_params");
  p.logstd_net = net("logstd_net", "logstd_params");
  if (p.state_mean.size() != p.state_dim() || p.state_scale.size() != p.state_dim() ||
      p.action_mean.size() != p.action_dim() || p.action_scale.size() != p.action_dim() ||
      p.logstd_net.input_size() != p.state_dim() || p.logstd_net.output_size() != p.action_dim()) {
    throw ValidationError("policy checkpoint has inconsistent dimensions");
  }
  return p;
}

inline GaussianPolicy read_policy(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw MissingArtifactError("cannot open policy checkpoint '" + path.string() + "'");
  return read_policy(is);
}

}  // namespace arcade
