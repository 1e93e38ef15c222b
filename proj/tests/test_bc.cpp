#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <numeric>
#include <random>
#include <sstream>

#include "arcade/bc.hpp"
#include "arcade/oracle.hpp"
#include "test_support.hpp"

using namespace arcade;

namespace {

const double kHalfLog2Pi = 0.5 * std::log(2.0 * std::numbers::pi);

GaussianPolicy random_policy(Rng& rng, int ds, int da, std::vector<int> hidden) {
  auto p = make_policy(ds, da, hidden, rng);
  std::normal_distribution<double> n(0.0, 1.0);
  for (int k = 0; k < ds; ++k) {
    p.state_mean(k) = n(rng);
    p.state_scale(k) = 0.5 + std::abs(n(rng));
  }
  for (int k = 0; k < da; ++k) {
    p.action_mean(k) = 0.1 * n(rng);
    p.action_scale(k) = 0.5 + std::abs(n(rng));
  }
  return p;
}

std::vector<double> all_params(const GaussianPolicy& p) {
  auto a = p.mean_net.flatten();
  const auto b = p.logstd_net.flatten();
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

void set_params(GaussianPolicy& p, const std::vector<double>& v) {
  const auto n = p.mean_net.parameter_count();
  p.mean_net.assign(std::vector<double>(v.begin(), v.begin() + static_cast<long>(n)));
  p.logstd_net.assign(std::vector<double>(v.begin() + static_cast<long>(n), v.end()));
}

std::vector<double> all_grads(const LossResult& r) {
  auto a = Mlp::flatten(r.grad.mean);
  const auto b = Mlp::flatten(r.grad.logstd);
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

// Largest relative error between backprop and central differences.
double gradient_check(GaussianPolicy p, const Eigen::MatrixXd& s, const Eigen::MatrixXd& a, LossKind kind) {
  const auto analytic = all_grads(batch_loss(p, s, a, kind));
  auto theta = all_params(p);
  constexpr double h = 1e-5;
  double worst = 0.0;
  for (std::size_t i = 0; i < theta.size(); ++i) {
    const double keep = theta[i];
    theta[i] = keep + h;
    set_params(p, theta);
    const double up = batch_loss(p, s, a, kind).loss;
    theta[i] = keep - h;
    set_params(p, theta);
    const double down = batch_loss(p, s, a, kind).loss;
    theta[i] = keep;
    const double fd = (up - down) / (2 * h);
    const double denom = std::max({std::abs(fd), std::abs(analytic[i]), 1e-6});
    worst = std::max(worst, std::abs(fd - analytic[i]) / denom);
  }
  set_params(p, theta);
  return worst;
}

GaussianPolicy constant_policy(int ds, const Eigen::VectorXd& mean, double logstd) {
  Rng rng(0);
  auto p = make_policy(ds, static_cast<int>(mean.size()), {8}, rng);
  p.mean_net.assign(std::vector<double>(p.mean_net.parameter_count(), 0.0));
  p.logstd_net.assign(std::vector<double>(p.logstd_net.parameter_count(), 0.0));
  p.logstd_net.biases().back().setConstant(logstd);
  p.action_mean = mean;
  return p;
}

}  // namespace

TEST(Mlp, TopologyAndParameterCount) {
  Rng rng(1);
  const Mlp net({3, 64, 64, 3}, rng);
  EXPECT_EQ(net.parameter_count(), 3u * 64 + 64 + 64 * 64 + 64 + 64 * 3 + 3);
  EXPECT_THROW(Mlp({3}, rng), ConfigError);
  EXPECT_THROW(net.forward(Eigen::MatrixXd::Zero(2, 1)), DimensionError);
}

TEST(NllLoss, ModeWithUnitSigmaIsConstant) {
  const auto p = constant_policy(3, Eigen::Vector3d(0.1, -0.2, 0.3), 0.0);
  const auto r = nll_loss(p, Eigen::Vector3d(1, 2, 3), Eigen::Vector3d(0.1, -0.2, 0.3));
  EXPECT_NEAR(r.loss, 3 * kHalfLog2Pi, 1e-14);
}

TEST(NllLoss, QuadraticTermScalesWithSquare) {
  const double logstd = -0.7;
  const Eigen::Vector2d mu(0.2, -0.1);
  const auto p = constant_policy(2, mu, logstd);
  const Eigen::Vector2d s(0.3, 0.4), d(0.05, -0.03);
  const double base = 2 * (kHalfLog2Pi + logstd);
  const double q1 = nll_loss(p, s, mu + d).loss - base;
  const double q2 = nll_loss(p, s, mu + 2 * d).loss - base;
  EXPECT_NEAR(q2, 4 * q1, 1e-12);
  EXPECT_NEAR(q1, d.squaredNorm() / (2 * std::exp(2 * logstd)), 1e-12);
}

TEST(NllLoss, ClampBoundsSigma) {
  auto p = constant_policy(2, Eigen::Vector2d::Zero(), -100.0);
  EXPECT_NEAR(p.distribution(Eigen::Vector2d::Zero()).stddev(0), std::exp(-5.0), 1e-15);
  p = constant_policy(2, Eigen::Vector2d::Zero(), 100.0);
  EXPECT_NEAR(p.distribution(Eigen::Vector2d::Zero()).stddev(1), std::exp(2.0), 1e-12);
}

TEST(NllLoss, NonFiniteInputIsError) {
  const auto p = constant_policy(2, Eigen::Vector2d::Zero(), 0.0);
  EXPECT_THROW(nll_loss(p, Eigen::Vector2d(NAN, 0), Eigen::Vector2d::Zero()), ValidationError);
  EXPECT_THROW(nll_loss(p, Eigen::Vector2d::Zero(), Eigen::Vector2d(0, INFINITY)), ValidationError);
  EXPECT_THROW(nll_loss(p, Eigen::Vector3d::Zero(), Eigen::Vector2d::Zero()), DimensionError);
}

TEST(GradientCheck, ThreeParameterToyNet) {
  Rng rng(3);
  auto p = random_policy(rng, 2, 1, {});
  ASSERT_EQ(p.mean_net.parameter_count(), 3u);
  std::normal_distribution<double> n(0.0, 1.0);
  Eigen::MatrixXd s(2, 1), a(1, 1);
  s << n(rng), n(rng);
  a << n(rng);
  EXPECT_LE(gradient_check(p, s, a, LossKind::gaussian_nll), 1e-4);
}

TEST(GradientCheck, TwentyRandomDraws) {
  Rng rng(20);
  std::normal_distribution<double> n(0.0, 1.0);
  for (int draw = 0; draw < 20; ++draw) {
    auto p = random_policy(rng, 3, 2, {5, 4});
    ASSERT_LE(p.mean_net.parameter_count() + p.logstd_net.parameter_count(), 200u);
    Eigen::MatrixXd s(3, 1), a(2, 1);
    for (int k = 0; k < 3; ++k) s(k, 0) = n(rng);
    for (int k = 0; k < 2; ++k) a(k, 0) = n(rng);
    EXPECT_LE(gradient_check(p, s, a, LossKind::gaussian_nll), 1e-4) << "draw " << draw;
  }
}

TEST(GradientCheck, MinibatchAndMse) {
  Rng rng(21);
  std::normal_distribution<double> n(0.0, 1.0);
  auto p = random_policy(rng, 4, 3, {6});
  Eigen::MatrixXd s(4, 7), a(3, 7);
  for (Eigen::Index i = 0; i < s.size(); ++i) s.data()[i] = n(rng);
  for (Eigen::Index i = 0; i < a.size(); ++i) a.data()[i] = n(rng);
  EXPECT_LE(gradient_check(p, s, a, LossKind::gaussian_nll), 1e-4);
  EXPECT_LE(gradient_check(p, s, a, LossKind::mse), 1e-4);
}

TEST(BatchLoss, FullBatchIsOrderFree) {
  Rng rng(22);
  std::normal_distribution<double> n(0.0, 1.0);
  const auto p = random_policy(rng, 3, 3, {8, 8});
  Eigen::MatrixXd s(3, 40), a(3, 40);
  for (Eigen::Index i = 0; i < s.size(); ++i) s.data()[i] = n(rng);
  for (Eigen::Index i = 0; i < a.size(); ++i) a.data()[i] = n(rng);
  std::vector<Eigen::Index> perm(40);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  Eigen::MatrixXd sp(3, 40), ap(3, 40);
  for (Eigen::Index k = 0; k < 40; ++k) {
    sp.col(k) = s.col(perm[static_cast<std::size_t>(k)]);
    ap.col(k) = a.col(perm[static_cast<std::size_t>(k)]);
  }
  const auto r1 = batch_loss(p, s, a), r2 = batch_loss(p, sp, ap);
  EXPECT_NEAR(r1.loss, r2.loss, 1e-12 * std::abs(r1.loss));
  const auto g1 = all_grads(r1), g2 = all_grads(r2);
  for (std::size_t i = 0; i < g1.size(); ++i) EXPECT_NEAR(g1[i], g2[i], 1e-12);
}

TEST(Train, PointDatasetConverges) {
  Demonstration d = support::positions_demo({Vec2(0, 0), Vec2(0, 0)});
  d.steps[0].joints << 0.3, -0.2, 0.1;
  d.steps[1].joints << 0.35, -0.25, 0.12;
  Dataset data{DatasetRole::seed, {d, d, d}};
  for (std::size_t i = 0; i < data.demos.size(); ++i) data.demos[i].id = "d" + std::to_string(i);
  TrainConfig cfg;
  cfg.epochs = 200;
  cfg.seed = 1;
  const auto r = train(data, cfg);
  const auto mu = r.policy.distribution(d.steps[0].joints).mean;
  EXPECT_LE((mu - (d.steps[1].joints - d.steps[0].joints)).cwiseAbs().maxCoeff(), 1e-2);
}

TEST(Train, DeterministicFiniteAndDecreasing) {
  const auto demo = oracle_demonstration(support::reach_task(), support::default_arm(), OracleProfile{}, 3);
  Dataset data{DatasetRole::seed, {demo}};
  TrainConfig cfg;
  cfg.epochs = 20;
  cfg.seed = 9;
  const auto a = train(data, cfg), b = train(data, cfg);
  EXPECT_EQ(all_params(a.policy), all_params(b.policy));
  std::ostringstream sa, sb;
  write_policy(a.policy, sa);
  write_policy(b.policy, sb);
  EXPECT_EQ(sa.str(), sb.str());
  ASSERT_EQ(a.loss_trace.size(), 20u);
  for (double l : a.loss_trace) EXPECT_TRUE(std::isfinite(l));
  EXPECT_LE(a.loss_trace.back(), a.loss_trace.front());
}

TEST(Train, MismatchedDemosAreRejected) {
  auto a = support::positions_demo({Vec2(0, 0), Vec2(0, 0)}, "a");
  auto b = support::positions_demo({Vec2(0, 0), Vec2(0, 0)}, "b");
  for (auto& s : b.steps) s.joints = JointVector::Zero(2);
  EXPECT_THROW(train(Dataset{DatasetRole::seed, {a, b}}, TrainConfig{}), DimensionError);
  EXPECT_THROW(train(Dataset{}, TrainConfig{}), ValidationError);
  TrainConfig bad;
  bad.learning_rate = 0.0;
  EXPECT_THROW(train(Dataset{DatasetRole::seed, {a}}, bad), ConfigError);
}

TEST(Train, SgdAndMseRun) {
  const auto demo = oracle_demonstration(support::reach_task(), support::default_arm(), OracleProfile{}, 3);
  TrainConfig cfg;
  cfg.epochs = 5;
  cfg.optimizer = OptimizerKind::sgd;
  cfg.loss = LossKind::mse;
  cfg.learning_rate = 1e-2;
  const auto r = train(Dataset{DatasetRole::seed, {demo}}, cfg);
  EXPECT_LE(r.loss_trace.back(), r.loss_trace.front());
}

TEST(Rollout, ZeroPolicyStaysAtStart) {
  const auto arm = support::default_arm();
  const auto task = support::reach_task();
  const auto p = constant_policy(3, Eigen::Vector3d::Zero(), -100.0);
  const auto r = rollout(p, task, arm, 30, RolloutMode::mean, 0);
  ASSERT_EQ(r.trace.states.size(), 31u);
  const Vec2 start = forward_kinematics(arm, task.start_joints).position;
  double expected = 0.0;
  for (const auto& w : task.waypoints) expected += (w - start).norm();
  EXPECT_NEAR(r.tce, expected / 3.0, 1e-12);
}

TEST(Rollout, MeanModeIsDeterministic) {
  Rng rng(4);
  const auto p = random_policy(rng, 3, 3, {8});
  const auto a = rollout(p, support::reach_task(), support::default_arm(), 40, RolloutMode::mean, 1);
  const auto b = rollout(p, support::reach_task(), support::default_arm(), 40, RolloutMode::mean, 2);
  EXPECT_EQ(a.trace.ee, b.trace.ee);
  EXPECT_THROW(rollout(p, support::reach_task(), support::default_arm(), 0, RolloutMode::mean, 0), ConfigError);
  EXPECT_THROW(rollout(p, support::pick_task(), support::default_arm(), 5, RolloutMode::mean, 0), DimensionError);
}

TEST(Rollout, ReplayPolicyReachesWaypoints) {
  const auto arm = support::default_arm();
  const auto task = support::reach_task();
  const auto demo = oracle_demonstration(task, arm, OracleProfile{}, 7);
  // Fit the demo's actions as tightly as plain training allows.
  TrainConfig cfg;
  cfg.epochs = 2000;
  cfg.batch_size = 256;
  cfg.learning_rate = 3e-3;
  cfg.loss = LossKind::mse;
  cfg.seed = 2;
  const auto policy = train(Dataset{DatasetRole::seed, {demo}}, cfg).policy;
  EXPECT_LE(rollout(policy, task, arm, demo.size(), RolloutMode::mean, 0).tce, 1e-2);
  const auto e = evaluate(policy, task, arm, demo.size(), 10, 5, RolloutMode::mean);
  EXPECT_LE(e.mean, 1e-2);
  EXPECT_LE(e.stddev, 1e-2);
}

TEST(Rollout, MinimumSigmaStaysInTube) {
  const auto arm = support::default_arm();
  const auto task = support::reach_task();
  const auto demo = oracle_demonstration(task, arm, OracleProfile{}, 7);
  TrainConfig cfg;
  cfg.epochs = 10;
  auto policy = train(Dataset{DatasetRole::seed, {demo}}, cfg).policy;
  policy.logstd_net.assign(std::vector<double>(policy.logstd_net.parameter_count(), 0.0));
  policy.logstd_net.biases().back().setConstant(-100.0);
  const std::size_t horizon = 100;
  const auto mean = rollout(policy, task, arm, horizon, RolloutMode::mean, 0);
  const auto sampled = rollout(policy, task, arm, horizon, RolloutMode::sample, 3);
  const double sigma = policy.distribution(task.start_joints).stddev.maxCoeff();
  EXPECT_NEAR(sigma, std::exp(-5.0), 1e-15);
  for (std::size_t t = 0; t <= horizon; ++t) {
    const double dev = (mean.trace.states[t].joints - sampled.trace.states[t].joints).cwiseAbs().maxCoeff();
    EXPECT_LE(dev, 3 * sigma * static_cast<double>(horizon)) << "step " << t;
  }
}

TEST(Evaluate, SingleTrialHasZeroSpread) {
  const auto p = constant_policy(3, Eigen::Vector3d(0.01, 0, 0), -100.0);
  const auto e = evaluate(p, support::reach_task(), support::default_arm(), 20, 1, 0);
  EXPECT_EQ(e.stddev, 0.0);
  ASSERT_EQ(e.tces.size(), 1u);
  EXPECT_THROW(evaluate(p, support::reach_task(), support::default_arm(), 20, 0, 0), ConfigError);
}

TEST(Evaluate, Reproducible) {
  Rng rng(6);
  const auto p = random_policy(rng, 3, 3, {8});
  const auto a = evaluate(p, support::reach_task(), support::default_arm(), 30, 10, 11);
  const auto b = evaluate(p, support::reach_task(), support::default_arm(), 30, 10, 11);
  EXPECT_EQ(a.tces, b.tces);
  EXPECT_EQ(a.mean, b.mean);
  EXPECT_EQ(a.stddev, b.stddev);
  EXPECT_GT(a.stddev, 0.0);
}

TEST(Checkpoint, RoundTripIsExact) {
  Rng rng(7);
  auto p = random_policy(rng, 4, 4, {16, 8});
  p.logstd_min = -4.0;
  p.logstd_max = 1.5;
  std::stringstream ss;
  write_policy(p, ss);
  const auto q = read_policy(ss);
  EXPECT_EQ(all_params(q), all_params(p));
  EXPECT_EQ(q.state_mean, p.state_mean);
  EXPECT_EQ(q.state_scale, p.state_scale);
  EXPECT_EQ(q.action_mean, p.action_mean);
  EXPECT_EQ(q.action_scale, p.action_scale);
  EXPECT_EQ(q.logstd_min, -4.0);
  EXPECT_EQ(q.logstd_max, 1.5);
  EXPECT_EQ(q.mean_net.sizes(), p.mean_net.sizes());
  const Eigen::Vector4d s(0.1, 0.2, -0.3, 1.0);
  EXPECT_EQ(q.distribution(s).mean, p.distribution(s).mean);
}

TEST(Checkpoint, MalformedIsParseError) {
  std::istringstream wrong_header("arcade-policy v2\n");
  EXPECT_THROW(read_policy(wrong_header), ParseError);
  Rng rng(7);
  std::stringstream ss;
  write_policy(random_policy(rng, 2, 2, {3}), ss);
  std::string text = ss.str();
  text.erase(text.rfind(','), 1);  // drop one parameter
  std::istringstream truncated(text);
  EXPECT_THROW(read_policy(truncated), Error);
  EXPECT_THROW(read_policy(std::filesystem::path("/nonexistent/policy.txt")), MissingArtifactError);
}
