#pragma once

// Pipeline configuration, read from JSON. Every key is optional; missing keys
// keep the defaults below. Unknown keys are rejected so typos surface early.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "arcade/autovalidate.hpp"
#include "arcade/bc.hpp"
#include "arcade/error.hpp"
#include "arcade/generator.hpp"
#include "arcade/keypose.hpp"
#include "arcade/oracle.hpp"
#include "arcade/simenv.hpp"

namespace arcade {

struct ReviewConfig {
  std::size_t batch_size = 15;
  std::string host = "127.0.0.1";
  int port = 8080;
  std::string ui_dir;  // static assets for the browser client; empty = API only
};

struct EvalConfig {
  std::size_t trials = 10;
  std::size_t horizon = 0;  // 0 = twice the seed demonstration length
  RolloutMode mode = RolloutMode::sample;
};

struct PipelineConfig {
  std::uint64_t seed = 7;
  std::filesystem::path workdir = "run";
  ArmModel arm = ArmModel::uniform({0.5, 0.4, 0.3});
  TaskSpec task = default_task();
  OracleProfile oracle{};
  KeyPoseConfig keypose{};
  SamplerConfig sampler{};
  PlannerConfig planner{};
  ReviewConfig review{};
  ValidationConfig validation = default_validation();
  std::size_t scale_target = 100;
  TrainConfig train{};
  EvalConfig eval{};

  static TaskSpec default_task() {
    TaskSpec t;
    t.kind = TaskKind::three_waypoints;
    t.waypoints = {Vec2(0.8, 0.7), Vec2(0.2, 0.5), Vec2(0.5, 0.1)};
    t.object_start = Vec2(0.9, 0.4);
    t.goal = Vec2(0.3, 0.7);
    t.start_joints = JointVector(3);
    t.start_joints << -0.3, 0.6, 0.4;
    return t;
  }

  static ValidationConfig default_validation() {
    ValidationConfig v;
    v.attempt_cap_factor = 200;
    return v;
  }

  void validate() const {
    arm.validate();
    task.validate(arm);
    oracle.validate();
    keypose.validate();
    sampler.validate();
    planner.validate();
    validation.validate();
    train.validate();
    if (review.batch_size < 1) throw ConfigError("review.batch_size must be >= 1");
    if (scale_target < 1) throw ConfigError("validation.target must be >= 1");
    if (eval.trials < 1) throw ConfigError("eval.trials must be >= 1");
    if (train.include_gripper != task.uses_gripper()) {
      throw ConfigError("train.include_gripper must match the task kind");
    }
  }
};

namespace detail {

using nlohmann::json;

inline void reject_unknown(const json& j, const std::string& where, std::initializer_list<const char*> known) {
  if (!j.is_object()) throw ConfigError("'" + where + "' must be an object");
  std::set<std::string> allowed(known.begin(), known.end());
  for (const auto& [k, v] : j.items()) {
    if (!allowed.count(k)) throw ConfigError("unknown config key '" + where + "." + k + "'");
  }
}

template <typename T>
void read(const json& j, const char* key, T& out) {
  if (j.contains(key)) {
    try {
      out = j.at(key).get<T>();
    } catch (const json::exception& e) {
      throw ConfigError(std::string("config key '") + key + "': " + e.what());
    }
  }
}

inline Vec2 to_vec2(const json& j, const std::string& what) {
  auto v = j.get<std::vector<double>>();
  if (v.size() != 2) throw ConfigError("'" + what + "' must be a 2-vector");
  return Vec2(v[0], v[1]);
}

inline json from_vec(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

}  // namespace detail

inline PipelineConfig parse_config(const nlohmann::json& j) {
  using detail::read;
  using detail::reject_unknown;
  PipelineConfig c;
  reject_unknown(j, "config",
                 {"seed", "workdir", "arm", "task", "oracle", "keypose", "sampler", "planner", "review",
                  "validation", "train", "eval"});
  try {
    read(j, "seed", c.seed);
    if (j.contains("workdir")) c.workdir = j.at("workdir").get<std::string>();

    if (j.contains("arm")) {
      const auto& a = j.at("arm");
      reject_unknown(a, "arm", {"link_lengths", "joint_limits", "base"});
      if (a.contains("link_lengths")) {
        c.arm = ArmModel::uniform(a.at("link_lengths").get<std::vector<double>>());
      }
      if (a.contains("joint_limits")) {
        c.arm.joint_limits.clear();
        for (const auto& lim : a.at("joint_limits")) {
          auto v = lim.get<std::vector<double>>();
          if (v.size() != 2) throw ConfigError("each joint limit must be [lo, hi]");
          c.arm.joint_limits.push_back({v[0], v[1]});
        }
      }
      if (a.contains("base")) c.arm.base = detail::to_vec2(a.at("base"), "arm.base");
    }

    if (j.contains("task")) {
      const auto& t = j.at("task");
      reject_unknown(t, "task",
                     {"kind", "waypoints", "object_start", "goal", "grasp_radius", "success_tolerance",
                      "start_joints"});
      if (t.contains("kind")) {
        const auto k = t.at("kind").get<std::string>();
        if (k == "three_waypoints") c.task.kind = TaskKind::three_waypoints;
        else if (k == "pick_and_place") c.task.kind = TaskKind::pick_and_place;
        else throw ConfigError("task.kind must be three_waypoints or pick_and_place");
        if (c.task.kind == TaskKind::pick_and_place && !t.contains("waypoints")) c.task.waypoints.clear();
      }
      if (t.contains("waypoints")) {
        c.task.waypoints.clear();
        for (const auto& w : t.at("waypoints")) c.task.waypoints.push_back(detail::to_vec2(w, "task.waypoints"));
      }
      if (t.contains("object_start")) c.task.object_start = detail::to_vec2(t.at("object_start"), "task.object_start");
      if (t.contains("goal")) c.task.goal = detail::to_vec2(t.at("goal"), "task.goal");
      read(t, "grasp_radius", c.task.grasp_radius);
      read(t, "success_tolerance", c.task.success_tolerance);
      if (t.contains("start_joints")) {
        auto v = t.at("start_joints").get<std::vector<double>>();
        c.task.start_joints = Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
      }
    }

    if (j.contains("oracle")) {
      const auto& o = j.at("oracle");
      reject_unknown(o, "oracle",
                     {"segment_steps_min", "segment_steps_max", "dwell_steps", "dwell_creep", "bow_amplitude"});
      read(o, "segment_steps_min", c.oracle.segment_steps_min);
      read(o, "segment_steps_max", c.oracle.segment_steps_max);
      read(o, "dwell_steps", c.oracle.dwell_steps);
      read(o, "dwell_creep", c.oracle.dwell_creep);
      read(o, "bow_amplitude", c.oracle.bow_amplitude);
    }

    if (j.contains("keypose")) {
      const auto& k = j.at("keypose");
      reject_unknown(k, "keypose", {"window_length", "sharp_turn_threshold", "dense_region_threshold"});
      read(k, "window_length", c.keypose.window_length);
      read(k, "sharp_turn_threshold", c.keypose.sharp_turn_threshold);
      read(k, "dense_region_threshold", c.keypose.dense_region_threshold);
    }

    if (j.contains("sampler")) {
      const auto& s = j.at("sampler");
      reject_unknown(s, "sampler", {"interval_min", "interval_max"});
      read(s, "interval_min", c.sampler.interval_min);
      read(s, "interval_max", c.sampler.interval_max);
    }

    if (j.contains("planner")) {
      const auto& p = j.at("planner");
      reject_unknown(p, "planner",
                     {"jitter_sigma", "via_point_count", "steps_per_segment", "ik_damping", "ik_tol", "ik_max_iter"});
      read(p, "jitter_sigma", c.planner.jitter_sigma);
      read(p, "via_point_count", c.planner.via_point_count);
      read(p, "steps_per_segment", c.planner.steps_per_segment);
      read(p, "ik_damping", c.planner.ik.damping);
      read(p, "ik_tol", c.planner.ik.tol);
      read(p, "ik_max_iter", c.planner.ik.max_iter);
      c.oracle.ik = c.planner.ik;
    }

    if (j.contains("review")) {
      const auto& r = j.at("review");
      reject_unknown(r, "review", {"batch_size", "host", "port", "ui_dir"});
      read(r, "batch_size", c.review.batch_size);
      read(r, "host", c.review.host);
      read(r, "port", c.review.port);
      read(r, "ui_dir", c.review.ui_dir);
    }

    if (j.contains("validation")) {
      const auto& v = j.at("validation");
      reject_unknown(v, "validation", {"beta", "representation", "attempt_cap_factor", "target"});
      read(v, "beta", c.validation.beta);
      read(v, "attempt_cap_factor", c.validation.attempt_cap_factor);
      read(v, "target", c.scale_target);
      if (v.contains("representation")) {
        const auto r = v.at("representation").get<std::string>();
        if (r == "ee_position") c.validation.representation = Representation::ee_position;
        else if (r == "joints") c.validation.representation = Representation::joints;
        else throw ConfigError("validation.representation must be ee_position or joints");
      }
    }

    if (j.contains("train")) {
      const auto& t = j.at("train");
      reject_unknown(t, "train",
                     {"epochs", "batch_size", "learning_rate", "beta1", "beta2", "epsilon", "hidden", "loss",
                      "optimizer", "logstd_min", "logstd_max"});
      read(t, "epochs", c.train.epochs);
      read(t, "batch_size", c.train.batch_size);
      read(t, "learning_rate", c.train.learning_rate);
      read(t, "beta1", c.train.beta1);
      read(t, "beta2", c.train.beta2);
      read(t, "epsilon", c.train.epsilon);
      read(t, "hidden", c.train.hidden);
      read(t, "logstd_min", c.train.logstd_min);
      read(t, "logstd_max", c.train.logstd_max);
      if (t.contains("loss")) {
        const auto l = t.at("loss").get<std::string>();
        if (l == "gaussian_nll") c.train.loss = LossKind::gaussian_nll;
        else if (l == "mse") c.train.loss = LossKind::mse;
        else throw ConfigError("train.loss must be gaussian_nll or mse");
      }
      if (t.contains("optimizer")) {
        const auto o = t.at("optimizer").get<std::string>();
        if (o == "adam") c.train.optimizer = OptimizerKind::adam;
        else if (o == "sgd") c.train.optimizer = OptimizerKind::sgd;
        else throw ConfigError("train.optimizer must be adam or sgd");
      }
    }

    if (j.contains("eval")) {
      const auto& e = j.at("eval");
      reject_unknown(e, "eval", {"trials", "horizon", "mode"});
      read(e, "trials", c.eval.trials);
      read(e, "horizon", c.eval.horizon);
      if (e.contains("mode")) {
        const auto m = e.at("mode").get<std::string>();
        if (m == "sample") c.eval.mode = RolloutMode::sample;
        else if (m == "mean") c.eval.mode = RolloutMode::mean;
        else throw ConfigError("eval.mode must be sample or mean");
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed config: ") + e.what());
  }

  c.train.include_gripper = c.task.uses_gripper();
  c.validate();
  return c;
}

inline PipelineConfig load_config(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw MissingArtifactError("cannot open config file '" + path.string() + "'");
  nlohmann::json j;
  try {
    is >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config '" + path.string() + "' is not valid JSON: " + e.what());
  }
  return parse_config(j);
}

/// Serializes every key with its effective value (used for `config --dump`).
inline nlohmann::json to_json(const PipelineConfig& c) {
  using nlohmann::json;
  json limits = json::array();
  for (const auto& l : c.arm.joint_limits) limits.push_back({l.lo, l.hi});
  json waypoints = json::array();
  for (const auto& w : c.task.waypoints) waypoints.push_back({w.x(), w.y()});
  auto loss = c.train.loss == LossKind::gaussian_nll ? "gaussian_nll" : "mse";
  return {
      {"seed", c.seed},
      {"workdir", c.workdir.string()},
      {"arm", {{"link_lengths", c.arm.link_lengths}, {"joint_limits", limits}, {"base", {c.arm.base.x(), c.arm.base.y()}}}},
      {"task",
       {{"kind", c.task.kind == TaskKind::three_waypoints ? "three_waypoints" : "pick_and_place"},
        {"waypoints", waypoints},
        {"object_start", {c.task.object_start.x(), c.task.object_start.y()}},
        {"goal", {c.task.goal.x(), c.task.goal.y()}},
        {"grasp_radius", c.task.grasp_radius},
        {"success_tolerance", c.task.success_tolerance},
        {"start_joints", detail::from_vec(c.task.start_joints)}}},
      {"oracle",
       {{"segment_steps_min", c.oracle.segment_steps_min},
        {"segment_steps_max", c.oracle.segment_steps_max},
        {"dwell_steps", c.oracle.dwell_steps},
        {"dwell_creep", c.oracle.dwell_creep},
        {"bow_amplitude", c.oracle.bow_amplitude}}},
      {"keypose",
       {{"window_length", c.keypose.window_length},
        {"sharp_turn_threshold", c.keypose.sharp_turn_threshold},
        {"dense_region_threshold", c.keypose.dense_region_threshold}}},
      {"sampler", {{"interval_min", c.sampler.interval_min}, {"interval_max", c.sampler.interval_max}}},
      {"planner",
       {{"jitter_sigma", c.planner.jitter_sigma},
        {"via_point_count", c.planner.via_point_count},
        {"steps_per_segment", c.planner.steps_per_segment},
        {"ik_damping", c.planner.ik.damping},
        {"ik_tol", c.planner.ik.tol},
        {"ik_max_iter", c.planner.ik.max_iter}}},
      {"review",
       {{"batch_size", c.review.batch_size}, {"host", c.review.host}, {"port", c.review.port}, {"ui_dir", c.review.ui_dir}}},
      {"validation",
       {{"beta", c.validation.beta},
        {"representation", c.validation.representation == Representation::ee_position ? "ee_position" : "joints"},
        {"attempt_cap_factor", c.validation.attempt_cap_factor},
        {"target", c.scale_target}}},
      {"train",
       {{"epochs", c.train.epochs},
        {"batch_size", c.train.batch_size},
        {"learning_rate", c.train.learning_rate},
        {"beta1", c.train.beta1},
        {"beta2", c.train.beta2},
        {"epsilon", c.train.epsilon},
        {"hidden", c.train.hidden},
        {"loss", loss},
        {"optimizer", c.train.optimizer == OptimizerKind::adam ? "adam" : "sgd"},
        {"logstd_min", c.train.logstd_min},
        {"logstd_max", c.train.logstd_max}}},
      {"eval",
       {{"trials", c.eval.trials},
        {"horizon", c.eval.horizon},
        {"mode", c.eval.mode == RolloutMode::sample ? "sample" : "mean"}}},
  };
}

}  // namespace arcade
