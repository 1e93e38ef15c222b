#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_set>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "arcade/error.hpp"

namespace arcade {

using Vec2 = Eigen::Vector2d;
using JointVector = Eigen::VectorXd;

/// Wraps an angle into (-pi, pi].
inline double normalize_angle(double a) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  double r = std::fmod(a, two_pi);
  if (r <= -std::numbers::pi) r += two_pi;
  if (r > std::numbers::pi) r -= two_pi;
  return r;
}

struct Pose {
  Vec2 position = Vec2::Zero();
  double heading = 0.0;

  Pose() = default;
  Pose(Vec2 p, double h) : position(std::move(p)), heading(normalize_angle(h)) {}

  friend bool operator==(const Pose& a, const Pose& b) {
    return a.position == b.position && a.heading == b.heading;
  }
};

enum class Gripper : std::uint8_t { closed = 0, open = 1 };

inline double gripper_value(Gripper g) noexcept { return g == Gripper::open ? 1.0 : 0.0; }

struct Step {
  Pose pose;
  JointVector joints;
  Gripper gripper = Gripper::open;

  friend bool operator==(const Step& a, const Step& b) {
    return a.pose == b.pose && a.gripper == b.gripper &&
           a.joints.size() == b.joints.size() && a.joints == b.joints;
  }
};

enum class DemoSource { oracle, generated };

inline std::string_view to_string(DemoSource s) {
  return s == DemoSource::oracle ? "oracle" : "generated";
}

struct Demonstration {
  std::string id;
  DemoSource source = DemoSource::oracle;
  std::optional<std::uint64_t> seed;
  std::vector<Step> steps;

  std::size_t size() const noexcept { return steps.size(); }
  Eigen::Index joint_count() const { return steps.empty() ? 0 : steps.front().joints.size(); }

  friend bool operator==(const Demonstration&, const Demonstration&) = default;
};

enum class DatasetRole { seed, candidates, accepted, scaled };

inline std::string_view to_string(DatasetRole r) {
  switch (r) {
    case DatasetRole::seed: return "seed";
    case DatasetRole::candidates: return "candidates";
    case DatasetRole::accepted: return "accepted";
    case DatasetRole::scaled: return "scaled";
  }
  return "candidates";
}

struct Dataset {
  DatasetRole role = DatasetRole::candidates;
  std::vector<Demonstration> demos;

  friend bool operator==(const Dataset&, const Dataset&) = default;
};

// Structural checks only; FK consistency needs an arm (see simenv.hpp).
inline void validate_structure(const Demonstration& demo) {
  if (demo.steps.empty()) throw ValidationError("demonstration '" + demo.id + "' has no steps");
  const auto n = demo.steps.front().joints.size();
  for (std::size_t i = 0; i < demo.steps.size(); ++i) {
    const auto& s = demo.steps[i];
    if (s.joints.size() != n) {
      throw ValidationError("demonstration '" + demo.id + "' step " + std::to_string(i) + " has " +
                            std::to_string(s.joints.size()) + " joints, expected " +
                            std::to_string(n));
    }
    if (!s.pose.position.allFinite() || !std::isfinite(s.pose.heading) || !s.joints.allFinite()) {
      throw ValidationError("demonstration '" + demo.id + "' step " + std::to_string(i) +
                            " has non-finite values");
    }
  }
}

inline void validate_structure(const Dataset& data) {
  std::unordered_set<std::string> ids;
  Eigen::Index joints = -1;
  for (const auto& d : data.demos) {
    validate_structure(d);
    if (!ids.insert(d.id).second) throw ValidationError("duplicate demonstration id '" + d.id + "'");
    if (joints < 0) joints = d.joint_count();
    if (d.joint_count() != joints) {
      throw ValidationError("demonstration '" + d.id + "' has " + std::to_string(d.joint_count()) +
                            " joints, dataset uses " + std::to_string(joints));
    }
  }
}

inline std::vector<Vec2> extract_positions(const Demonstration& demo) {
  std::vector<Vec2> out;
  out.reserve(demo.steps.size());
  for (const auto& s : demo.steps) out.push_back(s.pose.position);
  return out;
}

struct StateAction {
  Eigen::VectorXd state;
  Eigen::VectorXd action;
};

inline Eigen::VectorXd state_vector(const Step& s, bool include_gripper) {
  if (!include_gripper) return s.joints;
  Eigen::VectorXd v(s.joints.size() + 1);
  v << s.joints, gripper_value(s.gripper);
  return v;
}

// state = joints (+ gripper), action = next joints - joints (+ gripper delta).
inline std::vector<StateAction> state_action_pairs(const Demonstration& demo, bool include_gripper) {
  if (demo.steps.size() < 2) {
    throw ValidationError("demonstration '" + demo.id + "' has fewer than 2 steps; no state-action pairs");
  }
  std::vector<StateAction> pairs;
  pairs.reserve(demo.steps.size() - 1);
  for (std::size_t i = 0; i + 1 < demo.steps.size(); ++i) {
    Eigen::VectorXd s = state_vector(demo.steps[i], include_gripper);
    Eigen::VectorXd a = state_vector(demo.steps[i + 1], include_gripper) - s;
    pairs.push_back({std::move(s), std::move(a)});
  }
  return pairs;
}

}  // namespace arcade
