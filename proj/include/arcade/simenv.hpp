#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "arcade/error.hpp"
#include "arcade/trajectory.hpp"

namespace arcade {

struct JointLimit {
  double lo = -std::numbers::pi;
  double hi = std::numbers::pi;
};

/// Planar serial chain rooted at `base`; joint k rotates relative to link k-1.
struct ArmModel {
  std::vector<double> link_lengths;
  std::vector<JointLimit> joint_limits;
  Vec2 base = Vec2::Zero();

  static ArmModel uniform(std::vector<double> links) {
    ArmModel arm;
    arm.joint_limits.assign(links.size(), JointLimit{});
    arm.link_lengths = std::move(links);
    return arm;
  }

  Eigen::Index joint_count() const { return static_cast<Eigen::Index>(link_lengths.size()); }

  double max_reach() const {
    double s = 0.0;
    for (double l : link_lengths) s += l;
    return s;
  }

  // Inner radius of the reachable annulus (ignoring joint limits).
  double min_reach() const {
    double longest = 0.0;
    for (double l : link_lengths) longest = std::max(longest, l);
    return std::max(0.0, 2.0 * longest - max_reach());
  }

  void validate() const {
    if (link_lengths.empty()) throw ConfigError("arm needs at least one link");
    if (joint_limits.size() != link_lengths.size()) throw ConfigError("arm needs one joint limit per link");
    for (double l : link_lengths) {
      if (!(l > 0.0)) throw ConfigError("link lengths must be > 0");
    }
    for (const auto& lim : joint_limits) {
      if (!(lim.lo < lim.hi)) throw ConfigError("joint limit requires lo < hi");
    }
    if (!base.allFinite()) throw ConfigError("arm base must be finite");
  }

  bool within_limits(const JointVector& q, double slack = 0.0) const {
    if (q.size() != joint_count()) return false;
    for (Eigen::Index k = 0; k < q.size(); ++k) {
      const auto& lim = joint_limits[static_cast<std::size_t>(k)];
      if (!(q(k) >= lim.lo - slack && q(k) <= lim.hi + slack)) return false;
    }
    return true;
  }

  JointVector clamp(JointVector q) const {
    for (Eigen::Index k = 0; k < q.size(); ++k) {
      const auto& lim = joint_limits[static_cast<std::size_t>(k)];
      q(k) = std::clamp(q(k), lim.lo, lim.hi);
    }
    return q;
  }
};

inline void check_joints(const ArmModel& arm, const JointVector& q) {
  if (q.size() != arm.joint_count()) {
    throw DimensionError("joint vector has " + std::to_string(q.size()) + " entries, arm has " +
                         std::to_string(arm.joint_count()) + " joints");
  }
  if (!arm.within_limits(q)) throw LimitError("joint vector outside the arm's joint limits");
}

/// Positions of the base, every intermediate joint, and the end effector.
inline std::vector<Vec2> joint_positions(const ArmModel& arm, const JointVector& q) {
  std::vector<Vec2> out;
  out.reserve(arm.link_lengths.size() + 1);
  Vec2 p = arm.base;
  out.push_back(p);
  double cumulative = 0.0;
  for (Eigen::Index k = 0; k < q.size(); ++k) {
    cumulative += q(k);
    p += arm.link_lengths[static_cast<std::size_t>(k)] * Vec2(std::cos(cumulative), std::sin(cumulative));
    out.push_back(p);
  }
  return out;
}

inline Pose forward_kinematics(const ArmModel& arm, const JointVector& q) {
  check_joints(arm, q);
  return Pose(joint_positions(arm, q).back(), q.sum());
}

// 2xJ positional Jacobian of the end effector.
inline Eigen::MatrixXd position_jacobian(const ArmModel& arm, const JointVector& q) {
  const auto n = q.size();
  Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(2, n);
  double cumulative = 0.0;
  for (Eigen::Index k = 0; k < n; ++k) {
    cumulative += q(k);
    const double l = arm.link_lengths[static_cast<std::size_t>(k)];
    // Link k moves with every joint m <= k.
    for (Eigen::Index m = 0; m <= k; ++m) {
      jac(0, m) -= l * std::sin(cumulative);
      jac(1, m) += l * std::cos(cumulative);
    }
  }
  return jac;
}

struct IkOptions {
  double damping = 0.1;
  double tol = 1e-4;
  int max_iter = 200;
  double max_step = 0.5;  // radians, per iteration
};

namespace detail {

struct IkRun {
  JointVector best;
  double residual;
};

inline IkRun dls_iterate(const ArmModel& arm, const Vec2& target, JointVector q, const IkOptions& opt) {
  const double lambda2 = opt.damping * opt.damping;
  Vec2 err = target - joint_positions(arm, q).back();
  double residual = err.norm();
  IkRun run{q, residual};
  for (int it = 0; it < opt.max_iter && residual > opt.tol; ++it) {
    const Eigen::MatrixXd jac = position_jacobian(arm, q);
    const Eigen::Matrix2d jjt = jac * jac.transpose() + lambda2 * Eigen::Matrix2d::Identity();
    JointVector dq = jac.transpose() * jjt.ldlt().solve(err);
    const double norm = dq.norm();
    if (norm > opt.max_step) dq *= opt.max_step / norm;
    q = arm.clamp(q + dq);
    err = target - joint_positions(arm, q).back();
    residual = err.norm();
    if (residual < run.residual) run = {q, residual};
  }
  return run;
}

}  // namespace detail

/// Damped least-squares IK. Joint limits are enforced by clamping each iterate.
/// If the iteration from `seed` stalls (typically pinned against a limit), it
/// is retried from a few fixed configurations pointed at the target.
inline JointVector solve_ik(const ArmModel& arm, const Vec2& target, const JointVector& seed,
                            const IkOptions& opt = {}) {
  check_joints(arm, seed);
  if (!target.allFinite()) throw ReachabilityError("IK target is not finite");
  const double dist = (target - arm.base).norm();
  constexpr double reach_slack = 1e-9;
  if (dist > arm.max_reach() + reach_slack || dist < arm.min_reach() - reach_slack) {
    throw ReachabilityError("IK target at distance " + std::to_string(dist) +
                            " is outside the reachable annulus [" + std::to_string(arm.min_reach()) +
                            ", " + std::to_string(arm.max_reach()) + "]");
  }

  auto run = detail::dls_iterate(arm, target, seed, opt);
  if (run.residual > opt.tol) {
    const double heading = std::atan2(target.y() - arm.base.y(), target.x() - arm.base.x());
    for (double bend : {0.5, -0.5, 1.5, -1.5}) {
      JointVector q0 = JointVector::Constant(seed.size(), bend);
      q0(0) = std::remainder(heading - bend, 2.0 * std::numbers::pi);
      const auto retry = detail::dls_iterate(arm, target, arm.clamp(q0), opt);
      if (retry.residual < run.residual) run = retry;
      if (run.residual <= opt.tol) break;
    }
  }
  if (run.residual > opt.tol) {
    throw IkError("IK did not converge: best residual " + std::to_string(run.residual) + " m", run.residual);
  }
  return run.best;
}

// ---------------------------------------------------------------------------

enum class TaskKind { three_waypoints, pick_and_place };

struct TaskSpec {
  TaskKind kind = TaskKind::three_waypoints;
  std::vector<Vec2> waypoints;
  Vec2 object_start = Vec2::Zero();
  Vec2 goal = Vec2::Zero();
  double grasp_radius = 0.05;
  double success_tolerance = 0.02;
  JointVector start_joints;

  bool uses_gripper() const noexcept { return kind == TaskKind::pick_and_place; }

  void validate(const ArmModel& arm) const {
    if (kind == TaskKind::three_waypoints && waypoints.size() != 3) {
      throw ConfigError("three_waypoints task needs exactly 3 waypoints");
    }
    if (!(grasp_radius > 0.0)) throw ConfigError("grasp_radius must be > 0");
    if (!(success_tolerance > 0.0)) throw ConfigError("success_tolerance must be > 0");
    check_joints(arm, start_joints);
  }
};

inline Eigen::Index action_dim(const ArmModel& arm, const TaskSpec& task) {
  return arm.joint_count() + (task.uses_gripper() ? 1 : 0);
}

struct SimState {
  JointVector joints;
  Gripper gripper = Gripper::open;
  std::optional<Vec2> object_position;
  bool attached = false;

  friend bool operator==(const SimState& a, const SimState& b) {
    return a.joints.size() == b.joints.size() && a.joints == b.joints && a.gripper == b.gripper &&
           a.object_position == b.object_position && a.attached == b.attached;
  }
};

inline SimState initial_state(const TaskSpec& task) {
  SimState s;
  s.joints = task.start_joints;
  s.gripper = Gripper::open;
  if (task.kind == TaskKind::pick_and_place) s.object_position = task.object_start;
  return s;
}

inline Eigen::VectorXd observe(const SimState& s, const TaskSpec& task) {
  if (!task.uses_gripper()) return s.joints;
  Eigen::VectorXd v(s.joints.size() + 1);
  v << s.joints, gripper_value(s.gripper);
  return v;
}

inline constexpr double kGripperToggleThreshold = 0.5;

/// Deterministic transition: joints integrate the delta (clamped), the gripper
/// channel toggles past +-0.5, and grasps attach when the object is within reach.
inline SimState step(const SimState& state, const Eigen::VectorXd& action, const ArmModel& arm,
                     const TaskSpec& task) {
  const auto dim = action_dim(arm, task);
  if (action.size() != dim) {
    throw DimensionError("action has " + std::to_string(action.size()) + " entries, task expects " +
                         std::to_string(dim));
  }
  SimState next = state;
  const auto nj = arm.joint_count();
  next.joints = arm.clamp(state.joints + action.head(nj));
  const Vec2 ee = joint_positions(arm, next.joints).back();

  if (task.uses_gripper()) {
    const double g = action(nj);
    if (state.gripper == Gripper::open && g <= -kGripperToggleThreshold) {
      next.gripper = Gripper::closed;
      if (next.object_position && (ee - *next.object_position).norm() <= task.grasp_radius) {
        next.attached = true;
      }
    } else if (state.gripper == Gripper::closed && g >= kGripperToggleThreshold) {
      next.gripper = Gripper::open;
      next.attached = false;
    }
  }
  if (next.attached) next.object_position = ee;
  return next;
}

struct Trace {
  std::vector<SimState> states;
  std::vector<Vec2> ee;  // end-effector position per state
};

inline void append(Trace& trace, const ArmModel& arm, SimState s) {
  trace.ee.push_back(joint_positions(arm, s.joints).back());
  trace.states.push_back(std::move(s));
}

/// Task completion error in meters.
inline double tce(const Trace& trace, const TaskSpec& task) {
  if (trace.ee.empty()) throw ValidationError("TCE of an empty trace");
  if (task.kind == TaskKind::three_waypoints) {
    double total = 0.0;
    for (const auto& w : task.waypoints) {
      double best = std::numeric_limits<double>::infinity();
      for (const auto& p : trace.ee) best = std::min(best, (p - w).norm());
      total += best;
    }
    return total / static_cast<double>(task.waypoints.size());
  }
  const auto& obj = trace.states.back().object_position;
  if (!obj) return std::numeric_limits<double>::infinity();
  return (*obj - task.goal).norm();
}

/// Replays a demonstration through `step`, starting from the task's initial
/// state with the demonstration's first joints.
inline Trace replay(const Demonstration& demo, const ArmModel& arm, const TaskSpec& task) {
  validate_structure(demo);
  Trace trace;
  SimState s = initial_state(task);
  s.joints = demo.steps.front().joints;
  s.gripper = demo.steps.front().gripper;
  append(trace, arm, s);
  if (demo.size() < 2) return trace;
  for (const auto& pair : state_action_pairs(demo, task.uses_gripper())) {
    s = step(s, pair.action, arm, task);
    append(trace, arm, s);
  }
  return trace;
}

inline constexpr double kFkConsistencyTol = 1e-6;

/// Full validation: structure, joint limits, and that each pose is the FK of its joints.
inline void validate_demonstration(const Demonstration& demo, const ArmModel& arm) {
  validate_structure(demo);
  for (std::size_t i = 0; i < demo.steps.size(); ++i) {
    const auto& s = demo.steps[i];
    if (!arm.within_limits(s.joints)) {
      throw ValidationError("demonstration '" + demo.id + "' step " + std::to_string(i) +
                            " violates joint limits or joint count");
    }
    const Vec2 p = joint_positions(arm, s.joints).back();
    if ((p - s.pose.position).norm() > kFkConsistencyTol) {
      throw ValidationError("demonstration '" + demo.id + "' step " + std::to_string(i) +
                            " pose disagrees with forward kinematics");
    }
  }
}

inline Step make_step(const ArmModel& arm, const JointVector& q, Gripper g) {
  return Step{forward_kinematics(arm, q), q, g};
}

}  // namespace arcade
