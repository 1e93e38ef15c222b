#pragma once

// Scripted demonstrator standing in for a human: minimum-jerk end-effector
// paths through the task's semantic points, slow dwell segments at corners and
// at grasp/release, converted to joints with step-by-step IK.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "arcade/error.hpp"
#include "arcade/rng.hpp"
#include "arcade/simenv.hpp"
#include "arcade/trajectory.hpp"

namespace arcade {

struct OracleProfile {
  int segment_steps_min = 35;
  int segment_steps_max = 45;
  // Steps spent slowly creeping through a corner (half in, half out) and the
  // number of held steps at grasp/release and at the end of the demonstration.
  int dwell_steps = 10;
  double dwell_creep = 2e-4;  // meters per step while creeping through a corner
  double bow_amplitude = 0.02;  // max lateral deviation of a segment, meters
  IkOptions ik{};

  void validate() const {
    if (segment_steps_min < 2 || segment_steps_max < segment_steps_min) {
      throw ConfigError("oracle segment step range must satisfy 2 <= min <= max");
    }
    if (dwell_steps < 2) throw ConfigError("oracle dwell_steps must be >= 2");
    if (!(dwell_creep > 0.0)) throw ConfigError("oracle dwell_creep must be > 0");
    if (bow_amplitude < 0.0) throw ConfigError("oracle bow_amplitude must be >= 0");
  }
};

struct OracleRun {
  Demonstration demo;
  std::vector<std::size_t> corner_indices;  // steps sitting exactly on an interior corner
  std::vector<std::size_t> waypoint_indices;  // first step at each semantic point
};

inline double minimum_jerk(double t) { return t * t * t * (10.0 - 15.0 * t + 6.0 * t * t); }

namespace detail {

struct PathBuilder {
  std::vector<Vec2> points;
  std::vector<Gripper> gripper;

  void push(const Vec2& p, Gripper g) {
    points.push_back(p);
    gripper.push_back(g);
  }
  const Vec2& last() const { return points.back(); }
  Gripper last_gripper() const { return gripper.back(); }

  // Minimum-jerk move from last() to `to` with a sin^2 lateral bow.
  void move(const Vec2& to, int steps, double bow) {
    const Vec2 from = last();
    const Vec2 chord = to - from;
    const double len = chord.norm();
    const Vec2 normal = len > 0.0 ? Vec2(-chord.y() / len, chord.x() / len) : Vec2::Zero();
    for (int k = 1; k <= steps; ++k) {
      const double s = minimum_jerk(static_cast<double>(k) / steps);
      const double lateral = std::sin(std::numbers::pi * s);
      push(from + s * chord + bow * lateral * lateral * normal, last_gripper());
    }
  }

  void hold(int steps) {
    for (int k = 0; k < steps; ++k) push(last(), last_gripper());
  }
};

inline Vec2 unit(const Vec2& v) {
  const double n = v.norm();
  return n > 0.0 ? Vec2(v / n) : Vec2::Zero();
}

}  // namespace detail

inline OracleRun oracle_run(const TaskSpec& task, const ArmModel& arm, const OracleProfile& profile,
                            std::uint64_t seed) {
  arm.validate();
  task.validate(arm);
  profile.validate();

  Rng rng(seed);
  std::uniform_int_distribution<int> seg_steps(profile.segment_steps_min, profile.segment_steps_max);
  std::uniform_real_distribution<double> bow(-profile.bow_amplitude, profile.bow_amplitude);

  const Vec2 start = forward_kinematics(arm, task.start_joints).position;
  detail::PathBuilder path;
  path.push(start, Gripper::open);

  std::vector<std::size_t> corners;
  std::vector<std::size_t> hits;
  const int creep_in = profile.dwell_steps / 2;
  const int creep_out = profile.dwell_steps - creep_in;

  if (task.kind == TaskKind::three_waypoints) {
    const auto& w = task.waypoints;
    for (std::size_t i = 0; i < w.size(); ++i) {
      const bool interior = i + 1 < w.size();
      if (interior) {
        // Arrive slowly, sit on the corner, leave slowly in the new direction.
        const Vec2 d_in = detail::unit(w[i] - path.last());
        const Vec2 d_out = detail::unit(w[i + 1] - w[i]);
        const int steps = seg_steps(rng);
        const double b = bow(rng);
        path.move(w[i] - creep_in * profile.dwell_creep * d_in, steps, b);
        for (int m = 1; m <= creep_in; ++m) {
          path.push(w[i] - (creep_in - m) * profile.dwell_creep * d_in, Gripper::open);
        }
        corners.push_back(path.points.size() - 1);
        hits.push_back(path.points.size() - 1);
        for (int m = 1; m <= creep_out; ++m) {
          path.push(w[i] + m * profile.dwell_creep * d_out, Gripper::open);
        }
      } else {
        const int steps = seg_steps(rng);
        const double b = bow(rng);
        path.move(w[i], steps, b);
        hits.push_back(path.points.size() - 1);
        path.hold(profile.dwell_steps);
      }
    }
  } else {
    std::vector<Vec2> vias = task.waypoints;
    for (const auto& v : vias) {
      const int steps = seg_steps(rng);
      path.move(v, steps, bow(rng));
    }
    const int grasp_at = profile.dwell_steps / 2;
    for (const auto& [target, event] : {std::pair{task.object_start, Gripper::closed},
                                        std::pair{task.goal, Gripper::open}}) {
      const int steps = seg_steps(rng);
      path.move(target, steps, bow(rng));
      hits.push_back(path.points.size() - 1);
      path.hold(grasp_at);
      path.push(path.last(), event);
      path.hold(profile.dwell_steps - grasp_at - 1);
    }
  }

  OracleRun run;
  run.demo.id = "oracle-" + std::to_string(seed);
  run.demo.source = DemoSource::oracle;
  run.demo.seed = seed;
  run.demo.steps.reserve(path.points.size());
  JointVector q = task.start_joints;
  for (std::size_t i = 0; i < path.points.size(); ++i) {
    try {
      q = solve_ik(arm, path.points[i], q, profile.ik);
    } catch (const Error& e) {
      throw OracleError("oracle IK failed at step " + std::to_string(i) + ": " + e.what(), i);
    }
    run.demo.steps.push_back(make_step(arm, q, path.gripper[i]));
  }
  run.corner_indices = std::move(corners);
  run.waypoint_indices = std::move(hits);
  return run;
}

inline Demonstration oracle_demonstration(const TaskSpec& task, const ArmModel& arm,
                                          const OracleProfile& profile, std::uint64_t seed) {
  return oracle_run(task, arm, profile, seed).demo;
}

}  // namespace arcade
