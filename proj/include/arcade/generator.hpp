#pragma once

// Candidate generation: random-interval waypoint sampling merged with key
// poses, followed by a jittered joint-space planner that visits every waypoint.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "arcade/error.hpp"
#include "arcade/keypose.hpp"
#include "arcade/rng.hpp"
#include "arcade/simenv.hpp"
#include "arcade/trajectory.hpp"

namespace arcade {

struct SamplerConfig {
  std::size_t interval_min = 5;
  std::size_t interval_max = 15;
  std::uint64_t seed = 0;

  void validate() const {
    if (interval_min < 1 || interval_min > interval_max) {
      throw ConfigError("sampler interval requires 1 <= interval_min <= interval_max");
    }
  }
};

struct Waypoint {
  std::size_t index = 0;  // step index in the source demonstration
  Pose pose;
  Gripper gripper = Gripper::open;
  bool key = false;
};

using WaypointSet = std::vector<Waypoint>;

struct PlannerConfig {
  double jitter_sigma = 0.05;  // radians
  std::size_t via_point_count = 1;
  // 0 keeps the source demonstration's step spacing between waypoints.
  std::size_t steps_per_segment = 0;
  std::uint64_t seed = 0;
  IkOptions ik{};

  void validate() const {
    if (jitter_sigma < 0.0) throw ConfigError("jitter_sigma must be >= 0");
    if (via_point_count < 1) throw ConfigError("via_point_count must be >= 1");
  }
};

inline WaypointSet sample_waypoints(const Demonstration& demo, const KeyPoseReport& report,
                                    const SamplerConfig& config) {
  config.validate();
  validate_structure(demo);
  const std::size_t n = demo.steps.size();
  Rng rng(config.seed);
  std::uniform_int_distribution<std::size_t> stride(config.interval_min, config.interval_max);

  std::vector<std::size_t> indices;
  for (std::size_t idx = 0; idx < n; idx += stride(rng)) indices.push_back(idx);
  for (auto k : report.key_poses_indices) {
    if (k >= n) throw ValidationError("key pose index " + std::to_string(k) + " is outside the demonstration");
    indices.push_back(k);
  }
  indices.push_back(n - 1);
  std::sort(indices.begin(), indices.end());
  indices.erase(std::unique(indices.begin(), indices.end()), indices.end());

  WaypointSet out;
  out.reserve(indices.size());
  for (auto idx : indices) {
    const auto& s = demo.steps[idx];
    const bool key = std::binary_search(report.key_poses_indices.begin(), report.key_poses_indices.end(), idx);
    out.push_back({idx, s.pose, s.gripper, key});
  }
  return out;
}

/// Plans through every waypoint; throws GenerationError when IK fails.
inline Demonstration generate_candidate(const WaypointSet& waypoints, const ArmModel& arm, const TaskSpec& task,
                                        const PlannerConfig& config, std::uint64_t seed) {
  config.validate();
  if (waypoints.empty()) throw GenerationError("empty waypoint set");
  Rng rng(seed);
  std::normal_distribution<double> jitter(0.0, 1.0);

  Demonstration out;
  out.source = DemoSource::generated;
  out.seed = seed;

  auto ik = [&](const Waypoint& w, const JointVector& from) {
    try {
      return solve_ik(arm, w.pose.position, from, config.ik);
    } catch (const Error& e) {
      throw GenerationError("waypoint at source step " + std::to_string(w.index) + ": " + e.what());
    }
  };

  JointVector q = ik(waypoints.front(), task.start_joints);
  out.steps.push_back(make_step(arm, q, waypoints.front().gripper));

  for (std::size_t w = 1; w < waypoints.size(); ++w) {
    const auto& from = waypoints[w - 1];
    const auto& to = waypoints[w];
    const JointVector target = ik(to, q);
    const std::size_t steps = config.steps_per_segment > 0 ? config.steps_per_segment
                                                           : std::max<std::size_t>(1, to.index - from.index);
    const std::size_t vias = std::min(config.via_point_count, steps - 1);

    // Knots at evenly spread step offsets; interior knots get jitter.
    std::vector<JointVector> knots{q};
    std::vector<std::size_t> at{0};
    for (std::size_t m = 1; m <= vias; ++m) {
      const double frac = static_cast<double>(m) / static_cast<double>(vias + 1);
      JointVector via = q + frac * (target - q);
      for (Eigen::Index k = 0; k < via.size(); ++k) via(k) += config.jitter_sigma * jitter(rng);
      knots.push_back(arm.clamp(std::move(via)));
      at.push_back(static_cast<std::size_t>(std::lround(frac * static_cast<double>(steps))));
    }
    knots.push_back(target);
    at.push_back(steps);

    std::size_t seg = 0;
    for (std::size_t k = 1; k <= steps; ++k) {
      while (k > at[seg + 1]) ++seg;
      const double t = static_cast<double>(k - at[seg]) / static_cast<double>(at[seg + 1] - at[seg]);
      JointVector qk = k == steps ? target : JointVector(knots[seg] + t * (knots[seg + 1] - knots[seg]));
      out.steps.push_back(make_step(arm, arm.clamp(std::move(qk)), k == steps ? to.gripper : from.gripper));
    }
    q = target;
  }
  return out;
}

struct BatchResult {
  Dataset dataset;
  std::size_t attempts = 0;
  std::size_t failures = 0;
};

/// One generation attempt with seeds derived from (master_seed, attempt).
inline std::optional<Demonstration> generate_attempt(const Demonstration& source, const KeyPoseReport& report,
                                                     const ArmModel& arm, const TaskSpec& task,
                                                     const SamplerConfig& sampler, const PlannerConfig& planner,
                                                     std::uint64_t master_seed, std::size_t attempt,
                                                     const std::string& id_prefix,
                                                     std::string* failure = nullptr) {
  const std::uint64_t seed = derive_seed(master_seed, attempt);
  SamplerConfig s = sampler;
  s.seed = derive_seed(seed, "sampler");
  try {
    auto wps = sample_waypoints(source, report, s);
    auto demo = generate_candidate(wps, arm, task, planner, derive_seed(seed, "planner"));
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%04zu", attempt);
    demo.id = id_prefix + "-" + buf;
    demo.seed = seed;
    return demo;
  } catch (const GenerationError& e) {
    if (failure) *failure = e.what();
    return std::nullopt;
  }
}

inline BatchResult generate_batch(const Demonstration& source, const KeyPoseReport& report, std::size_t n,
                                  const ArmModel& arm, const TaskSpec& task, const SamplerConfig& sampler,
                                  const PlannerConfig& planner, std::uint64_t master_seed,
                                  const std::string& id_prefix = "cand") {
  if (n < 1) throw ConfigError("candidate count must be >= 1");
  BatchResult r;
  r.dataset.role = DatasetRole::candidates;
  std::string last_failure;
  // More than half of the attempts failing aborts the batch.
  while (r.dataset.demos.size() < n) {
    if (r.attempts >= 2 * n) {
      throw GenerationError("candidate generation aborted: " + std::to_string(r.failures) + " of " +
                            std::to_string(r.attempts) + " attempts failed; last failure: " + last_failure);
    }
    auto demo = generate_attempt(source, report, arm, task, sampler, planner, master_seed, r.attempts, id_prefix,
                                 &last_failure);
    ++r.attempts;
    if (demo) r.dataset.demos.push_back(std::move(*demo));
    else ++r.failures;
  }
  return r;
}

}  // namespace arcade
