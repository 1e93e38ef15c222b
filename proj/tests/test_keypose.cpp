#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include "arcade/keypose.hpp"
#include "arcade/oracle.hpp"
#include "test_support.hpp"

using namespace arcade;
using arcade::support::positions_demo;
using arcade::support::straight_line;

namespace {

constexpr double kPi = std::numbers::pi;

std::vector<std::size_t> set_identity(const KeyPoseReport& r) {
  std::vector<std::size_t> both, out;
  for (auto i : r.sharp_turn_indices) {
    if (std::find(r.dense_region_indices.begin(), r.dense_region_indices.end(), i) != r.dense_region_indices.end()) {
      both.push_back(i);
    }
  }
  out = r.grasp_release_indices;
  out.insert(out.end(), both.begin(), both.end());
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

Demonstration transformed(const Demonstration& d, double angle, Vec2 shift, double scale) {
  const Eigen::Rotation2Dd rot(angle);
  Demonstration out = d;
  for (auto& s : out.steps) s.pose.position = scale * (rot * s.pose.position) + shift;
  return out;
}

// Constant-speed L path with its corner at `corner`.
std::vector<Vec2> l_path(std::size_t corner, std::size_t n, double speed) {
  std::vector<Vec2> pts;
  for (std::size_t i = 0; i < n; ++i) {
    pts.push_back(i <= corner ? Vec2(speed * static_cast<double>(i), 0.0)
                              : Vec2(speed * static_cast<double>(corner), speed * static_cast<double>(i - corner)));
  }
  return pts;
}

}  // namespace

TEST(GraspRelease, ConstantGripperHasNoEvents) {
  EXPECT_TRUE(grasp_release_indices(positions_demo(std::vector<Vec2>(5, Vec2(0, 0)))).empty());
}

TEST(GraspRelease, TransitionTargets) {
  auto d = positions_demo(std::vector<Vec2>(5, Vec2(0, 0)));
  const int g[] = {1, 1, 0, 0, 1};
  for (int i = 0; i < 5; ++i) d.steps[i].gripper = g[i] ? Gripper::open : Gripper::closed;
  EXPECT_EQ(grasp_release_indices(d), (std::vector<std::size_t>{2, 4}));
}

TEST(GraspRelease, OraclePickHasExactlyTwo) {
  const auto arm = support::default_arm();
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    EXPECT_EQ(grasp_release_indices(oracle_demonstration(support::pick_task(), arm, OracleProfile{}, seed)).size(), 2u);
  }
}

TEST(ComputeAngle, StraightLineIsZero) {
  const auto pts = straight_line(20, Vec2(0.1, 0.2), Vec2(0.01, -0.02));
  for (std::size_t i = 5; i < 15; ++i) EXPECT_NEAR(compute_angle(pts, i, 11), 0.0, 1e-7);
}

TEST(ComputeAngle, RightAngle) {
  const auto pts = l_path(10, 21, 0.1);
  EXPECT_NEAR(compute_angle(pts, 10, 11), kPi / 2, 1e-12);
}

TEST(ComputeAngle, VShapeInterior120Degrees) {
  // Arms of the V meet at the apex with a 120 degree interior angle.
  const Vec2 apex(1.0, 1.0);
  const double in_dir = 0.3;
  const double out_dir = in_dir + kPi - 2 * kPi / 3;
  std::vector<Vec2> pts;
  for (int i = 5; i > 0; --i) pts.push_back(apex - i * 0.2 * Vec2(std::cos(in_dir), std::sin(in_dir)));
  pts.push_back(apex);
  for (int i = 1; i <= 5; ++i) pts.push_back(apex + i * 0.2 * Vec2(std::cos(out_dir), std::sin(out_dir)));
  const Vec2 u = pts[5] - pts[0], v = pts[10] - pts[5];
  const double expected = std::acos(u.dot(v) / (u.norm() * v.norm()));
  EXPECT_NEAR(expected, kPi / 3, 1e-12);
  EXPECT_NEAR(compute_angle(pts, 5, 11), expected, 1e-12);
}

TEST(ComputeAngle, StationaryGuard) {
  std::vector<Vec2> pts(11, Vec2(0.5, 0.5));
  pts[10] = Vec2(1.0, 0.5);
  EXPECT_EQ(compute_angle(pts, 5, 11), 0.0);
}

TEST(ComputeAngle, OutOfBand) {
  const auto pts = straight_line(20, Vec2(0, 0), Vec2(0.1, 0));
  EXPECT_THROW(compute_angle(pts, 4, 11), ConfigError);
  EXPECT_THROW(compute_angle(pts, 15, 11), ConfigError);
  EXPECT_NO_THROW(compute_angle(pts, 14, 11));
  EXPECT_THROW(compute_density(pts, 2, 11), ConfigError);
}

TEST(ComputeDensity, IdenticalPoints) {
  std::vector<Vec2> pts(11, Vec2(0.3, -0.2));
  EXPECT_NEAR(compute_density(pts, 5, 11), 1e6, 1e-6);
}

TEST(ComputeDensity, UnitEquilateralWindow) {
  const std::vector<Vec2> pts{Vec2(0, 0), Vec2(1, 0), Vec2(0.5, std::sqrt(3.0) / 2)};
  EXPECT_NEAR(compute_density(pts, 1, 3), 1.0 / (1.0 + 1e-6), 1e-12);
}

TEST(ComputeDensity, DwellIsMuchDenserThanMotion) {
  const auto run = oracle_run(support::reach_task(), support::default_arm(), OracleProfile{}, 4);
  const auto pts = extract_positions(run.demo);
  for (auto c : run.corner_indices) {
    const double dwell = compute_density(pts, c, 11);
    const double moving = compute_density(pts, run.corner_indices.front() / 2, 11);
    EXPECT_GE(dwell, 10.0 * moving);
  }
}

TEST(KeyPoseConfig, Validation) {
  KeyPoseConfig c;
  c.window_length = 4;
  EXPECT_THROW(c.validate(), ConfigError);
  c.window_length = 1;
  EXPECT_THROW(c.validate(), ConfigError);
  c = KeyPoseConfig{};
  c.sharp_turn_threshold = 0.0;
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(DetectKeyPoses, StraightDemoIsEmpty) {
  const auto r = detect_key_poses(positions_demo(straight_line(60, Vec2(0, 0), Vec2(0.01, 0.005))), KeyPoseConfig{});
  EXPECT_TRUE(r.sharp_turn_indices.empty());
  EXPECT_TRUE(r.key_poses_indices.empty());
}

TEST(DetectKeyPoses, FastTurnWithoutDwellIsExcluded) {
  const auto r = detect_key_poses(positions_demo(l_path(30, 61, 0.01)), KeyPoseConfig{});
  EXPECT_TRUE(std::find(r.sharp_turn_indices.begin(), r.sharp_turn_indices.end(), 30) != r.sharp_turn_indices.end());
  EXPECT_TRUE(r.dense_region_indices.empty());
  EXPECT_TRUE(r.key_poses_indices.empty());
}

TEST(DetectKeyPoses, ShortDemoIsConfigError) {
  EXPECT_THROW(detect_key_poses(positions_demo(straight_line(10, Vec2(0, 0), Vec2(0.1, 0))), KeyPoseConfig{}),
               ConfigError);
}

TEST(DetectKeyPoses, BoundaryGraspIsKept) {
  auto d = positions_demo(straight_line(30, Vec2(0, 0), Vec2(0.01, 0)));
  for (std::size_t i = 1; i < d.size(); ++i) d.steps[i].gripper = Gripper::closed;
  const auto r = detect_key_poses(d, KeyPoseConfig{});
  EXPECT_EQ(r.key_poses_indices, (std::vector<std::size_t>{1}));
}

TEST(DetectKeyPoses, OracleCornersAreFound) {
  const auto arm = support::default_arm();
  const KeyPoseConfig cfg;
  for (std::uint64_t seed = 100; seed < 110; ++seed) {
    const auto run = oracle_run(support::reach_task(), arm, OracleProfile{}, seed);
    const auto r = detect_key_poses(run.demo, cfg);
    for (auto c : run.corner_indices) {
      const bool hit = std::any_of(r.key_poses_indices.begin(), r.key_poses_indices.end(), [&](std::size_t k) {
        return (k > c ? k - c : c - k) <= cfg.half_window();
      });
      EXPECT_TRUE(hit) << "seed " << seed << " corner " << c;
    }
    EXPECT_EQ(r.key_poses_indices, set_identity(r));
  }
}

TEST(DetectKeyPoses, SetIdentityOnVariedDemos) {
  const auto arm = support::default_arm();
  std::vector<Demonstration> demos{
      oracle_demonstration(support::pick_task(), arm, OracleProfile{}, 1),
      positions_demo(l_path(20, 41, 0.0005)),
      positions_demo(straight_line(40, Vec2(0, 0), Vec2(1e-4, 0))),
  };
  for (std::uint64_t s = 0; s < 5; ++s) demos.push_back(oracle_demonstration(support::reach_task(), arm, OracleProfile{}, s));
  for (const auto& d : demos) {
    const auto r = detect_key_poses(d, KeyPoseConfig{});
    EXPECT_EQ(r.key_poses_indices, set_identity(r));
    EXPECT_TRUE(std::is_sorted(r.key_poses_indices.begin(), r.key_poses_indices.end()));
    for (auto i : r.key_poses_indices) EXPECT_LT(i, d.size());
  }
}

TEST(DetectKeyPoses, InvariantUnderRigidMotion) {
  Rng rng(12);
  std::uniform_real_distribution<double> angle(-kPi, kPi), shift(-5.0, 5.0);
  const auto demo = oracle_demonstration(support::reach_task(), support::default_arm(), OracleProfile{}, 21);
  const auto base = detect_key_poses(demo, KeyPoseConfig{});
  for (int trial = 0; trial < 10; ++trial) {
    const auto moved = transformed(demo, angle(rng), Vec2(shift(rng), shift(rng)), 1.0);
    EXPECT_EQ(detect_key_poses(moved, KeyPoseConfig{}), base);
  }
}

TEST(DetectKeyPoses, ScalingShrinksDenseRegions) {
  const auto demo = oracle_demonstration(support::reach_task(), support::default_arm(), OracleProfile{}, 22);
  const auto base = detect_key_poses(demo, KeyPoseConfig{});
  for (double c : {1.5, 3.0, 10.0}) {
    const auto r = detect_key_poses(transformed(demo, 0.0, Vec2::Zero(), c), KeyPoseConfig{});
    EXPECT_EQ(r.sharp_turn_indices, base.sharp_turn_indices);
    EXPECT_TRUE(std::includes(base.dense_region_indices.begin(), base.dense_region_indices.end(),
                              r.dense_region_indices.begin(), r.dense_region_indices.end()));
  }
}

TEST(KeyPoseReport, RoundTrip) {
  const auto r = detect_key_poses(oracle_demonstration(support::pick_task(), support::default_arm(), OracleProfile{}, 2),
                                  KeyPoseConfig{});
  std::stringstream ss;
  write_key_pose_report(r, "oracle-2", ss);
  EXPECT_EQ(read_key_pose_report(ss), r);
  std::istringstream bad("arcade-keyposes v1 source=x\ngrasp_release=[1,2]\n");
  EXPECT_THROW(read_key_pose_report(bad), ParseError);
}
