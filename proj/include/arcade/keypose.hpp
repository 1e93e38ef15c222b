#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <istream>
#include <iterator>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "arcade/error.hpp"
#include "arcade/text_format.hpp"
#include "arcade/trajectory.hpp"

namespace arcade {

struct KeyPoseConfig {
  std::size_t window_length = 11;
  double sharp_turn_threshold = 1.0;     // radians
  double dense_region_threshold = 200.0;  // 1/m

  std::size_t half_window() const noexcept { return (window_length - 1) / 2; }

  void validate() const {
    if (window_length < 3 || window_length % 2 == 0) throw ConfigError("window_length must be odd and >= 3");
    if (!(sharp_turn_threshold > 0.0) || !(dense_region_threshold > 0.0)) {
      throw ConfigError("key-pose thresholds must be > 0");
    }
  }
};

struct KeyPoseReport {
  std::vector<std::size_t> grasp_release_indices;
  std::vector<std::size_t> sharp_turn_indices;
  std::vector<std::size_t> dense_region_indices;
  std::vector<std::size_t> key_poses_indices;

  friend bool operator==(const KeyPoseReport&, const KeyPoseReport&) = default;
};

inline constexpr double kStationaryNorm = 1e-9;
inline constexpr double kDensityEpsilon = 1e-6;

/// Indices whose gripper state differs from the previous step.
inline std::vector<std::size_t> grasp_release_indices(const Demonstration& demo) {
  std::vector<std::size_t> out;
  for (std::size_t i = 1; i < demo.steps.size(); ++i) {
    if (demo.steps[i].gripper != demo.steps[i - 1].gripper) out.push_back(i);
  }
  return out;
}

namespace detail {

inline std::size_t check_window(std::span<const Vec2> points, std::size_t idx, std::size_t window_length) {
  if (window_length < 3 || window_length % 2 == 0) throw ConfigError("window_length must be odd and >= 3");
  const std::size_t h = (window_length - 1) / 2;
  if (idx < h || idx + h >= points.size()) {
    throw ConfigError("index " + std::to_string(idx) + " is outside the valid window band [" +
                      std::to_string(h) + ", " +
                      std::to_string(points.size() >= h + 1 ? points.size() - 1 - h : 0) + "]");
  }
  return h;
}

}  // namespace detail

/// Turning angle at `idx` between the incoming and outgoing half-window chords.
inline double compute_angle(std::span<const Vec2> points, std::size_t idx, std::size_t window_length) {
  const auto h = detail::check_window(points, idx, window_length);
  const Vec2 u = points[idx] - points[idx - h];
  const Vec2 v = points[idx + h] - points[idx];
  const double nu = u.norm(), nv = v.norm();
  if (nu < kStationaryNorm || nv < kStationaryNorm) return 0.0;
  return std::acos(std::clamp(u.dot(v) / (nu * nv), -1.0, 1.0));
}

/// Reciprocal mean pairwise distance over the centered window.
inline double compute_density(std::span<const Vec2> points, std::size_t idx, std::size_t window_length) {
  const auto h = detail::check_window(points, idx, window_length);
  double sum = 0.0;
  std::size_t pairs = 0;
  for (std::size_t a = idx - h; a <= idx + h; ++a) {
    for (std::size_t b = a + 1; b <= idx + h; ++b) {
      sum += (points[a] - points[b]).norm();
      ++pairs;
    }
  }
  return 1.0 / (sum / static_cast<double>(pairs) + kDensityEpsilon);
}

inline KeyPoseReport detect_key_poses(const Demonstration& demo, const KeyPoseConfig& config) {
  config.validate();
  if (demo.steps.size() < config.window_length) {
    throw ConfigError("demonstration has " + std::to_string(demo.steps.size()) +
                      " steps, shorter than window_length " + std::to_string(config.window_length));
  }
  const auto points = extract_positions(demo);
  const std::span<const Vec2> pts(points);
  KeyPoseReport r;
  r.grasp_release_indices = grasp_release_indices(demo);
  const std::size_t h = config.half_window();
  for (std::size_t idx = h; idx + h < points.size(); ++idx) {
    if (compute_angle(pts, idx, config.window_length) > config.sharp_turn_threshold) {
      r.sharp_turn_indices.push_back(idx);
    }
    if (compute_density(pts, idx, config.window_length) > config.dense_region_threshold) {
      r.dense_region_indices.push_back(idx);
    }
  }
  std::vector<std::size_t> turn_and_dense;
  std::set_intersection(r.sharp_turn_indices.begin(), r.sharp_turn_indices.end(),
                        r.dense_region_indices.begin(), r.dense_region_indices.end(),
                        std::back_inserter(turn_and_dense));
  std::set_union(r.grasp_release_indices.begin(), r.grasp_release_indices.end(), turn_and_dense.begin(),
                 turn_and_dense.end(), std::back_inserter(r.key_poses_indices));
  return r;
}

// Report text format, one list per line:
//   arcade-keyposes v1 source=<demo id>
//   grasp_release=[...]
//   sharp_turn=[...]
//   dense_region=[...]
//   key_poses=[...]
inline void write_key_pose_report(const KeyPoseReport& r, const std::string& source_id, std::ostream& os) {
  os << "arcade-keyposes v1 source=" << source_id << '\n'
     << "grasp_release=" << text::format_list(r.grasp_release_indices) << '\n'
     << "sharp_turn=" << text::format_list(r.sharp_turn_indices) << '\n'
     << "dense_region=" << text::format_list(r.dense_region_indices) << '\n'
     << "key_poses=" << text::format_list(r.key_poses_indices) << '\n';
}

inline KeyPoseReport read_key_pose_report(std::istream& is) {
  KeyPoseReport r;
  std::string raw;
  std::size_t line = 0;
  bool header = false;
  int seen = 0;
  while (std::getline(is, raw)) {
    ++line;
    auto toks = text::split_ws(raw);
    if (toks.empty() || toks.front().starts_with('#')) continue;
    if (!header) {
      if (toks.front() != "arcade-keyposes" || toks.size() < 2 || toks[1] != "v1") {
        throw ParseError(line, "missing arcade-keyposes v1 header");
      }
      header = true;
      continue;
    }
    std::string_view k, v;
    if (toks.size() != 1 || !text::split_kv(toks.front(), k, v)) throw ParseError(line, "expected name=[...]");
    auto list = text::parse_index_list(v);
    if (!list) throw ParseError(line, "malformed index list");
    if (k == "grasp_release") r.grasp_release_indices = *list;
    else if (k == "sharp_turn") r.sharp_turn_indices = *list;
    else if (k == "dense_region") r.dense_region_indices = *list;
    else if (k == "key_poses") r.key_poses_indices = *list;
    else throw ParseError(line, "unknown list '" + std::string(k) + "'");
    ++seen;
  }
  if (!header || seen != 4) throw ParseError(line, "key-pose report is incomplete");
  return r;
}

}  // namespace arcade
