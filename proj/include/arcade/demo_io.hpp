#pragma once

// Line-delimited demonstration files.
//
//   arcade-demos v1 role=<seed|candidates|accepted|scaled>
//   demo id=<id> source=<oracle|generated> seed=<u64|none>
//   p=[x,y,heading] j=[q1,...,qJ] g=<0|1>
//   ...
//
// Blank lines and lines starting with '#' are ignored. Doubles are written in
// shortest round-trip form.

#include <filesystem>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "arcade/error.hpp"
#include "arcade/text_format.hpp"
#include "arcade/trajectory.hpp"

namespace arcade {

inline constexpr std::string_view kDemoFileMagic = "arcade-demos";
inline constexpr int kDemoFileVersion = 1;

inline void write_demonstrations(const Dataset& data, std::ostream& os) {
  validate_structure(data);
  os << kDemoFileMagic << " v" << kDemoFileVersion << " role=" << to_string(data.role) << '\n';
  for (const auto& d : data.demos) {
    if (d.id.empty() || d.id.find_first_of(" \t\n=") != std::string::npos) {
      throw ValidationError("demonstration id '" + d.id + "' is empty or contains whitespace/'='");
    }
    os << "demo id=" << d.id << " source=" << to_string(d.source)
       << " seed=" << (d.seed ? std::to_string(*d.seed) : std::string("none")) << '\n';
    for (const auto& s : d.steps) {
      Eigen::Vector3d p(s.pose.position.x(), s.pose.position.y(), s.pose.heading);
      os << "p=" << text::format_vector(p) << " j=" << text::format_vector(s.joints)
         << " g=" << (s.gripper == Gripper::open ? 1 : 0) << '\n';
    }
  }
}

inline void write_demonstrations(const Dataset& data, const std::filesystem::path& path) {
  std::ostringstream buf;
  write_demonstrations(data, buf);
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw Error("cannot open '" + path.string() + "' for writing");
  os << buf.str();
  if (!os) throw Error("write to '" + path.string() + "' failed");
}

namespace detail {

inline DatasetRole parse_role(std::string_view v, std::size_t line) {
  if (v == "seed") return DatasetRole::seed;
  if (v == "candidates") return DatasetRole::candidates;
  if (v == "accepted") return DatasetRole::accepted;
  if (v == "scaled") return DatasetRole::scaled;
  throw ParseError(line, "unknown dataset role '" + std::string(v) + "'");
}

inline Demonstration parse_demo_header(const std::vector<std::string_view>& toks, std::size_t line) {
  Demonstration d;
  bool have_id = false;
  for (std::size_t i = 1; i < toks.size(); ++i) {
    std::string_view k, v;
    if (!text::split_kv(toks[i], k, v)) throw ParseError(line, "expected key=value, got '" + std::string(toks[i]) + "'");
    if (k == "id") {
      if (v.empty()) throw ParseError(line, "empty demonstration id");
      d.id = std::string(v);
      have_id = true;
    } else if (k == "source") {
      if (v == "oracle") d.source = DemoSource::oracle;
      else if (v == "generated") d.source = DemoSource::generated;
      else throw ParseError(line, "unknown source '" + std::string(v) + "'");
    } else if (k == "seed") {
      if (v != "none") {
        auto s = text::parse_u64(v);
        if (!s) throw ParseError(line, "bad seed '" + std::string(v) + "'");
        d.seed = *s;
      }
    } else {
      throw ParseError(line, "unknown demo field '" + std::string(k) + "'");
    }
  }
  if (!have_id) throw ParseError(line, "demo header without id");
  return d;
}

inline Step parse_step(const std::vector<std::string_view>& toks, std::size_t line) {
  if (toks.size() != 3) throw ParseError(line, "step record needs exactly p=, j= and g= fields");
  Step s;
  bool seen_p = false, seen_j = false, seen_g = false;
  for (auto tok : toks) {
    std::string_view k, v;
    if (!text::split_kv(tok, k, v)) throw ParseError(line, "expected key=value, got '" + std::string(tok) + "'");
    if (k == "p") {
      auto p = text::parse_vector(v);
      if (!p || p->size() != 3) throw ParseError(line, "p= must hold [x,y,heading]");
      s.pose = Pose(Vec2((*p)[0], (*p)[1]), (*p)[2]);
      seen_p = true;
    } else if (k == "j") {
      auto j = text::parse_vector(v);
      if (!j || j->empty()) throw ParseError(line, "j= must hold a non-empty joint list");
      s.joints = Eigen::Map<const Eigen::VectorXd>(j->data(), static_cast<Eigen::Index>(j->size()));
      seen_j = true;
    } else if (k == "g") {
      if (v == "0") s.gripper = Gripper::closed;
      else if (v == "1") s.gripper = Gripper::open;
      else throw ParseError(line, "g= must be 0 or 1");
      seen_g = true;
    } else {
      throw ParseError(line, "unknown step field '" + std::string(k) + "'");
    }
  }
  if (!(seen_p && seen_j && seen_g)) throw ParseError(line, "step record missing a field");
  return s;
}

}  // namespace detail

inline Dataset read_demonstrations(std::istream& is, std::vector<std::string>* warnings = nullptr) {
  Dataset data;
  std::string raw;
  std::size_t line = 0;
  bool have_magic = false;
  Eigen::Index joint_count = -1;
  std::unordered_set<std::string> ids;
  while (std::getline(is, raw)) {
    ++line;
    auto toks = text::split_ws(raw);
    if (toks.empty() || toks.front().starts_with('#')) continue;
    if (toks.front() == kDemoFileMagic) {
      if (have_magic || !data.demos.empty()) throw ParseError(line, "unexpected file header");
      if (toks.size() < 2 || toks[1] != "v1") throw ParseError(line, "unsupported file version");
      for (std::size_t i = 2; i < toks.size(); ++i) {
        std::string_view k, v;
        if (!text::split_kv(toks[i], k, v) || k != "role") throw ParseError(line, "bad header field");
        data.role = detail::parse_role(v, line);
      }
      have_magic = true;
      continue;
    }
    if (toks.front() == "demo") {
      auto d = detail::parse_demo_header(toks, line);
      if (!ids.insert(d.id).second) throw ValidationError("line " + std::to_string(line) + ": duplicate demonstration id '" + d.id + "'");
      data.demos.push_back(std::move(d));
      continue;
    }
    if (data.demos.empty()) throw ParseError(line, "step record before any demo header");
    auto step = detail::parse_step(toks, line);
    if (joint_count < 0) joint_count = step.joints.size();
    if (step.joints.size() != joint_count) {
      throw ValidationError("line " + std::to_string(line) + ": record has " +
                            std::to_string(step.joints.size()) + " joints, dataset uses " +
                            std::to_string(joint_count));
    }
    data.demos.back().steps.push_back(std::move(step));
  }
  for (const auto& d : data.demos) {
    if (d.steps.empty()) throw ValidationError("demonstration '" + d.id + "' has no steps");
  }
  if (data.demos.empty() && warnings) warnings->push_back("dataset file contains no demonstrations");
  return data;
}

inline Dataset read_demonstrations(const std::filesystem::path& path, std::vector<std::string>* warnings = nullptr) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw MissingArtifactError("cannot open '" + path.string() + "'");
  return read_demonstrations(is, warnings);
}

}  // namespace arcade
