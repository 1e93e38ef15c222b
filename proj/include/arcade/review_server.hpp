#pragma once

// JSON-over-HTTP front end for ReviewBoard.
//
//   GET  /api/candidates                 batch summary with current verdicts
//   GET  /api/candidates/{id}            trajectory, arm geometry, key poses, gripper events
//   POST /api/candidates/{id}/decision   {"verdict": "accept"|"reject", "reason": ...}
//   GET  /api/decisions                  full append-only decision log
//   GET  /api/accepted                   accepted ids in candidate order
//   POST /api/finalize                   writes the accepted dataset (409 with < 2 accepts)

#include <filesystem>
#include <limits>
#include <string>

#include <httplib.h>
#include <json.hpp>

#include "arcade/keypose.hpp"
#include "arcade/review.hpp"
#include "arcade/simenv.hpp"

namespace arcade {

struct ReviewContext {
  ArmModel arm;
  TaskSpec task;
  Demonstration seed_demo;
  KeyPoseReport key_poses;
};

namespace detail {

inline nlohmann::json point(const Vec2& p) { return {p.x(), p.y()}; }

inline nlohmann::json gripper_events(const Demonstration& d) {
  auto events = nlohmann::json::array();
  for (std::size_t i : grasp_release_indices(d)) {
    events.push_back({{"index", i}, {"type", d.steps[i].gripper == Gripper::closed ? "grasp" : "release"}});
  }
  return events;
}

inline std::size_t nearest_step(const Demonstration& d, const Vec2& p) {
  std::size_t best = 0;
  double dist = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < d.steps.size(); ++i) {
    const double e = (d.steps[i].pose.position - p).norm();
    if (e < dist) dist = e, best = i;
  }
  return best;
}

inline void send_json(httplib::Response& res, int status, const nlohmann::json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

inline void send_error(httplib::Response& res, int status, const std::string& msg) {
  send_json(res, status, {{"error", msg}});
}

}  // namespace detail

inline nlohmann::json candidate_summary(const ReviewBoard& board) {
  auto list = nlohmann::json::array();
  for (const auto& d : board.candidates().demos) {
    nlohmann::json item{{"id", d.id}, {"steps", d.steps.size()}, {"gripper_events", grasp_release_indices(d).size()}};
    if (auto dec = board.latest(d.id)) {
      item["verdict"] = to_string(dec->verdict);
      item["reason"] = dec->reason ? nlohmann::json(to_string(*dec->reason)) : nlohmann::json(nullptr);
    } else {
      item["verdict"] = nullptr;
      item["reason"] = nullptr;
    }
    list.push_back(std::move(item));
  }
  return {{"candidates", list},
          {"accepted_count", board.accepted_ids().size()},
          {"minimum_accepted", kMinAccepted},
          {"suggested_accepted", {kSuggestedAcceptedLow, kSuggestedAcceptedHigh}}};
}

inline nlohmann::json candidate_view(const ReviewBoard& board, const ReviewContext& ctx, const std::string& id) {
  const auto& d = board.candidate(id);
  auto steps = nlohmann::json::array();
  for (const auto& s : d.steps) {
    steps.push_back({{"p", {s.pose.position.x(), s.pose.position.y(), s.pose.heading}},
                     {"j", std::vector<double>(s.joints.data(), s.joints.data() + s.joints.size())},
                     {"g", s.gripper == Gripper::open ? 1 : 0}});
  }
  auto key = nlohmann::json::array();
  for (std::size_t k : ctx.key_poses.key_poses_indices) {
    const Vec2& p = ctx.seed_demo.steps.at(k).pose.position;
    key.push_back({{"seed_index", k}, {"position", detail::point(p)}, {"candidate_index", detail::nearest_step(d, p)}});
  }
  auto limits = nlohmann::json::array();
  for (const auto& l : ctx.arm.joint_limits) limits.push_back({l.lo, l.hi});
  auto waypoints = nlohmann::json::array();
  for (const auto& w : ctx.task.waypoints) waypoints.push_back(detail::point(w));
  nlohmann::json task{{"kind", ctx.task.kind == TaskKind::three_waypoints ? "three_waypoints" : "pick_and_place"},
                      {"waypoints", waypoints}};
  if (ctx.task.uses_gripper()) {
    task["object_start"] = detail::point(ctx.task.object_start);
    task["goal"] = detail::point(ctx.task.goal);
  }
  auto ghost = nlohmann::json::array();
  for (const auto& s : ctx.seed_demo.steps) ghost.push_back(detail::point(s.pose.position));
  nlohmann::json out{{"id", d.id},
                     {"seed", d.seed ? nlohmann::json(*d.seed) : nlohmann::json(nullptr)},
                     {"steps", steps},
                     {"arm", {{"link_lengths", ctx.arm.link_lengths}, {"joint_limits", limits},
                              {"base", detail::point(ctx.arm.base)}}},
                     {"task", task},
                     {"key_poses", key},
                     {"seed_trace", ghost},
                     {"gripper_events", detail::gripper_events(d)}};
  const auto dec = board.latest(id);
  out["decision"] = dec ? to_json(*dec) : nlohmann::json(nullptr);
  return out;
}

class ReviewServer {
 public:
  ReviewServer(ReviewBoard& board, ReviewContext ctx, const std::string& ui_dir = {})
      : board_(board), ctx_(std::move(ctx)) {
    using httplib::Request;
    using httplib::Response;

    server_.Get("/api/candidates", [this](const Request&, Response& res) {
      detail::send_json(res, 200, candidate_summary(board_));
    });

    server_.Get(R"(/api/candidates/([^/]+))", [this](const Request& req, Response& res) {
      try {
        detail::send_json(res, 200, candidate_view(board_, ctx_, req.matches[1]));
      } catch (const NotFoundError& e) {
        detail::send_error(res, 404, e.what());
      }
    });

    server_.Post(R"(/api/candidates/([^/]+)/decision)", [this](const Request& req, Response& res) {
      const std::string id = req.matches[1];
      nlohmann::json body = nlohmann::json::parse(req.body, nullptr, false);
      if (body.is_discarded() || !body.is_object() || !body.contains("verdict") || !body["verdict"].is_string()) {
        return detail::send_error(res, 400, "body must be a JSON object with a string 'verdict'");
      }
      auto verdict = parse_verdict(body["verdict"].get<std::string>());
      if (!verdict) return detail::send_error(res, 400, "verdict must be 'accept' or 'reject'");
      std::optional<RejectReason> reason;
      if (body.contains("reason") && !body["reason"].is_null()) {
        if (!body["reason"].is_string()) return detail::send_error(res, 400, "reason must be a string");
        reason = parse_reason(body["reason"].get<std::string>());
        if (!reason) return detail::send_error(res, 400, "reason must be unnatural, hazardous or preference");
      }
      try {
        detail::send_json(res, 200, to_json(board_.decide(id, *verdict, reason)));
      } catch (const NotFoundError& e) {
        detail::send_error(res, 404, e.what());
      } catch (const Error& e) {
        detail::send_error(res, 500, e.what());
      }
    });

    server_.Get("/api/decisions", [this](const Request&, Response& res) {
      auto log = nlohmann::json::array();
      for (const auto& d : board_.log()) log.push_back(to_json(d));
      detail::send_json(res, 200, {{"decisions", log}});
    });

    server_.Get("/api/accepted", [this](const Request&, Response& res) {
      const auto ids = board_.accepted_ids();
      detail::send_json(res, 200, {{"ids", ids}, {"count", ids.size()}});
    });

    server_.Post("/api/finalize", [this](const Request&, Response& res) {
      try {
        const auto data = board_.finalize();
        detail::send_json(res, 200, {{"count", data.demos.size()}, {"path", board_.accepted_path().string()}});
      } catch (const ConflictError& e) {
        detail::send_error(res, 409, e.what());
      } catch (const Error& e) {
        detail::send_error(res, 500, e.what());
      }
    });

    if (!ui_dir.empty()) {
      if (!std::filesystem::is_directory(ui_dir)) throw ConfigError("review ui_dir '" + ui_dir + "' is not a directory");
      server_.set_mount_point("/", ui_dir);
    }
  }

  httplib::Server& server() noexcept { return server_; }

  bool listen(const std::string& host, int port) { return server_.listen(host, port); }
  int bind_to_any_port(const std::string& host) { return server_.bind_to_any_port(host); }
  bool listen_after_bind() { return server_.listen_after_bind(); }
  void stop() { server_.stop(); }

 private:
  ReviewBoard& board_;
  ReviewContext ctx_;
  httplib::Server server_;
};

}  // namespace arcade
