#pragma once

// Review board: holds a candidate batch, records accept/reject decisions in an
// append-only log and writes the accepted dataset on finalize.

#include <chrono>
#include <cstdint>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "arcade/demo_io.hpp"
#include "arcade/error.hpp"
#include "arcade/trajectory.hpp"

namespace arcade {

class NotFoundError : public Error {
 public:
  using Error::Error;
};

class ConflictError : public Error {
 public:
  using Error::Error;
};

enum class Verdict { accept, reject };
enum class RejectReason { unnatural, hazardous, preference };

inline std::string_view to_string(Verdict v) { return v == Verdict::accept ? "accept" : "reject"; }

inline std::string_view to_string(RejectReason r) {
  switch (r) {
    case RejectReason::unnatural: return "unnatural";
    case RejectReason::hazardous: return "hazardous";
    case RejectReason::preference: return "preference";
  }
  return "preference";
}

inline std::optional<Verdict> parse_verdict(std::string_view s) {
  if (s == "accept") return Verdict::accept;
  if (s == "reject") return Verdict::reject;
  return std::nullopt;
}

inline std::optional<RejectReason> parse_reason(std::string_view s) {
  if (s == "unnatural") return RejectReason::unnatural;
  if (s == "hazardous") return RejectReason::hazardous;
  if (s == "preference") return RejectReason::preference;
  return std::nullopt;
}

struct Decision {
  std::uint64_t seq = 0;
  std::string id;
  Verdict verdict = Verdict::reject;
  std::optional<RejectReason> reason;
  std::string timestamp;
};

inline nlohmann::json to_json(const Decision& d) {
  nlohmann::json j{{"seq", d.seq}, {"id", d.id}, {"verdict", to_string(d.verdict)}, {"timestamp", d.timestamp}};
  j["reason"] = d.reason ? nlohmann::json(to_string(*d.reason)) : nlohmann::json(nullptr);
  return j;
}

inline std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

// Recommended number of approvals before finalizing.
inline constexpr std::size_t kMinAccepted = 2;
inline constexpr std::size_t kSuggestedAcceptedLow = 10;
inline constexpr std::size_t kSuggestedAcceptedHigh = 15;

class ReviewBoard {
 public:
  using Clock = std::function<std::string()>;

  /// Replays an existing decision log if one is present at `log_path`.
  ReviewBoard(Dataset candidates, std::filesystem::path log_path, std::filesystem::path accepted_path,
              Clock clock = utc_timestamp)
      : candidates_(std::move(candidates)),
        log_path_(std::move(log_path)),
        accepted_path_(std::move(accepted_path)),
        clock_(std::move(clock)) {
    validate_structure(candidates_);
    for (std::size_t i = 0; i < candidates_.demos.size(); ++i) index_[candidates_.demos[i].id] = i;
    replay_log();
  }

  const Dataset& candidates() const noexcept { return candidates_; }

  const Demonstration& candidate(const std::string& id) const {
    auto it = index_.find(id);
    if (it == index_.end()) throw NotFoundError("unknown candidate '" + id + "'");
    return candidates_.demos[it->second];
  }

  /// Appends a decision; a later decision for the same id supersedes earlier ones.
  Decision decide(const std::string& id, Verdict verdict, std::optional<RejectReason> reason) {
    std::unique_lock lock(mutex_);
    if (!index_.count(id)) throw NotFoundError("unknown candidate '" + id + "'");
    Decision d{log_.size() + 1, id, verdict, reason, clock_()};
    append_to_file(d);
    log_.push_back(d);
    latest_[id] = log_.size() - 1;
    return d;
  }

  std::optional<Decision> latest(const std::string& id) const {
    std::shared_lock lock(mutex_);
    auto it = latest_.find(id);
    if (it == latest_.end()) return std::nullopt;
    return log_[it->second];
  }

  std::vector<Decision> log() const {
    std::shared_lock lock(mutex_);
    return log_;
  }

  /// Accepted ids in candidate order.
  std::vector<std::string> accepted_ids() const {
    std::shared_lock lock(mutex_);
    return accepted_ids_locked();
  }

  /// Writes the accepted dataset; needs at least two approvals.
  Dataset finalize() {
    std::unique_lock lock(mutex_);
    const auto ids = accepted_ids_locked();
    if (ids.size() < kMinAccepted) {
      throw ConflictError("finalize needs at least " + std::to_string(kMinAccepted) + " accepted candidates, have " +
                          std::to_string(ids.size()) + "; approve more (10-15 recommended)");
    }
    Dataset out;
    out.role = DatasetRole::accepted;
    for (const auto& id : ids) out.demos.push_back(candidates_.demos[index_.at(id)]);
    write_demonstrations(out, accepted_path_);
    return out;
  }

  const std::filesystem::path& accepted_path() const noexcept { return accepted_path_; }

 private:
  std::vector<std::string> accepted_ids_locked() const {
    std::vector<std::string> ids;
    for (const auto& d : candidates_.demos) {
      auto it = latest_.find(d.id);
      if (it != latest_.end() && log_[it->second].verdict == Verdict::accept) ids.push_back(d.id);
    }
    return ids;
  }

  void append_to_file(const Decision& d) {
    std::ofstream os(log_path_, std::ios::app | std::ios::binary);
    if (!os) throw Error("cannot append to decision log '" + log_path_.string() + "'");
    os << to_json(d).dump() << '\n';
    if (!os) throw Error("write to decision log '" + log_path_.string() + "' failed");
  }

  void replay_log() {
    std::ifstream is(log_path_, std::ios::binary);
    if (!is) return;
    std::string raw;
    std::size_t line = 0;
    while (std::getline(is, raw)) {
      ++line;
      if (raw.empty()) continue;
      Decision d;
      try {
        const auto j = nlohmann::json::parse(raw);
        d.seq = j.at("seq").get<std::uint64_t>();
        d.id = j.at("id").get<std::string>();
        auto v = parse_verdict(j.at("verdict").get<std::string>());
        if (!v) throw ParseError(line, "unknown verdict in decision log");
        d.verdict = *v;
        if (j.contains("reason") && !j.at("reason").is_null()) {
          auto r = parse_reason(j.at("reason").get<std::string>());
          if (!r) throw ParseError(line, "unknown reason in decision log");
          d.reason = *r;
        }
        d.timestamp = j.value("timestamp", "");
      } catch (const nlohmann::json::exception& e) {
        throw ParseError(line, std::string("malformed decision log entry: ") + e.what());
      }
      if (!index_.count(d.id)) {
        throw ValidationError("decision log '" + log_path_.string() + "' names candidate '" + d.id +
                              "' which is not in this batch");
      }
      log_.push_back(d);
      latest_[d.id] = log_.size() - 1;
    }
  }

  Dataset candidates_;
  std::unordered_map<std::string, std::size_t> index_;
  std::filesystem::path log_path_;
  std::filesystem::path accepted_path_;
  Clock clock_;
  mutable std::shared_mutex mutex_;
  std::vector<Decision> log_;
  std::unordered_map<std::string, std::size_t> latest_;
};

}  // namespace arcade
