#pragma once

// Pipeline stages over a working directory. Each stage reads its inputs from
// files written by earlier stages and returns a JSON summary.

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "arcade/autovalidate.hpp"
#include "arcade/bc.hpp"
#include "arcade/config.hpp"
#include "arcade/demo_io.hpp"
#include "arcade/generator.hpp"
#include "arcade/keypose.hpp"
#include "arcade/oracle.hpp"
#include "arcade/review.hpp"

namespace arcade {

struct Workspace {
  std::filesystem::path dir;

  std::filesystem::path seed_demo() const { return dir / "seed_demo.txt"; }
  std::filesystem::path keyposes() const { return dir / "keyposes.txt"; }
  std::filesystem::path candidates() const { return dir / "candidates.txt"; }
  std::filesystem::path decisions() const { return dir / "decisions.jsonl"; }
  std::filesystem::path accepted() const { return dir / "accepted.txt"; }
  std::filesystem::path scaled() const { return dir / "scaled.txt"; }
  std::filesystem::path outcomes() const { return dir / "outcomes.tsv"; }
  std::filesystem::path autovalidate_summary() const { return dir / "autovalidate.json"; }
  std::filesystem::path policy(const std::string& name) const { return dir / ("policy_" + name + ".txt"); }
  std::filesystem::path train_summary(const std::string& name) const { return dir / ("train_" + name + ".json"); }
  std::filesystem::path eval_summary() const { return dir / "eval.json"; }
  std::filesystem::path pipeline_summary() const { return dir / "pipeline.json"; }

  void ensure() const { std::filesystem::create_directories(dir); }
};

namespace detail {

inline void require(const std::filesystem::path& p, const std::string& producer) {
  if (!std::filesystem::exists(p)) {
    throw MissingArtifactError("missing '" + p.string() + "'; run `" + producer + "` first");
  }
}

inline void write_text(const std::filesystem::path& p, const std::string& text) {
  std::ofstream os(p, std::ios::binary | std::ios::trunc);
  if (!os) throw Error("cannot open '" + p.string() + "' for writing");
  os << text;
  if (!os) throw Error("write to '" + p.string() + "' failed");
}

inline void write_json(const std::filesystem::path& p, const nlohmann::json& j) { write_text(p, j.dump(2) + "\n"); }

inline Demonstration load_seed(const Workspace& ws) {
  require(ws.seed_demo(), "record");
  auto data = read_demonstrations(ws.seed_demo());
  if (data.demos.size() != 1) {
    throw ValidationError("'" + ws.seed_demo().string() + "' must hold exactly one demonstration");
  }
  return std::move(data.demos.front());
}

inline KeyPoseReport load_keyposes(const Workspace& ws) {
  require(ws.keyposes(), "detect-keyposes");
  std::ifstream is(ws.keyposes());
  return read_key_pose_report(is);
}

}  // namespace detail

// Seed streams, all derived from the master seed.
inline std::uint64_t review_seed(const PipelineConfig& c) { return derive_seed(c.seed, "review"); }
inline std::uint64_t validate_seed(const PipelineConfig& c) { return derive_seed(c.seed, "validate"); }
inline std::uint64_t scale_seed(const PipelineConfig& c) { return derive_seed(c.seed, "scale"); }
inline std::uint64_t train_seed(const PipelineConfig& c) { return derive_seed(c.seed, "train"); }
inline std::uint64_t eval_seed(const PipelineConfig& c) { return derive_seed(c.seed, "eval"); }

inline nlohmann::json run_record(const PipelineConfig& c, const Workspace& ws) {
  ws.ensure();
  auto run = oracle_run(c.task, c.arm, c.oracle, c.seed);
  validate_demonstration(run.demo, c.arm);
  Dataset data{DatasetRole::seed, {run.demo}};
  write_demonstrations(data, ws.seed_demo());
  return {{"stage", "record"},
          {"id", run.demo.id},
          {"steps", run.demo.size()},
          {"replay_tce", tce(replay(run.demo, c.arm, c.task), c.task)},
          {"path", ws.seed_demo().filename().string()}};
}

inline nlohmann::json run_detect_keyposes(const PipelineConfig& c, const Workspace& ws) {
  const auto seed = detail::load_seed(ws);
  const auto report = detect_key_poses(seed, c.keypose);
  std::ostringstream os;
  write_key_pose_report(report, seed.id, os);
  detail::write_text(ws.keyposes(), os.str());
  return {{"stage", "detect-keyposes"},
          {"grasp_release", report.grasp_release_indices},
          {"sharp_turn", report.sharp_turn_indices},
          {"dense_region", report.dense_region_indices},
          {"key_poses", report.key_poses_indices},
          {"path", ws.keyposes().filename().string()}};
}

inline nlohmann::json run_generate(const PipelineConfig& c, const Workspace& ws) {
  const auto seed = detail::load_seed(ws);
  run_detect_keyposes(c, ws);
  const auto report = detail::load_keyposes(ws);
  auto batch = generate_batch(seed, report, c.review.batch_size, c.arm, c.task, c.sampler, c.planner, review_seed(c));
  write_demonstrations(batch.dataset, ws.candidates());
  return {{"stage", "generate"},
          {"count", batch.dataset.demos.size()},
          {"attempts", batch.attempts},
          {"failures", batch.failures},
          {"path", ws.candidates().filename().string()}};
}

inline ReviewBoard open_review_board(const Workspace& ws, ReviewBoard::Clock clock = utc_timestamp) {
  detail::require(ws.candidates(), "generate");
  return ReviewBoard(read_demonstrations(ws.candidates()), ws.decisions(), ws.accepted(), std::move(clock));
}

/// Accepts every candidate without a reviewer. Decisions carry the fixed
/// timestamp "auto" so reruns are byte-identical.
inline nlohmann::json run_auto_review(const Workspace& ws) {
  std::filesystem::remove(ws.decisions());
  auto board = open_review_board(ws, [] { return std::string("auto"); });
  for (const auto& d : board.candidates().demos) board.decide(d.id, Verdict::accept, std::nullopt);
  const auto accepted = board.finalize();
  return {{"stage", "review"}, {"mode", "auto-accept-all"}, {"accepted", accepted.demos.size()},
          {"path", ws.accepted().filename().string()}};
}

inline nlohmann::json run_autovalidate(const PipelineConfig& c, const Workspace& ws) {
  const auto seed = detail::load_seed(ws);
  const auto report = detail::load_keyposes(ws);
  detail::require(ws.accepted(), "review-serve (finalize)");
  ValidationConfig vc = c.validation;
  vc.seed = validate_seed(c);
  const auto accepted = build_accepted_set(read_demonstrations(ws.accepted()), vc);

  const auto master = scale_seed(c);
  CandidateStream next = [&](std::size_t attempt) {
    return generate_attempt(seed, report, c.arm, c.task, c.sampler, c.planner, master, attempt, "gen");
  };
  const auto r = scale_dataset(next, accepted, c.scale_target, vc);

  write_demonstrations(r.scaled, ws.scaled());
  std::ostringstream log;
  write_outcome_log(r.log, log);
  detail::write_text(ws.outcomes(), log.str());

  nlohmann::json summary{{"stage", "autovalidate"},
                         {"accepted_set_size", accepted.size()},
                         {"min_similarity", accepted.min_similarity()},
                         {"beta", vc.beta},
                         {"threshold", vc.beta * accepted.min_similarity()},
                         {"target", r.target},
                         {"scaled_size", r.scaled.demos.size()},
                         {"attempts", r.attempts},
                         {"scored", r.log.size()},
                         {"acceptance_rate", r.acceptance_rate},
                         {"shortfall", r.shortfall ? nlohmann::json(*r.shortfall) : nlohmann::json(nullptr)},
                         {"path", ws.scaled().filename().string()}};
  detail::write_json(ws.autovalidate_summary(), summary);
  return summary;
}

/// Dataset names accepted by run_train: "scaled", "accepted" or "seed".
inline Dataset load_training_set(const Workspace& ws, const std::string& name) {
  if (name == "seed") {
    return Dataset{DatasetRole::seed, {detail::load_seed(ws)}};
  }
  if (name == "scaled") {
    detail::require(ws.scaled(), "autovalidate");
    return read_demonstrations(ws.scaled());
  }
  if (name == "accepted") {
    detail::require(ws.accepted(), "review-serve (finalize)");
    return read_demonstrations(ws.accepted());
  }
  throw ConfigError("unknown training dataset '" + name + "' (expected scaled, accepted or seed)");
}

inline nlohmann::json run_train(const PipelineConfig& c, const Workspace& ws, const std::string& dataset) {
  const auto data = load_training_set(ws, dataset);
  if (data.demos.empty()) throw ValidationError("training dataset '" + dataset + "' is empty");
  TrainConfig tc = c.train;
  tc.seed = train_seed(c);
  const auto result = train(data, tc);
  write_policy(result.policy, ws.policy(dataset));
  nlohmann::json summary{{"stage", "train"},
                         {"dataset", dataset},
                         {"demonstrations", data.demos.size()},
                         {"epochs", tc.epochs},
                         {"final_loss", result.loss_trace.empty() ? 0.0 : result.loss_trace.back()},
                         {"loss_trace", result.loss_trace},
                         {"path", ws.policy(dataset).filename().string()}};
  detail::write_json(ws.train_summary(dataset), summary);
  return summary;
}

inline std::size_t eval_horizon(const PipelineConfig& c, const Workspace& ws) {
  if (c.eval.horizon > 0) return c.eval.horizon;
  return 2 * detail::load_seed(ws).size();
}

/// Evaluates each named policy with the same rollout seeds.
inline nlohmann::json run_eval(const PipelineConfig& c, const Workspace& ws, const std::vector<std::string>& names) {
  const std::size_t horizon = eval_horizon(c, ws);
  nlohmann::json policies = nlohmann::json::object();
  for (const auto& name : names) {
    detail::require(ws.policy(name), "train --dataset " + name);
    const auto policy = read_policy(ws.policy(name));
    const auto e = evaluate(policy, c.task, c.arm, horizon, c.eval.trials, eval_seed(c), c.eval.mode);
    policies[name] = {{"mean_tce", e.mean}, {"std_tce", e.stddev}, {"tces", e.tces}};
  }
  nlohmann::json summary{{"stage", "eval"},
                         {"horizon", horizon},
                         {"trials", c.eval.trials},
                         {"mode", c.eval.mode == RolloutMode::sample ? "sample" : "mean"},
                         {"policies", policies}};
  detail::write_json(ws.eval_summary(), summary);
  return summary;
}

/// Runs every stage. Without auto_accept the accepted dataset must already
/// exist (written by the review service on finalize).
inline nlohmann::json run_pipeline(const PipelineConfig& c, const Workspace& ws, bool auto_accept) {
  nlohmann::json stages = nlohmann::json::array();
  stages.push_back(run_record(c, ws));
  stages.push_back(run_detect_keyposes(c, ws));
  if (auto_accept) {
    stages.push_back(run_generate(c, ws));
    stages.push_back(run_auto_review(ws));
  } else {
    detail::require(ws.accepted(), "review-serve (finalize), or pass --auto-accept-all");
  }
  const auto scale = run_autovalidate(c, ws);
  stages.push_back(scale);
  if (scale["scaled_size"].get<std::size_t>() == 0) {
    throw ValidationError("automatic validation accepted no demonstrations; cannot train on the scaled dataset");
  }
  stages.push_back(run_train(c, ws, "scaled"));
  stages.push_back(run_train(c, ws, "seed"));
  const auto eval = run_eval(c, ws, {"scaled", "seed"});
  stages.push_back(eval);

  const double a = eval["policies"]["scaled"]["mean_tce"].get<double>();
  const double b = eval["policies"]["seed"]["mean_tce"].get<double>();
  nlohmann::json summary{{"seed", c.seed},
                         {"stages", stages},
                         {"tce_scaled", a},
                         {"tce_seed", b},
                         {"scaled_better", a < b},
                         {"ratio", b > 0.0 ? a / b : 0.0}};
  detail::write_json(ws.pipeline_summary(), summary);
  return summary;
}

}  // namespace arcade
