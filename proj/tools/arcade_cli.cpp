// arcade: command-line driver for the demonstration-scaling pipeline.

#include <csignal>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "arcade/config.hpp"
#include "arcade/pipeline.hpp"
#include "arcade/review_server.hpp"

namespace {

arcade::ReviewServer* g_server = nullptr;

void on_signal(int) {
  if (g_server) g_server->stop();
}

void print(const nlohmann::json& j) { std::cout << j.dump(2) << '\n'; }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ARCADE demonstration scaling for a simulated planar arm"};
  app.require_subcommand(1);

  std::string config_path;
  std::string workdir;
  std::optional<std::uint64_t> seed;
  app.add_option("-c,--config", config_path, "pipeline config (JSON); defaults are used when omitted")
      ->check(CLI::ExistingFile);
  app.add_option("-w,--workdir", workdir, "directory for pipeline artifacts (overrides config)");
  app.add_option("-s,--seed", seed, "master seed (overrides config)");

  auto* record = app.add_subcommand("record", "record the seed demonstration with the scripted oracle");
  auto* detect = app.add_subcommand("detect-keyposes", "detect key poses in the seed demonstration");

  auto* generate = app.add_subcommand("generate", "generate the candidate batch for review");
  std::optional<std::size_t> batch;
  generate->add_option("-n,--count", batch, "number of candidates (overrides review.batch_size)");

  auto* serve = app.add_subcommand("review-serve", "serve the review API for the candidate batch");
  std::optional<int> port;
  std::optional<std::string> host, ui_dir;
  bool auto_accept_review = false;
  serve->add_option("-p,--port", port, "listen port");
  serve->add_option("--host", host, "listen address");
  serve->add_option("--ui-dir", ui_dir, "static browser client to mount at /");
  serve->add_flag("--auto-accept-all", auto_accept_review, "accept every candidate and finalize without serving");

  auto* autoval = app.add_subcommand("autovalidate", "generate and auto-validate until the target size is reached");
  std::optional<std::size_t> target;
  autoval->add_option("-n,--target", target, "scaled dataset size (overrides validation.target)");

  auto* train = app.add_subcommand("train", "train a behavior-cloning policy");
  std::string dataset = "scaled";
  train->add_option("-d,--dataset", dataset, "training set")->check(CLI::IsMember({"scaled", "accepted", "seed"}));

  auto* eval = app.add_subcommand("eval", "evaluate trained policies by task completion error");
  std::vector<std::string> policies{"scaled", "seed"};
  eval->add_option("-p,--policy", policies, "policy names to evaluate")
      ->check(CLI::IsMember({"scaled", "accepted", "seed"}));

  auto* pipeline = app.add_subcommand("pipeline", "run every stage end to end");
  bool auto_accept = false;
  pipeline->add_flag("--auto-accept-all", auto_accept, "skip human review and accept the whole batch");

  auto* show = app.add_subcommand("config", "print the effective configuration");

  CLI11_PARSE(app, argc, argv);

  try {
    arcade::PipelineConfig cfg = config_path.empty() ? arcade::parse_config(nlohmann::json::object())
                                                     : arcade::load_config(config_path);
    if (!workdir.empty()) cfg.workdir = workdir;
    if (seed) cfg.seed = *seed;
    if (batch) cfg.review.batch_size = *batch;
    if (target) cfg.scale_target = *target;
    if (port) cfg.review.port = *port;
    if (host) cfg.review.host = *host;
    if (ui_dir) cfg.review.ui_dir = *ui_dir;
    cfg.validate();
    const arcade::Workspace ws{cfg.workdir};

    if (*show) {
      print(arcade::to_json(cfg));
    } else if (*record) {
      print(arcade::run_record(cfg, ws));
    } else if (*detect) {
      print(arcade::run_detect_keyposes(cfg, ws));
    } else if (*generate) {
      print(arcade::run_generate(cfg, ws));
    } else if (*serve) {
      if (auto_accept_review) {
        print(arcade::run_auto_review(ws));
        return 0;
      }
      auto board = arcade::open_review_board(ws);
      arcade::ReviewContext ctx{cfg.arm, cfg.task, arcade::detail::load_seed(ws), arcade::detail::load_keyposes(ws)};
      arcade::ReviewServer server(board, std::move(ctx), cfg.review.ui_dir);
      g_server = &server;
      std::signal(SIGINT, on_signal);
      std::signal(SIGTERM, on_signal);
      std::cerr << "review service on http://" << cfg.review.host << ':' << cfg.review.port << " ("
                << board.candidates().demos.size() << " candidates)\n";
      if (!server.listen(cfg.review.host, cfg.review.port)) {
        std::cerr << "error: cannot listen on " << cfg.review.host << ':' << cfg.review.port << '\n';
        return 1;
      }
    } else if (*autoval) {
      const auto s = arcade::run_autovalidate(cfg, ws);
      print(s);
      if (!s["shortfall"].is_null()) std::cerr << "warning: " << s["shortfall"].get<std::string>() << '\n';
    } else if (*train) {
      auto s = arcade::run_train(cfg, ws, dataset);
      s.erase("loss_trace");
      print(s);
    } else if (*eval) {
      print(arcade::run_eval(cfg, ws, policies));
    } else if (*pipeline) {
      const auto s = arcade::run_pipeline(cfg, ws, auto_accept);
      std::cout << "scaled policy TCE " << s["tce_scaled"].get<double>() << " m, seed policy TCE "
                << s["tce_seed"].get<double>() << " m\n"
                << "summary written to " << ws.pipeline_summary().string() << '\n';
    }
  } catch (const arcade::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const arcade::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
