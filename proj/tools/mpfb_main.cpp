// Command-line surface for the feedback-model learning pipeline: each
// subcommand runs one phase against file-based artifacts under the configured
// root directory.

#include <exception>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "mpfb/pipeline.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Reactive movement-primitive feedback learning pipeline"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_root;
  long long seed_override = -1;
  bool lenient = false;
  app.add_option("--config", config_path, "Pipeline config JSON");
  app.add_option("--out", out_root, "Override the artifact root directory");
  app.add_option("--seed", seed_override, "Override the global seed");
  app.add_flag("--lenient", lenient, "Continue past per-demo failures");

  auto* init = app.add_subcommand("init-config", "Write a default config file");
  std::string init_path = "config.json";
  init->add_option("path", init_path, "Where to write the config");

  app.add_subcommand("gen-demos", "Generate the synthetic nominal demo corpus");
  app.add_subcommand("segment", "Segment the demos into primitives");
  app.add_subcommand("learn-dmp", "Fit primitive DMPs and expected sensor traces");
  app.add_subcommand("gen-corrections", "Generate corrected demos on seen settings");
  app.add_subcommand("learn-fb", "Train the feedback models (supervised)");
  app.add_subcommand("rl", "Refine the feedback models with reinforcement learning");
  app.add_subcommand("eval", "Evaluate all settings and write the cost table");
  app.add_subcommand("run-all", "Run every phase in order");

  auto* unroll_cmd = app.add_subcommand("unroll", "Unroll one primitive on the plant");
  int unroll_prim = 2;
  double unroll_roll = 0.0;
  std::string unroll_fb;
  std::string unroll_out = "rollout.csv";
  unroll_cmd->add_option("--primitive", unroll_prim, "1-based primitive index");
  unroll_cmd->add_option("--roll-deg", unroll_roll, "Tilt setting in degrees");
  unroll_cmd->add_option("--feedback", unroll_fb, "Feedback model JSON (optional)");
  unroll_cmd->add_option("--trajectory-out", unroll_out, "Output trajectory CSV");

  CLI11_PARSE(app, argc, argv);

  try {
    if (init->parsed()) {
      mpfb::write_default_config(init_path);
      std::cout << "wrote " << init_path << "\n";
      return 0;
    }
    if (config_path.empty()) {
      std::cerr << "error: --config is required\n";
      return 2;
    }
    mpfb::PipelineConfig cfg = mpfb::load_pipeline_config(config_path);
    if (!out_root.empty()) {
      cfg.root = out_root;
    }
    if (seed_override >= 0) {
      cfg.seed = static_cast<std::uint64_t>(seed_override);
    }
    cfg.lenient = lenient;

    const std::string cmd = app.get_subcommands().front()->get_name();
    if (cmd == "gen-demos") {
      mpfb::cmd_gen_demos(cfg);
    } else if (cmd == "segment") {
      mpfb::cmd_segment(cfg);
    } else if (cmd == "learn-dmp") {
      mpfb::cmd_learn_dmp(cfg);
    } else if (cmd == "gen-corrections") {
      mpfb::cmd_gen_corrections(cfg);
    } else if (cmd == "learn-fb") {
      mpfb::cmd_learn_fb(cfg);
    } else if (cmd == "rl") {
      mpfb::cmd_rl(cfg);
    } else if (cmd == "eval") {
      mpfb::cmd_eval(cfg);
    } else if (cmd == "run-all") {
      mpfb::run_full_pipeline(cfg);
    } else if (cmd == "unroll") {
      mpfb::cmd_unroll(cfg, unroll_prim - 1, unroll_roll, unroll_fb, unroll_out);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
