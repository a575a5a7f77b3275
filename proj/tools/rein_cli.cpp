#include <iostream>

#include "CLI11.hpp"
#include "rein/exp/runner.hpp"

int main(int argc, char** argv) {
  CLI::App app{"hierarchical recurrent dynamics models: data, training, evaluation"};
  app.require_subcommand(1);

  std::string config_path, data_dir, out, ckpt, kind = "rein";
  int64_t episode = 0, horizon = 20, max_steps = -1, stride_target = 4000;
  bool resume = false;

  auto* gen = app.add_subcommand("generate", "simulate and write train/test datasets");
  gen->add_option("--config", config_path, "experiment config (INI)")->required();
  gen->add_option("--out", out, "output directory")->required();

  auto* tr = app.add_subcommand("train", "train a model and write a checkpoint");
  tr->add_option("--config", config_path, "experiment config (INI)")->required();
  tr->add_option("--data", data_dir, "dataset directory from 'generate'")->required();
  tr->add_option("--out", ckpt, "checkpoint path (JSON; a .bin sidecar is added)")->required();
  tr->add_option("--model", kind, "rein|lstm|gtgraph")
      ->check(CLI::IsMember({"rein", "lstm", "gtgraph"}));
  tr->add_flag("--resume", resume, "continue from the checkpoint at --out");
  tr->add_option("--max-steps", max_steps, "stop once the global step reaches this");

  auto* ev = app.add_subcommand("eval", "rollout MSE and edge metrics on the test split");
  ev->add_option("--config", config_path, "experiment config (INI)")->required();
  ev->add_option("--data", data_dir, "dataset directory")->required();
  ev->add_option("--checkpoint", ckpt, "trained checkpoint")->required();
  ev->add_option("--out", out, "output prefix for .csv and .manifest.json")->required();

  auto* ro = app.add_subcommand("rollout", "export one episode's predictions as CSV + SVG");
  ro->add_option("--config", config_path, "experiment config (INI)")->required();
  ro->add_option("--data", data_dir, "dataset directory")->required();
  ro->add_option("--checkpoint", ckpt, "trained checkpoint")->required();
  ro->add_option("--out", out, "output prefix")->required();
  ro->add_option("--episode", episode, "test episode index");
  ro->add_option("--horizon", horizon, "prediction steps past the context");

  auto* pl = app.add_subcommand("plot", "export inferred vs true edge heatmaps");
  pl->add_option("--data", data_dir, "dataset directory")->required();
  pl->add_option("--checkpoint", ckpt, "trained checkpoint")->required();
  pl->add_option("--out", out, "output prefix")->required();
  pl->add_option("--episode", episode, "test episode index");

  auto* gc = app.add_subcommand("gradcheck", "finite-difference audit of the training objective");
  gc->add_option("--stride-target", stride_target, "approximate number of coordinates to probe");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (gen->parsed()) {
      auto cfg = rein::expkit::ExperimentConfig::from_file(config_path);
      rein::expkit::cmd_generate(cfg, out, std::cout);
    } else if (tr->parsed()) {
      auto cfg = rein::expkit::ExperimentConfig::from_file(config_path);
      rein::expkit::cmd_train(cfg, kind, data_dir, ckpt, resume, max_steps, std::cout);
    } else if (ev->parsed()) {
      auto cfg = rein::expkit::ExperimentConfig::from_file(config_path);
      rein::expkit::cmd_eval(cfg, ckpt, data_dir, out, std::cout);
    } else if (ro->parsed()) {
      auto cfg = rein::expkit::ExperimentConfig::from_file(config_path);
      rein::expkit::cmd_rollout(cfg, ckpt, data_dir, out, episode, horizon, std::cout);
    } else if (pl->parsed()) {
      rein::expkit::cmd_plot(ckpt, data_dir, out, episode, std::cout);
    } else if (gc->parsed()) {
      return rein::expkit::cmd_gradcheck(std::cout, stride_target).pass ? 0 : 1;
    }
  } catch (const rein::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
