// Command-line driver for the forward-ECG pipeline: dataset generation,
// training, evaluation, ablations, plotting, gradient checks, and artifact
// verification. Every subcommand is deterministic given (--config, --seed).
#include <cstdint>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "ecgfwd/errors.hpp"
#include "ecgfwd/pipeline.hpp"

namespace {

struct CommonOpts {
  std::string config_path;
  bool has_seed = false;
  uint64_t seed = 0;
};

// Loads the experiment config, or defaults when --config is omitted, and
// applies the --seed override (which also drives the training shuffle).
ecgfwd::ExperimentConfig resolve_config(const CommonOpts& opts) {
  ecgfwd::ExperimentConfig cfg;
  if (!opts.config_path.empty()) cfg = ecgfwd::load_config(opts.config_path);
  if (opts.has_seed) {
    cfg.seed = opts.seed;
    cfg.schedule.seed = opts.seed;
  }
  cfg.validate();
  return cfg;
}

void add_common(CLI::App* cmd, CommonOpts& opts) {
  cmd->add_option("--config", opts.config_path, "experiment config JSON");
  cmd->add_option("--seed", opts.seed, "override the experiment seed")
      ->each([&opts](const std::string&) { opts.has_seed = true; });
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"forward ECG surrogate: synthetic data, training, evaluation"};
  app.require_subcommand(1);

  CommonOpts opts;
  std::string out = "out";
  std::string data_dir;
  std::string ckpt_stem;
  std::string split = "test";
  bool split_by_mesh = false;
  bool f64 = false;

  CLI::App* gen_mesh = app.add_subcommand("gen-mesh", "generate one synthetic atrium mesh JSON");
  add_common(gen_mesh, opts);
  gen_mesh->add_option("--out", out, "output mesh path (JSON)")->required();

  CLI::App* gen_data = app.add_subcommand("gen-data", "generate the synthetic dataset");
  add_common(gen_data, opts);
  gen_data->add_option("--out", out, "output dataset directory")->required();
  gen_data->add_flag("--split-by-mesh", split_by_mesh,
                     "assign splits by mesh id instead of sample id");

  CLI::App* train = app.add_subcommand("train", "train the surrogate on a dataset");
  add_common(train, opts);
  train->add_option("--data", data_dir, "dataset directory")->required();
  train->add_option("--out", out, "output directory (checkpoint + log)")->required();
  train->add_flag("--f64", f64, "train in 64-bit (verification mode)");

  CLI::App* eval = app.add_subcommand("eval", "evaluate a checkpoint on one split");
  eval->add_option("--ckpt", ckpt_stem, "checkpoint stem (without .json/.bin)")->required();
  eval->add_option("--data", data_dir, "dataset directory")->required();
  eval->add_option("--split", split, "train, val, or test");
  eval->add_option("--out", out, "output directory (metrics.csv, summary.json)")->required();
  eval->add_flag("--f64", f64, "evaluate in 64-bit");

  CLI::App* ablate = app.add_subcommand("ablate", "retrain with each stream/attention disabled");
  add_common(ablate, opts);
  ablate->add_option("--data", data_dir, "dataset directory")->required();
  ablate->add_option("--out", out, "output directory (ablation.csv)")->required();
  ablate->add_flag("--f64", f64, "train in 64-bit");

  CLI::App* plot = app.add_subcommand("plot", "write per-trace SVG + CSV overlays");
  plot->add_option("--ckpt", ckpt_stem, "checkpoint stem (without .json/.bin)")->required();
  plot->add_option("--data", data_dir, "dataset directory")->required();
  plot->add_option("--split", split, "train, val, or test");
  plot->add_option("--out", out, "output directory")->required();
  plot->add_flag("--f64", f64, "predict in 64-bit");

  CLI::App* grad = app.add_subcommand("grad-check", "finite-difference check of all gradients");
  add_common(grad, opts);

  CLI::App* verify = app.add_subcommand("verify", "check dataset/checkpoint integrity");
  verify->add_option("--data", data_dir, "dataset directory");
  verify->add_option("--ckpt", ckpt_stem, "checkpoint stem (without .json/.bin)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen_mesh->parsed()) return ecgfwd::cmd_gen_mesh(resolve_config(opts), out);
    if (gen_data->parsed()) {
      ecgfwd::ExperimentConfig cfg = resolve_config(opts);
      if (split_by_mesh) cfg.split.by_mesh = true;
      return ecgfwd::cmd_gen_data(cfg, out);
    }
    if (train->parsed()) return ecgfwd::cmd_train(resolve_config(opts), data_dir, out, f64);
    if (eval->parsed()) return ecgfwd::cmd_eval(ckpt_stem, data_dir, split, out, f64);
    if (ablate->parsed()) return ecgfwd::cmd_ablate(resolve_config(opts), data_dir, out, f64);
    if (plot->parsed()) return ecgfwd::cmd_plot(ckpt_stem, data_dir, split, out, f64);
    if (grad->parsed()) return ecgfwd::cmd_grad_check(resolve_config(opts).seed);
    if (verify->parsed()) {
      if (data_dir.empty() && ckpt_stem.empty())
        throw ecgfwd::ValidationError("verify: pass --data and/or --ckpt");
      return ecgfwd::cmd_verify(data_dir, ckpt_stem);
    }
  } catch (const ecgfwd::IoError& e) {
    std::cerr << "I/O error: " << e.what() << "\n";
    return 2;
  } catch (const ecgfwd::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
