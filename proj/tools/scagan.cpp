// scagan: data preparation, two-phase training, inference and evaluation.

#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "scagan/app.hpp"
#include "scagan/log.hpp"
#include "scagan/version.hpp"

namespace {

using namespace scagan;

RunConfig load_with_overrides(const std::string& path, const std::optional<std::uint64_t>& seed,
                              const std::optional<std::string>& ablation, const std::optional<std::string>& phase) {
  RunConfig c = load_config(path);
  if (seed) c.train.seed = *seed;
  if (ablation) {
    c.ablation = *ablation;
    apply_ablation(c.ablation, c.models);
  }
  if (phase) c.train.phase = parse_phase(*phase);
  c.train.validate();
  c.models.is.validate();
  return c;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App cli{"Pose-guided person image generation: edge prior transfer + image synthesis"};
  cli.require_subcommand(1);
  cli.set_version_flag("--version", std::string("scagan ") + kSourceHash);
  bool verbose = false, quiet = false;
  cli.add_flag("-v,--verbose", verbose, "Log progress");
  cli.add_flag("-q,--quiet", quiet, "Suppress warnings");

  const std::vector<std::string> args(argv + 1, argv + argc);
  std::string config_path, out, truth, resume, pct_ckpt, is_ckpt, metrics = "ssim,l1,fid,is,lpips";
  std::optional<std::uint64_t> seed;
  std::optional<std::string> ablation, phase;
  int epochs = -1;
  std::size_t limit = 0;
  bool toy_fid = false;
  app::SynthOptions synth;

  auto* prepare = cli.add_subcommand("prepare", "Cache edge maps and pose heatmaps for the configured images");
  prepare->add_option("--config", config_path, "INI config")->required()->check(CLI::ExistingFile);

  auto* train = cli.add_subcommand("train", "Train one phase");
  train->add_option("--config", config_path, "INI config")->required()->check(CLI::ExistingFile);
  train->add_option("--phase", phase, "pct (edge generator) or is (image generator)")
      ->check(CLI::IsMember({"pct", "is"}));
  train->add_option("--out", out, "Run directory (checkpoints, metrics CSV, manifest)")->required();
  train->add_option("--resume", resume, "Checkpoint to continue from")->check(CLI::ExistingFile);
  train->add_option("--pct-checkpoint", pct_ckpt, "Trained edge generator (phase is)");
  train->add_option("--seed", seed, "Override [train] seed");
  train->add_option("--ablation", ablation, "Override [ablation] name")->check(CLI::IsMember(ablation_names()));
  train->add_option("--epochs", epochs, "Stop after this many epochs of this invocation");

  auto* infer = cli.add_subcommand("infer", "Generate images for the configured pairs");
  infer->add_option("--config", config_path, "INI config")->required()->check(CLI::ExistingFile);
  infer->add_option("--pct-checkpoint", pct_ckpt, "Edge generator checkpoint");
  infer->add_option("--is-checkpoint", is_ckpt, "Image generator checkpoint")->required();
  infer->add_option("--out", out, "Output directory")->required();
  infer->add_option("--seed", seed, "Override [train] seed (decoder noise)");
  infer->add_option("--ablation", ablation, "Override [ablation] name")->check(CLI::IsMember(ablation_names()));
  infer->add_option("--limit", limit, "Process at most this many pairs");

  auto* eval = cli.add_subcommand("eval", "Score generated images against ground truth");
  eval->add_option("--out", out, "Directory of generated <pair_id>.png files; the report is written here")
      ->required()
      ->check(CLI::ExistingDirectory);
  eval->add_option("--truth", truth, "Directory of ground-truth <pair_id>.png files")
      ->required()
      ->check(CLI::ExistingDirectory);
  eval->add_option("--metrics", metrics, "Comma-separated: ssim,l1,fid,is,lpips");
  eval->add_flag("--toy-fid", toy_fid, "Compute FID on simple image statistics instead of skipping it");

  auto* synth_cmd = cli.add_subcommand("synth", "Write a synthetic dataset and a config for it");
  synth_cmd->add_option("--out", synth.out_dir, "Output directory")->required();
  synth_cmd->add_option("--people", synth.people, "Distinct people")->check(CLI::PositiveNumber);
  synth_cmd->add_option("--poses", synth.poses, "Poses per person")->check(CLI::Range(2, 64));
  synth_cmd->add_option("--height", synth.height, "Image height")->check(CLI::PositiveNumber);
  synth_cmd->add_option("--width", synth.width, "Image width")->check(CLI::PositiveNumber);
  synth_cmd->add_option("--seed", synth.seed, "Random seed");

  CLI11_PARSE(cli, argc, argv);
  set_log_level(quiet ? LogLevel::Quiet : verbose ? LogLevel::Info : LogLevel::Warning);

  try {
    if (*prepare) {
      const RunConfig c = load_config(config_path);
      const auto r = app::cmd_prepare(c, {"prepare", args});
      std::cout << "images " << r.images << ", edges written " << r.edges_written << ", heatmaps written "
                << r.heatmaps_written << ", up to date " << r.up_to_date << ", rejects " << r.rejects << " ("
                << r.rejects_file.string() << ")\n";
    } else if (*train) {
      const RunConfig c = load_with_overrides(config_path, seed, ablation, phase);
      app::TrainOptions o;
      o.out_dir = out;
      if (!resume.empty()) o.resume = resume;
      if (!pct_ckpt.empty()) o.pct_checkpoint = pct_ckpt;
      o.stop_after_epochs = epochs;
      const auto r = app::cmd_train(c, o, {"train", args});
      std::cout << "phase " << to_string(c.train.phase) << ": epochs " << r.summary.start_epoch << ".."
                << r.summary.end_epoch << ", " << r.summary.steps << " steps, metrics " << r.summary.metrics_csv.string()
                << "\n";
      if (!r.summary.checkpoints.empty()) std::cout << "last checkpoint " << r.summary.checkpoints.back().string() << "\n";
    } else if (*infer) {
      const RunConfig c = load_with_overrides(config_path, seed, ablation, std::nullopt);
      app::InferOptions o;
      if (!pct_ckpt.empty()) o.pct_checkpoint = pct_ckpt;
      o.is_checkpoint = is_ckpt;
      o.out_dir = out;
      o.limit = limit;
      const auto r = app::cmd_infer(c, o, {"infer", args});
      std::cout << r.pairs << " pairs -> " << r.images_dir.string() << " (index " << r.index_csv.string() << ")\n";
    } else if (*eval) {
      app::EvalOptions o;
      o.generated_dir = out;
      o.truth_dir = truth;
      o.metrics = app::split_list(metrics);
      o.toy_fid = toy_fid;
      const auto r = app::cmd_eval(o, {"eval", args});
      std::cout << r.report.table() << "per-pair scores: " << r.csv.string() << "\n";
    } else if (*synth_cmd) {
      const auto path = app::cmd_synth(synth, {"synth", args});
      std::cout << "wrote " << path.string() << "\n";
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
