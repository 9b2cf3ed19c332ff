#pragma once

// The `scagan` subcommands as library calls. Each writes a run manifest into
// its output directory.

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "scagan/config.hpp"
#include "scagan/metrics.hpp"
#include "scagan/trainer.hpp"

namespace scagan::app {

/// Command name and raw arguments, recorded verbatim in the manifest.
struct Invocation {
  std::string command;
  std::vector<std::string> args;
};

/// {command, args, config, seed, ablation, source_hash, ...extra}.
nlohmann::json make_manifest(const Invocation& inv, const RunConfig* config, std::uint64_t seed,
                             const nlohmann::json& extra = nlohmann::json::object());
/// Writes <dir>/manifest_<name>.json and returns its path.
std::filesystem::path write_manifest(const std::filesystem::path& dir, const std::string& name,
                                     const nlohmann::json& manifest);

struct PrepareReport {
  std::size_t images = 0;  // images with a keypoint record
  std::size_t edges_written = 0;
  std::size_t heatmaps_written = 0;
  std::size_t up_to_date = 0;  // cache files left untouched
  std::size_t rejects = 0;
  std::filesystem::path rejects_file;
  std::filesystem::path manifest;
};

/// Fills [data] cache with edge and heatmap tensors for every image that has a
/// keypoint record. Entries newer than their image are skipped; malformed
/// keypoint rows and missing images are listed in <cache>/rejects.txt.
PrepareReport cmd_prepare(const RunConfig& config, const Invocation& inv);

struct TrainOptions {
  std::filesystem::path out_dir;
  std::optional<std::filesystem::path> resume;
  std::optional<std::filesystem::path> pct_checkpoint;
  int stop_after_epochs = -1;
};

struct TrainReport {
  RunSummary summary;
  std::filesystem::path manifest;
};

TrainReport cmd_train(const RunConfig& config, const TrainOptions& options, const Invocation& inv);

struct InferOptions {
  std::optional<std::filesystem::path> pct_checkpoint;
  std::filesystem::path is_checkpoint;
  std::filesystem::path out_dir;
  std::size_t limit = 0;  // 0 = every pair
};

struct InferReport {
  std::size_t pairs = 0;
  std::filesystem::path images_dir;   // <pair_id>.png, generated person images
  std::filesystem::path edges_dir;    // <pair_id>.png, content edge maps fed to the image generator
  std::filesystem::path targets_dir;  // <pair_id>.png, ground-truth targets at the working resolution
  std::filesystem::path index_csv;
  std::filesystem::path manifest;
};

/// Runs the edge generator then the image generator on the configured pairs.
InferReport cmd_infer(const RunConfig& config, const InferOptions& options, const Invocation& inv);

struct EvalOptions {
  std::filesystem::path generated_dir;
  std::filesystem::path truth_dir;
  std::vector<std::string> metrics{"ssim", "l1", "fid", "is", "lpips"};
  std::filesystem::path out_dir;
  bool toy_fid = false;  // FID on ToyStatsEmbedder features instead of skipping
};

struct EvalResult {
  EvalReport report;
  std::filesystem::path csv;
  std::filesystem::path manifest;
};

EvalResult cmd_eval(const EvalOptions& options, const Invocation& inv);

struct SynthOptions {
  std::filesystem::path out_dir;
  int people = 4;
  int poses = 2;
  int height = 64;
  int width = 48;
  std::uint64_t seed = 0;
};

/// Writes a synthetic dataset and a matching config.ini; returns the config path.
std::filesystem::path cmd_synth(const SynthOptions& options, const Invocation& inv);

std::vector<std::string> split_list(const std::string& csv);

}  // namespace scagan::app
