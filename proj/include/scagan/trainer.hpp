#pragma once

// Two-phase adversarial training: phase "pct" trains the edge generator,
// phase "is" trains the image generator against a frozen edge generator.

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "json.hpp"
#include "scagan/dataset.hpp"
#include "scagan/discriminator.hpp"
#include "scagan/features.hpp"
#include "scagan/is_net.hpp"
#include "scagan/losses.hpp"
#include "scagan/optim.hpp"
#include "scagan/pct_net.hpp"

namespace scagan {

class TrainError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Phase { Pct, Is };
std::string to_string(Phase p);
Phase parse_phase(const std::string& s);

struct TrainConfig {
  Phase phase = Phase::Pct;
  int epochs = 400;
  int decay_start_epoch = 200;
  double lr = 1e-4;
  AdamConfig adam;
  int batch_size = 1;
  bool shuffle = true;
  std::uint64_t seed = 0;
  int checkpoint_every = 1;  // epochs
  LossWeights weights;

  void validate() const;  // throws TrainError
  nlohmann::json to_json() const;
};

/// Constant lr for epoch < decay_start, then linear to 0 at epoch == epochs.
double lr_at_epoch(int epoch, const TrainConfig& config);

struct ModelConfig {
  PctConfig pct;
  IsConfig is;
  int disc_base_channels = 16;

  static ModelConfig desk() { return ModelConfig{}; }
  static ModelConfig paper();
  nlohmann::json to_json() const;
};

/// A generator with its two discriminators and their optimizers. Pinned in
/// memory because the optimizers point at the parameter stores.
struct GanState {
  ModelParams generator, ds, dc;
  DiscConfig ds_config, dc_config;
  Adam g_opt, d_opt;

  GanState(ModelParams g, ModelParams s, ModelParams c, DiscConfig sc, DiscConfig cc, AdamConfig adam);
  GanState(const GanState&) = delete;
  GanState& operator=(const GanState&) = delete;
};

/// Fresh phase-"pct" models (edge-domain discriminators) from `seed`.
std::unique_ptr<GanState> build_phase1(const ModelConfig& models, const AdamConfig& adam, std::uint64_t seed);
/// Fresh phase-"is" models from `seed`.
std::unique_ptr<GanState> build_phase2(const ModelConfig& models, const AdamConfig& adam, std::uint64_t seed);

struct StepRecord {
  std::map<std::string, double> terms;  // g_adv, g_l1, g_per, g_cx, d_adv
  double g_total = 0.0;
  std::string content_source;

  static const std::vector<std::string>& term_names();
};

/// Conditions, target and generator output for one adversarial update.
struct AdversarialInputs {
  Var cond_s;  // D_s condition: source edge (phase pct) or source image (phase is)
  Var cond_c;  // D_c condition: target pose
  Var real;
  Var fake;           // generator output, still attached to the generator graph
  bool edge_domain = false;  // 1-channel [0,1] maps, shown to the extractor as [-1,1] images
};

/// Unweighted discriminator objective on the detached fake; updates ds and dc only.
double discriminator_update(GanState& state, const AdversarialInputs& in, double lr);
/// Weighted generator objective; updates the generator only.
WeightedLoss generator_update(GanState& state, const AdversarialInputs& in, const FeatureExtractor& extractor,
                              const LossWeights& weights, double lr);

/// One discriminator update on the detached fake, then one generator update.
StepRecord train_step_phase1(const Batch& batch, GanState& state, const PctConfig& pct,
                             const FeatureExtractor& extractor, const LossWeights& weights, double lr);

/// The frozen PCT-Net produces E_g online (no gradient); `z0_seed` seeds the decoder noise.
StepRecord train_step_phase2(const Batch& batch, const ModelParams& frozen_pct, GanState& state,
                             const ModelConfig& models, const FeatureExtractor& extractor,
                             const LossWeights& weights, double lr, std::uint64_t z0_seed);

/// Conditioning for the U branch of the image generator per the content-source switch.
Var content_input(const Batch& batch, const ModelParams* frozen_pct, const ModelConfig& models);

struct RunOptions {
  std::filesystem::path out_dir;
  std::optional<std::filesystem::path> resume;
  std::optional<std::filesystem::path> pct_checkpoint;  // required for phase "is" with prior edges
  int stop_after_epochs = -1;  // stop early (for tests/smoke runs); < 0 runs to config.epochs
};

struct RunSummary {
  int start_epoch = 0;
  int end_epoch = 0;
  std::uint64_t steps = 0;
  std::vector<std::filesystem::path> checkpoints;
  std::filesystem::path metrics_csv;
};

RunSummary run_training(const TrainConfig& config, const ModelConfig& models, const Dataset& dataset,
                        const FeatureExtractor& extractor, const RunOptions& options);

/// Loads the generator stored in a training checkpoint of the given phase.
ModelParams load_generator(const std::filesystem::path& checkpoint, Phase phase, const ModelConfig& models);

std::string checkpoint_name(Phase phase, int epoch);

}  // namespace scagan
