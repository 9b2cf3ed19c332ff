#pragma once

// INI run configuration with sections [data], [model], [train], [loss],
// [ablation] and [features]. Relative paths resolve against the file's directory.

#include <filesystem>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "scagan/dataset.hpp"
#include "scagan/features.hpp"
#include "scagan/trainer.hpp"

namespace scagan {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct DataPaths {
  std::filesystem::path pairs;      // `from,to` manifest
  std::filesystem::path images;     // image directory
  std::filesystem::path keypoints;  // keypoint CSV
};

struct FeaturesConfig {
  std::string extractor = "random";  // random | vgg19
  std::filesystem::path weights;     // vgg19 archive
  std::uint64_t seed = 1;
  int base_channels = 8;
};

struct RunConfig {
  DataPaths paths;
  DataConfig data;
  ModelConfig models;
  TrainConfig train;
  FeaturesConfig features;
  std::string ablation = "none";
  std::filesystem::path source;  // file the config was read from, if any

  nlohmann::json to_json() const;
};

/// Ablation names accepted by --ablation and [ablation] name.
const std::vector<std::string>& ablation_names();
/// Applies a named ablation to the model config. "none" restores the full model.
void apply_ablation(const std::string& name, ModelConfig& models);

RunConfig load_config(const std::filesystem::path& path);
RunConfig parse_config(const std::string& ini_text, const std::filesystem::path& base_dir = {});
/// INI text that parse_config reads back to the same configuration.
std::string format_config(const RunConfig& config);

std::unique_ptr<FeatureExtractor> make_extractor(const FeaturesConfig& config);

}  // namespace scagan
