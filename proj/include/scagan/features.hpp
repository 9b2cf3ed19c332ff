#pragma once

// Frozen feature extractors for the perceptual and contextual losses.

#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "scagan/params.hpp"

namespace scagan {

class FeatureError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class FeatureExtractor {
 public:
  virtual ~FeatureExtractor() = default;
  /// "vgg19", "random-pyramid" or "identity"; recorded in run manifests.
  virtual std::string provenance() const = 0;
  virtual bool has_layer(const std::string& name) const = 0;
  /// Features of an N x C x H x W batch in [-1,1]; single-channel inputs are
  /// replicated to three channels. Throws FeatureError for an unknown layer.
  virtual std::map<std::string, Var> extract(const Var& images,
                                             const std::vector<std::string>& layers) const = 0;
};

/// VGG-style stack of 3x3 convs and 2x2 max pools. Layer names follow VGG-19:
/// convS_K is the K-th conv of stage S before its ReLU, reluS_K after it.
class ConvPyramidExtractor final : public FeatureExtractor {
 public:
  /// Seeded He-initialized pyramid with `stage_convs[s]` convs at stage s.
  static ConvPyramidExtractor random(std::uint64_t seed, int base_channels = 8,
                                     std::vector<int> stage_convs = {2, 2, 2, 2});
  /// VGG-19 weights from an archive holding convS_K.weight / convS_K.bias
  /// tensors (stages 1-4 are enough). Inputs get ImageNet mean/std normalization.
  static ConvPyramidExtractor vgg19(const std::filesystem::path& weights);

  std::string provenance() const override { return provenance_; }
  bool has_layer(const std::string& name) const override;
  std::map<std::string, Var> extract(const Var& images, const std::vector<std::string>& layers) const override;
  const ModelParams& params() const noexcept { return params_; }

 private:
  ConvPyramidExtractor() = default;

  std::string provenance_;
  ModelParams params_;
  std::vector<int> stage_convs_;
  bool imagenet_normalize_ = false;
};

/// Returns its (replicated) input for every configured layer name.
class IdentityExtractor final : public FeatureExtractor {
 public:
  explicit IdentityExtractor(std::vector<std::string> layers = {"conv1_2"}) : layers_(std::move(layers)) {}
  std::string provenance() const override { return "identity"; }
  bool has_layer(const std::string& name) const override;
  std::map<std::string, Var> extract(const Var& images, const std::vector<std::string>& layers) const override;

 private:
  std::vector<std::string> layers_;
};

/// Edge maps in [0,1] shown to an image extractor: mapped to [-1,1].
Var edge_as_image(const Var& edges);

}  // namespace scagan
