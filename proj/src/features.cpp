#include "scagan/features.hpp"

#include <algorithm>
#include <cmath>

#include "scagan/archive.hpp"
#include "scagan/ops.hpp"

namespace scagan {
namespace {

Var as_rgb(const Var& images) {
  require_rank(images.value(), 4, "feature extractor input");
  const int c = images.dim(1);
  if (c == 3) return images;
  if (c == 1) return ops::concat_channels({images, images, images});
  throw FeatureError("feature extractor expects 1 or 3 channels, got " + std::to_string(c));
}

std::string conv_name(int stage, int k) { return "conv" + std::to_string(stage) + "_" + std::to_string(k); }

}  // namespace

ConvPyramidExtractor ConvPyramidExtractor::random(std::uint64_t seed, int base_channels,
                                                  std::vector<int> stage_convs) {
  ConvPyramidExtractor e;
  e.provenance_ = "random-pyramid";
  e.stage_convs_ = std::move(stage_convs);
  e.params_ = ModelParams("features", fnv1a64("random-pyramid:" + std::to_string(base_channels)), seed);
  std::mt19937_64 rng(seed);
  int cin = 3;
  for (std::size_t s = 0; s < e.stage_convs_.size(); ++s) {
    const int cout = base_channels << std::min<std::size_t>(s, 3);
    for (int k = 1; k <= e.stage_convs_[s]; ++k) {
      std::normal_distribution<double> normal(0.0, std::sqrt(2.0 / (cin * 9)));
      Tensor w({cout, cin, 3, 3});
      for (double& v : w.data()) v = normal(rng);
      const std::string name = conv_name(static_cast<int>(s) + 1, k);
      e.params_.add(name + ".weight", std::move(w));
      e.params_.add(name + ".bias", Tensor({cout}));
      cin = cout;
    }
  }
  for (auto& [name, v] : e.params_.entries()) v = Var(v.value(), false);
  return e;
}

ConvPyramidExtractor ConvPyramidExtractor::vgg19(const std::filesystem::path& weights) {
  const Archive ar = Archive::load(weights);
  ConvPyramidExtractor e;
  e.provenance_ = "vgg19";
  e.imagenet_normalize_ = true;
  e.stage_convs_ = {2, 2, 4, 4};
  e.params_ = ModelParams("features", fnv1a64("vgg19"), 0);
  for (std::size_t s = 0; s < e.stage_convs_.size(); ++s) {
    for (int k = 1; k <= e.stage_convs_[s]; ++k) {
      const std::string name = conv_name(static_cast<int>(s) + 1, k);
      const Tensor* w = ar.find(name + ".weight");
      const Tensor* b = ar.find(name + ".bias");
      if (!w || !b) throw FeatureError("vgg19 weights " + weights.string() + " lack " + name);
      if (w->rank() != 4 || w->dim(2) != 3 || w->dim(3) != 3 || b->size() != static_cast<std::size_t>(w->dim(0))) {
        throw FeatureError("vgg19 weights: bad shape for " + name);
      }
      e.params_.add(name + ".weight", *w);
      e.params_.add(name + ".bias", *b);
    }
  }
  return e;
}

bool ConvPyramidExtractor::has_layer(const std::string& name) const {
  for (std::size_t s = 0; s < stage_convs_.size(); ++s)
    for (int k = 1; k <= stage_convs_[s]; ++k) {
      const std::string c = conv_name(static_cast<int>(s) + 1, k);
      if (name == c || name == "relu" + c.substr(4)) return true;
    }
  return false;
}

std::map<std::string, Var> ConvPyramidExtractor::extract(const Var& images,
                                                         const std::vector<std::string>& layers) const {
  for (const auto& l : layers)
    if (!has_layer(l)) throw FeatureError("extractor '" + provenance_ + "' has no layer " + l);
  Var x = as_rgb(images);
  if (imagenet_normalize_) {
    // [-1,1] -> [0,1] -> ImageNet statistics.
    static const double mean[3] = {0.485, 0.456, 0.406}, stdev[3] = {0.229, 0.224, 0.225};
    Tensor scale({1, 3, 1, 1}), shift({1, 3, 1, 1});
    for (int c = 0; c < 3; ++c) {
      scale[c] = 0.5 / stdev[c];
      shift[c] = (0.5 - mean[c]) / stdev[c];
    }
    x = ops::add(ops::mul(x, ops::expand(Var(scale), x.shape())), ops::expand(Var(shift), x.shape()));
  }
  std::map<std::string, Var> out;
  for (std::size_t s = 0; s < stage_convs_.size() && out.size() < layers.size(); ++s) {
    if (s > 0) x = ops::max_pool2(x);
    for (int k = 1; k <= stage_convs_[s] && out.size() < layers.size(); ++k) {
      const std::string c = conv_name(static_cast<int>(s) + 1, k);
      x = apply_conv(params_, c, x);
      if (std::find(layers.begin(), layers.end(), c) != layers.end()) out[c] = x;
      x = ops::relu(x);
      const std::string r = "relu" + c.substr(4);
      if (std::find(layers.begin(), layers.end(), r) != layers.end()) out[r] = x;
    }
  }
  return out;
}

bool IdentityExtractor::has_layer(const std::string& name) const {
  return std::find(layers_.begin(), layers_.end(), name) != layers_.end();
}

std::map<std::string, Var> IdentityExtractor::extract(const Var& images,
                                                      const std::vector<std::string>& layers) const {
  std::map<std::string, Var> out;
  const Var x = as_rgb(images);
  for (const auto& l : layers) {
    if (!has_layer(l)) throw FeatureError("identity extractor has no layer " + l);
    out[l] = x;
  }
  return out;
}

Var edge_as_image(const Var& edges) { return ops::add_scalar(ops::mul_scalar(edges, 2.0), -1.0); }

}  // namespace scagan
