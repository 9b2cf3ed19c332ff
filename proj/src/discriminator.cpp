#include "scagan/discriminator.hpp"

#include <sstream>

#include "scagan/archive.hpp"
#include "scagan/ops.hpp"

namespace scagan {
namespace {
constexpr double kSlope = 0.2;
}

DiscConfig DiscConfig::style(int image_channels, int base_channels) {
  return DiscConfig{image_channels, image_channels, base_channels, 2, 3};
}

DiscConfig DiscConfig::pose(int image_channels, int base_channels) {
  return DiscConfig{18, image_channels, base_channels, 2, 3};
}

void DiscConfig::validate() const {
  if (condition_channels < 1 || image_channels < 1 || base_channels < 1 || num_downsamples < 1 ||
      num_res_blocks < 0) {
    throw ParamError("discriminator config invalid: " + describe());
  }
}

std::string DiscConfig::describe() const {
  std::ostringstream os;
  os << "disc cond=" << condition_channels << " img=" << image_channels << " base=" << base_channels
     << " down=" << num_downsamples << " res=" << num_res_blocks;
  return os.str();
}

std::uint64_t DiscConfig::fingerprint() const { return fnv1a64(describe()); }

ModelParams build_discriminator(const DiscConfig& config, std::uint64_t seed, const std::string& kind) {
  config.validate();
  ModelParams p(kind, config.fingerprint(), seed);
  ParamInit init(p, seed);
  int c = config.condition_channels + config.image_channels;
  for (int i = 0; i < config.num_downsamples; ++i) {
    const int out = config.base_channels << i;
    init.conv("down" + std::to_string(i), c, out, 3);
    c = out;
  }
  for (int i = 0; i < config.num_res_blocks; ++i) {
    init.conv("res" + std::to_string(i) + ".a", c, c, 3);
    init.conv("res" + std::to_string(i) + ".b", c, c, 3);
  }
  init.conv("out", c, 1, 3);
  return p;
}

Var disc_forward(const Var& condition, const Var& image, const ModelParams& params, const DiscConfig& config) {
  if (params.fingerprint() != config.fingerprint()) {
    throw ParamError("disc_forward: parameters do not match " + config.describe());
  }
  require_rank(condition.value(), 4, "discriminator condition");
  require_rank(image.value(), 4, "discriminator image");
  if (condition.dim(0) != image.dim(0) || condition.dim(2) != image.dim(2) || condition.dim(3) != image.dim(3)) {
    throw ShapeError("discriminator: condition " + shape_string(condition.shape()) + " and image " +
                     shape_string(image.shape()) + " differ in batch or spatial size");
  }
  if (condition.dim(1) != config.condition_channels || image.dim(1) != config.image_channels) {
    throw ShapeError("discriminator: expected " + std::to_string(config.condition_channels) + " + " +
                     std::to_string(config.image_channels) + " channels");
  }
  Var x = ops::concat_channels({condition, image});
  for (int i = 0; i < config.num_downsamples; ++i) {
    x = ops::leaky_relu(apply_conv(params, "down" + std::to_string(i), x, 2), kSlope);
  }
  for (int i = 0; i < config.num_res_blocks; ++i) {
    const std::string n = "res" + std::to_string(i);
    Var r = ops::leaky_relu(apply_conv(params, n + ".a", x), kSlope);
    x = ops::add(x, apply_conv(params, n + ".b", r));
  }
  return ops::sigmoid(apply_conv(params, "out", x));
}

}  // namespace scagan
