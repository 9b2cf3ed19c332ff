#pragma once

// Conditional patch discriminators D_s (conditioned on the source image) and
// D_c (conditioned on the target pose).

#include <cstdint>
#include <string>

#include "scagan/params.hpp"

namespace scagan {

struct DiscConfig {
  int condition_channels = 3;
  int image_channels = 3;
  int base_channels = 16;
  int num_downsamples = 2;
  int num_res_blocks = 3;

  /// D_s for images (3 + 3), D_c for images (18 + 3); edge-domain variants use 1 image channel.
  static DiscConfig style(int image_channels, int base_channels = 16);
  static DiscConfig pose(int image_channels, int base_channels = 16);

  void validate() const;
  int top_channels() const { return base_channels << (num_downsamples - 1); }
  std::uint64_t fingerprint() const;
  std::string describe() const;
};

ModelParams build_discriminator(const DiscConfig& config, std::uint64_t seed, const std::string& kind);

/// Realness map N x 1 x H/2^d x W/2^d in (0,1) for condition ++ image.
Var disc_forward(const Var& condition, const Var& image, const ModelParams& params, const DiscConfig& config);

}  // namespace scagan
