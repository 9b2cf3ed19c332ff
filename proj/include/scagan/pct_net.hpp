#pragma once

// Phase-1 generator: transfers the source edge map to the target pose.

#include <cstdint>
#include <string>

#include "scagan/params.hpp"

namespace scagan {

struct PctConfig {
  int input_channels = 1 + 18 + 18;  // content, source pose, target pose
  int base_channels = 16;
  int max_channels = 512;
  int num_downsamples = 2;
  int num_residual_blocks = 8;

  /// Full-size generator: 128 -> 256 -> 512 channels at the bottleneck.
  static PctConfig paper();
  static PctConfig desk() { return PctConfig{}; }

  void validate() const;  // throws ParamError
  int channels_at(int level) const;  // level 0 = full resolution
  int bottleneck_channels() const { return channels_at(num_downsamples); }
  std::uint64_t fingerprint() const;
  std::string describe() const;
};

ModelParams build_pct(const PctConfig& config, std::uint64_t seed);

/// E_g = F(E_s, P_s, P_t). Inputs are N x 1 x H x W and N x 18 x H x W; the
/// output is N x 1 x H x W in (0,1) via (tanh + 1) / 2.
Var pct_forward(const Var& source_edge, const Var& source_pose, const Var& target_pose,
                const ModelParams& params, const PctConfig& config);

}  // namespace scagan
