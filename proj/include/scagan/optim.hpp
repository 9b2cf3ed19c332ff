#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "scagan/archive.hpp"
#include "scagan/params.hpp"

namespace scagan {

struct AdamConfig {
  double beta1 = 0.5;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Adam over the parameters of one or more ModelParams stores, bias-corrected.
class Adam {
 public:
  Adam(std::vector<ModelParams*> params, AdamConfig config = {});

  /// Applies one update with the gradients currently held by the parameters.
  /// Parameters without a gradient, and their moments, are left untouched.
  void step(double lr);
  void zero_grad();

  const AdamConfig& config() const noexcept { return config_; }
  std::uint64_t steps() const noexcept { return t_; }

  void write_to(Archive& ar, const std::string& prefix) const;
  void read_from(const Archive& ar, const std::string& prefix);

 private:
  std::vector<ModelParams*> params_;
  AdamConfig config_;
  std::uint64_t t_ = 0;
  std::vector<Tensor> m_, v_;
};

}  // namespace scagan
