#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "scagan/archive.hpp"
#include "scagan/autograd.hpp"

namespace scagan {

class ParamError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Named, ordered store of trainable arrays for one network, tagged with the
/// creation seed and a fingerprint of the architecture config that built it.
class ModelParams {
 public:
  ModelParams() = default;
  ModelParams(std::string kind, std::uint64_t fingerprint, std::uint64_t seed);

  Var& add(std::string name, Tensor init);
  const Var& at(std::string_view name) const;
  Var& at(std::string_view name);
  bool contains(std::string_view name) const noexcept;

  std::vector<std::pair<std::string, Var>>& entries() noexcept { return entries_; }
  const std::vector<std::pair<std::string, Var>>& entries() const noexcept { return entries_; }
  std::size_t scalar_count() const noexcept;

  const std::string& kind() const noexcept { return kind_; }
  std::uint64_t fingerprint() const noexcept { return fingerprint_; }
  std::uint64_t seed() const noexcept { return seed_; }

  void zero_grad();
  /// True when names, shapes and every value match bit for bit.
  bool identical_to(const ModelParams& other) const;
  ModelParams clone() const;

  void write_to(Archive& ar, const std::string& prefix) const;
  /// Reads a store written by write_to; fails if its fingerprint differs from `expected_fingerprint`.
  static ModelParams read_from(const Archive& ar, const std::string& prefix,
                               std::uint64_t expected_fingerprint);

 private:
  std::string kind_;
  std::uint64_t fingerprint_ = 0;
  std::uint64_t seed_ = 0;
  std::vector<std::pair<std::string, Var>> entries_;
};

/// Seeded initializer for convolution layers: weights ~ N(0, std), biases constant.
class ParamInit {
 public:
  ParamInit(ModelParams& params, std::uint64_t seed, double weight_std = 0.02)
      : params_(params), rng_(seed), std_(weight_std) {}

  void conv(const std::string& name, int in_channels, int out_channels, int kernel,
            double bias_init = 0.0);

 private:
  ModelParams& params_;
  std::mt19937_64 rng_;
  double std_;
};

/// Weight and bias of a convolution registered through ParamInit::conv.
struct ConvRef {
  const Var& weight;
  const Var& bias;
};
ConvRef conv_ref(const ModelParams& p, const std::string& name);
Var apply_conv(const ModelParams& p, const std::string& name, const Var& x, int stride = 1);

}  // namespace scagan
