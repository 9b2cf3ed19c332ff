#pragma once

// Phase-2 generator: a normalization-free style encoder and a coarse-to-fine
// decoder of Content-Style DeBlks built from CS-SPADE layers.

#include <cstdint>
#include <string>
#include <vector>

#include "scagan/params.hpp"

namespace scagan {

enum class EncoderNorm { None, Batch, Instance };
enum class DecoderKind { CsSpadeDeblk, SpadeResblk };
enum class ContentSource { PriorEdge, SourceEdge, None, Semantic };

std::string to_string(EncoderNorm v);
std::string to_string(DecoderKind v);
std::string to_string(ContentSource v);
EncoderNorm parse_encoder_norm(const std::string& s);
DecoderKind parse_decoder_kind(const std::string& s);
ContentSource parse_content_source(const std::string& s);

struct IsConfig {
  int levels = 4;  // Style EnBlks, and DeBlks in the mirrored decoder
  int base_channels = 16;
  int max_channels = 64;
  int modulation_channels = 16;  // hidden width of each gamma/beta predictor
  int image_channels = 3;
  int pose_channels = 18;
  int semantic_channels = 8;
  EncoderNorm encoder_norm = EncoderNorm::None;
  DecoderKind decoder = DecoderKind::CsSpadeDeblk;
  ContentSource content = ContentSource::PriorEdge;

  /// Six EnBlks with 64..512 channels.
  static IsConfig paper();
  static IsConfig desk() { return IsConfig{}; }

  void validate() const;  // throws ParamError
  int encoder_channels(int block) const;
  int decoder_in_channels(int block) const;
  int decoder_out_channels(int block) const;
  /// Channels of the U-branch conditioning input; 0 when the branch is removed.
  int content_channels() const;
  int downsample_factor() const { return 1 << levels; }
  std::uint64_t fingerprint() const;
  std::string describe() const;
};

/// Layer kinds in execution order ("conv", "lrelu", "add", "instance_norm", "batch_norm").
using LayerTrace = std::vector<std::string>;

ModelParams build_is(const IsConfig& config, std::uint64_t seed);

/// I_s^L. Each EnBlk: main path conv3x3/2 -> LReLU -> conv3x3 -> LReLU -> conv3x3 -> LReLU,
/// shortcut conv1x1/2, outputs summed. Input dims must be divisible by 2^L.
Var style_encode(const Var& source_image, const ModelParams& params, const IsConfig& config,
                 LayerTrace* trace = nullptr);

struct InstanceStats {
  Tensor mean;    // N x C
  Tensor stddev;  // N x C, sqrt(max(var, 0) + eps)
};
InstanceStats instance_stats(const Tensor& f, double eps);

inline constexpr double kInstanceNormEps = 1e-5;

/// Intermediate values of one cs_spade call.
struct CsSpadeTrace {
  Var normalized;  // IN(f)
  Var gamma, beta;
  Var modulated;  // gamma * IN(f) + beta
};

/// Conv(LReLU(gamma(S) * IN(f) + beta(S))); S is resampled (nearest) to f's spatial size.
Var cs_spade(const Var& f, const Var& condition, const ModelParams& params, const std::string& name,
             CsSpadeTrace* trace = nullptr);
/// Registers name.shared / name.gamma / name.beta / name.out.
void add_cs_spade(ParamInit& init, const std::string& name, int feature_channels, int condition_channels,
                  int hidden_channels, int out_channels);

struct DeblkOutput {
  Var w;    // style-demodulated input, shared by both branches
  Var u;    // content branch (undefined when removed)
  Var v;    // pose branch
  Var sum;  // u + v at the block's resolution
  Var out;  // sum upsampled x2
};

DeblkOutput content_style_deblk(const Var& prev, int block, const Var& style, const Var& content,
                                const Var& pose, const ModelParams& params, const IsConfig& config);

/// Unit Gaussian N x C x H x W from mt19937_64(seed).
Var sample_z0(int n, int channels, int height, int width, std::uint64_t seed);

/// I_g = G(I_s, content, P_t) in [-1,1]. `content` is E_g, E_s or a label map per
/// config.content, and may be undefined when the content branch is removed.
/// Dimensions not divisible by 2^L are reflect-padded and the output cropped back.
Var is_forward(const Var& source_image, const Var& content, const Var& target_pose, std::uint64_t z0_seed,
               const ModelParams& params, const IsConfig& config);

}  // namespace scagan
