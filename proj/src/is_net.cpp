#include "scagan/is_net.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "scagan/archive.hpp"
#include "scagan/ops.hpp"

namespace scagan {
namespace {

constexpr double kSlope = 0.2;

void note(LayerTrace* trace, const char* kind) {
  if (trace) trace->emplace_back(kind);
}

Var encoder_norm(const Var& x, EncoderNorm norm, LayerTrace* trace) {
  switch (norm) {
    case EncoderNorm::None:
      return x;
    case EncoderNorm::Batch:
      note(trace, "batch_norm");
      return ops::batch_norm(x, kInstanceNormEps);
    case EncoderNorm::Instance:
      note(trace, "instance_norm");
      return ops::instance_norm(x, kInstanceNormEps);
  }
  return x;
}

std::string dec(int block) { return "dec" + std::to_string(block); }

Var spade_resblk(const Var& x, int block, const Var& segmentation, const ModelParams& params) {
  const std::string n = dec(block);
  Var h = cs_spade(x, segmentation, params, n + ".s0");
  h = cs_spade(h, segmentation, params, n + ".s1");
  return ops::upsample2x(ops::add(h, apply_conv(params, n + ".skip", x)));
}

}  // namespace

std::string to_string(EncoderNorm v) {
  switch (v) {
    case EncoderNorm::None: return "none";
    case EncoderNorm::Batch: return "batch";
    case EncoderNorm::Instance: return "instance";
  }
  return "?";
}

std::string to_string(DecoderKind v) {
  return v == DecoderKind::CsSpadeDeblk ? "cs-spade-deblk" : "spade-resblk";
}

std::string to_string(ContentSource v) {
  switch (v) {
    case ContentSource::PriorEdge: return "prior-edge";
    case ContentSource::SourceEdge: return "source-edge";
    case ContentSource::None: return "none";
    case ContentSource::Semantic: return "semantic";
  }
  return "?";
}

EncoderNorm parse_encoder_norm(const std::string& s) {
  for (EncoderNorm v : {EncoderNorm::None, EncoderNorm::Batch, EncoderNorm::Instance})
    if (s == to_string(v)) return v;
  throw ParamError("unknown encoder norm '" + s + "' (none, batch, instance)");
}

DecoderKind parse_decoder_kind(const std::string& s) {
  for (DecoderKind v : {DecoderKind::CsSpadeDeblk, DecoderKind::SpadeResblk})
    if (s == to_string(v)) return v;
  throw ParamError("unknown decoder '" + s + "' (cs-spade-deblk, spade-resblk)");
}

ContentSource parse_content_source(const std::string& s) {
  for (ContentSource v : {ContentSource::PriorEdge, ContentSource::SourceEdge, ContentSource::None,
                          ContentSource::Semantic})
    if (s == to_string(v)) return v;
  throw ParamError("unknown content source '" + s + "' (prior-edge, source-edge, none, semantic)");
}

IsConfig IsConfig::paper() {
  IsConfig c;
  c.levels = 6;
  c.base_channels = 64;
  c.max_channels = 512;
  c.modulation_channels = 128;
  return c;
}

void IsConfig::validate() const {
  if (levels < 1 || levels > 8) throw ParamError("is config: levels must be in [1,8]");
  if (base_channels < 1 || max_channels < base_channels || modulation_channels < 1 || image_channels < 1 ||
      pose_channels < 1 || (content == ContentSource::Semantic && semantic_channels < 1)) {
    throw ParamError("is config: invalid channel counts (" + describe() + ")");
  }
}

int IsConfig::encoder_channels(int block) const { return std::min(base_channels << block, max_channels); }
int IsConfig::decoder_in_channels(int block) const { return encoder_channels(levels - 1 - block); }
int IsConfig::decoder_out_channels(int block) const { return encoder_channels(std::max(levels - 2 - block, 0)); }

int IsConfig::content_channels() const {
  switch (content) {
    case ContentSource::PriorEdge:
    case ContentSource::SourceEdge: return 1;
    case ContentSource::None: return 0;
    case ContentSource::Semantic: return semantic_channels;
  }
  return 0;
}

std::string IsConfig::describe() const {
  std::ostringstream os;
  os << "is L=" << levels << " base=" << base_channels << " max=" << max_channels << " mod=" << modulation_channels
     << " img=" << image_channels << " pose=" << pose_channels << " enc_norm=" << to_string(encoder_norm)
     << " decoder=" << to_string(decoder) << " content=" << to_string(content);
  if (content == ContentSource::Semantic) os << " k=" << semantic_channels;
  return os.str();
}

std::uint64_t IsConfig::fingerprint() const { return fnv1a64(describe()); }

void add_cs_spade(ParamInit& init, const std::string& name, int feature_channels, int condition_channels,
                  int hidden_channels, int out_channels) {
  init.conv(name + ".shared", condition_channels, hidden_channels, 3);
  init.conv(name + ".gamma", hidden_channels, feature_channels, 3, 1.0);
  init.conv(name + ".beta", hidden_channels, feature_channels, 3);
  init.conv(name + ".out", feature_channels, out_channels, 3);
}

ModelParams build_is(const IsConfig& config, std::uint64_t seed) {
  config.validate();
  ModelParams p("is", config.fingerprint(), seed);
  ParamInit init(p, seed);
  int cin = config.image_channels;
  for (int i = 0; i < config.levels; ++i) {
    const int c = config.encoder_channels(i);
    const std::string n = "enc" + std::to_string(i);
    init.conv(n + ".conv0", cin, c, 3);
    init.conv(n + ".conv1", c, c, 3);
    init.conv(n + ".conv2", c, c, 3);
    init.conv(n + ".skip", cin, c, 1);
    cin = c;
  }
  const int style_c = config.encoder_channels(config.levels - 1);
  const int hidden = config.modulation_channels;
  for (int b = 0; b < config.levels; ++b) {
    const int ci = config.decoder_in_channels(b), co = config.decoder_out_channels(b);
    if (config.decoder == DecoderKind::CsSpadeDeblk) {
      add_cs_spade(init, dec(b) + ".w", ci, style_c, hidden, ci);
      if (config.content_channels() > 0) add_cs_spade(init, dec(b) + ".u", ci, config.content_channels(), hidden, co);
      add_cs_spade(init, dec(b) + ".v", ci, config.pose_channels, hidden, co);
    } else {
      const int seg = config.content_channels() + config.pose_channels;
      add_cs_spade(init, dec(b) + ".s0", ci, seg, hidden, co);
      add_cs_spade(init, dec(b) + ".s1", co, seg, hidden, co);
      init.conv(dec(b) + ".skip", ci, co, 1);
    }
  }
  init.conv("final", config.decoder_out_channels(config.levels - 1), config.image_channels, 3);
  return p;
}

Var style_encode(const Var& source_image, const ModelParams& params, const IsConfig& config, LayerTrace* trace) {
  require_rank(source_image.value(), 4, "style_encode input");
  const int f = config.downsample_factor();
  if (source_image.dim(2) % f || source_image.dim(3) % f) {
    throw ShapeError("style_encode: " + std::to_string(source_image.dim(2)) + "x" +
                     std::to_string(source_image.dim(3)) + " is not divisible by 2^" + std::to_string(config.levels));
  }
  if (source_image.dim(1) != config.image_channels) {
    throw ShapeError("style_encode: expected " + std::to_string(config.image_channels) + " channels");
  }
  Var x = source_image;
  for (int i = 0; i < config.levels; ++i) {
    const std::string n = "enc" + std::to_string(i);
    Var m = x;
    for (int k = 0; k < 3; ++k) {
      note(trace, "conv");
      m = apply_conv(params, n + ".conv" + std::to_string(k), m, k == 0 ? 2 : 1);
      m = encoder_norm(m, config.encoder_norm, trace);
      note(trace, "lrelu");
      m = ops::leaky_relu(m, kSlope);
    }
    note(trace, "conv");
    const Var s = ops::conv2d(x, params.at(n + ".skip.weight"), params.at(n + ".skip.bias"), 2, 0);
    note(trace, "add");
    x = ops::add(m, s);
  }
  return x;
}

InstanceStats instance_stats(const Tensor& f, double eps) {
  require_rank(f, 4, "instance_stats");
  const int n = f.dim(0), c = f.dim(1);
  const std::size_t hw = static_cast<std::size_t>(f.dim(2)) * f.dim(3);
  if (hw == 0) throw ShapeError("instance_stats: empty spatial extent");
  InstanceStats s{Tensor({n, c}), Tensor({n, c})};
  for (int i = 0; i < n * c; ++i) {
    const double* p = f.ptr() + i * hw;
    double sum = 0.0, sq = 0.0;
    for (std::size_t k = 0; k < hw; ++k) {
      sum += p[k];
      sq += p[k] * p[k];
    }
    const double mean = sum / static_cast<double>(hw);
    const double var = std::max(sq / static_cast<double>(hw) - mean * mean, 0.0);
    s.mean[i] = mean;
    s.stddev[i] = std::sqrt(var + eps);
  }
  return s;
}

Var cs_spade(const Var& f, const Var& condition, const ModelParams& params, const std::string& name,
             CsSpadeTrace* trace) {
  require_rank(f.value(), 4, "cs_spade feature");
  require_rank(condition.value(), 4, "cs_spade condition");
  if (condition.dim(0) != f.dim(0)) throw ShapeError("cs_spade: batch mismatch between feature and condition");
  const Var s = (condition.dim(2) == f.dim(2) && condition.dim(3) == f.dim(3))
                    ? condition
                    : ops::resize_nearest(condition, f.dim(2), f.dim(3));
  const Var normalized = ops::instance_norm(f, kInstanceNormEps);
  const Var hidden = ops::relu(apply_conv(params, name + ".shared", s));
  const Var gamma = apply_conv(params, name + ".gamma", hidden);
  const Var beta = apply_conv(params, name + ".beta", hidden);
  if (gamma.dim(1) != f.dim(1) || beta.dim(1) != f.dim(1)) {
    throw ShapeError("cs_spade '" + name + "': modulation emits " + std::to_string(gamma.dim(1)) +
                     " channels for a " + std::to_string(f.dim(1)) + "-channel feature map");
  }
  const Var modulated = ops::add(ops::mul(gamma, normalized), beta);
  if (trace) *trace = CsSpadeTrace{normalized, gamma, beta, modulated};
  return apply_conv(params, name + ".out", ops::leaky_relu(modulated, kSlope));
}

DeblkOutput content_style_deblk(const Var& prev, int block, const Var& style, const Var& content, const Var& pose,
                                const ModelParams& params, const IsConfig& config) {
  if (block < 0 || block >= config.levels) throw ShapeError("content_style_deblk: block index out of range");
  if (config.decoder != DecoderKind::CsSpadeDeblk) throw ParamError("content_style_deblk: decoder is not CS-SPADE");
  DeblkOutput o;
  const std::string n = dec(block);
  o.w = cs_spade(prev, style, params, n + ".w");
  o.v = cs_spade(o.w, pose, params, n + ".v");
  if (config.content_channels() > 0) {
    if (!content.defined()) throw ShapeError("content_style_deblk: content input required for " + to_string(config.content));
    o.u = cs_spade(o.w, content, params, n + ".u");
    o.sum = ops::add(o.u, o.v);
  } else {
    o.sum = o.v;
  }
  o.out = ops::upsample2x(o.sum);
  return o;
}

Var sample_z0(int n, int channels, int height, int width, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Tensor t({n, channels, height, width});
  for (double& v : t.data()) v = normal(rng);
  return Var(std::move(t));
}

namespace {

Var is_forward_aligned(const Var& source_image, const Var& content, const Var& target_pose, std::uint64_t z0_seed,
                       const ModelParams& params, const IsConfig& config) {
  const Var style = style_encode(source_image, params, config);
  const bool use_content = config.content_channels() > 0;
  Var x;
  if (config.decoder == DecoderKind::CsSpadeDeblk) {
    x = sample_z0(style.dim(0), style.dim(1), style.dim(2), style.dim(3), z0_seed);
    for (int b = 0; b < config.levels; ++b) {
      x = content_style_deblk(x, b, style, content, target_pose, params, config).out;
    }
  } else {
    const Var seg = use_content ? ops::concat_channels({content, target_pose}) : target_pose;
    x = style;
    for (int b = 0; b < config.levels; ++b) x = spade_resblk(x, b, seg, params);
  }
  return ops::tanh(apply_conv(params, "final", ops::leaky_relu(x, kSlope)));
}

}  // namespace

Var is_forward(const Var& source_image, const Var& content, const Var& target_pose, std::uint64_t z0_seed,
               const ModelParams& params, const IsConfig& config) {
  if (params.fingerprint() != config.fingerprint()) {
    throw ParamError("is_forward: parameters were built for a different config than " + config.describe());
  }
  require_rank(source_image.value(), 4, "is_forward source image");
  require_rank(target_pose.value(), 4, "is_forward target pose");
  const int n = source_image.dim(0), h = source_image.dim(2), w = source_image.dim(3);
  auto check = [&](const Var& v, int channels, const char* what) {
    require_rank(v.value(), 4, what);
    if (v.dim(0) != n || v.dim(1) != channels || v.dim(2) != h || v.dim(3) != w) {
      throw ShapeError(std::string("is_forward: ") + what + " has shape " + shape_string(v.shape()) + ", expected [" +
                       std::to_string(n) + ", " + std::to_string(channels) + ", " + std::to_string(h) + ", " +
                       std::to_string(w) + "]");
    }
  };
  check(target_pose, config.pose_channels, "target pose");
  const bool use_content = config.content_channels() > 0;
  if (use_content) {
    if (!content.defined()) throw ShapeError("is_forward: content source " + to_string(config.content) + " missing");
    check(content, config.content_channels(), "content");
  }
  const int f = config.downsample_factor();
  const int ph = (h + f - 1) / f * f, pw = (w + f - 1) / f * f;
  if (ph == h && pw == w) return is_forward_aligned(source_image, content, target_pose, z0_seed, params, config);
  const int top = (ph - h) / 2, left = (pw - w) / 2;
  const int bottom = ph - h - top, right = pw - w - left;
  if (std::max(top, bottom) >= h || std::max(left, right) >= w) {
    throw ShapeError("is_forward: " + std::to_string(h) + "x" + std::to_string(w) + " is too small to pad to a multiple of " +
                     std::to_string(f) + "; reduce the number of levels");
  }
  auto pad = [&](const Var& v) { return ops::pad_reflect(v, top, bottom, left, right); };
  const Var out = is_forward_aligned(pad(source_image), use_content ? pad(content) : Var(), pad(target_pose),
                                     z0_seed, params, config);
  return ops::crop(out, top, left, h, w);
}

}  // namespace scagan
