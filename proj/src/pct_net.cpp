#include "scagan/pct_net.hpp"

#include <algorithm>
#include <sstream>

#include "scagan/archive.hpp"
#include "scagan/ops.hpp"

namespace scagan {
namespace {

constexpr double kNormEps = 1e-5;

Var conv_in_relu(const ModelParams& p, const std::string& name, const Var& x, int stride = 1) {
  return ops::relu(ops::instance_norm(apply_conv(p, name, x, stride), kNormEps));
}

}  // namespace

PctConfig PctConfig::paper() {
  PctConfig c;
  c.base_channels = 128;
  return c;
}

void PctConfig::validate() const {
  if (input_channels < 1 || base_channels < 1 || max_channels < base_channels) {
    throw ParamError("pct config: invalid channel counts (" + describe() + ")");
  }
  if (num_downsamples < 0 || num_downsamples > 6) throw ParamError("pct config: num_downsamples must be in [0,6]");
  if (num_residual_blocks < 0) throw ParamError("pct config: num_residual_blocks must be >= 0");
}

int PctConfig::channels_at(int level) const {
  return std::min(base_channels << level, max_channels);
}

std::string PctConfig::describe() const {
  std::ostringstream os;
  os << "pct in=" << input_channels << " base=" << base_channels << " max=" << max_channels
     << " down=" << num_downsamples << " res=" << num_residual_blocks;
  return os.str();
}

std::uint64_t PctConfig::fingerprint() const { return fnv1a64(describe()); }

ModelParams build_pct(const PctConfig& config, std::uint64_t seed) {
  config.validate();
  ModelParams p("pct", config.fingerprint(), seed);
  ParamInit init(p, seed);
  init.conv("in", config.input_channels, config.channels_at(0), 7);
  for (int i = 0; i < config.num_downsamples; ++i) {
    init.conv("down" + std::to_string(i), config.channels_at(i), config.channels_at(i + 1), 3);
  }
  const int c = config.bottleneck_channels();
  for (int i = 0; i < config.num_residual_blocks; ++i) {
    init.conv("res" + std::to_string(i) + ".a", c, c, 3);
    init.conv("res" + std::to_string(i) + ".b", c, c, 3);
  }
  for (int i = config.num_downsamples; i > 0; --i) {
    init.conv("up" + std::to_string(i - 1), config.channels_at(i), config.channels_at(i - 1), 3);
  }
  init.conv("out", config.channels_at(0), 1, 7);
  return p;
}

Var pct_forward(const Var& source_edge, const Var& source_pose, const Var& target_pose,
                const ModelParams& params, const PctConfig& config) {
  if (params.fingerprint() != config.fingerprint()) {
    throw ParamError("pct_forward: parameters were built for a different config than " + config.describe());
  }
  require_rank(source_edge.value(), 4, "pct_forward source edge");
  require_rank(source_pose.value(), 4, "pct_forward source pose");
  require_rank(target_pose.value(), 4, "pct_forward target pose");
  const int h = source_edge.dim(2), w = source_edge.dim(3);
  for (const Var* v : {&source_pose, &target_pose}) {
    if (v->dim(0) != source_edge.dim(0) || v->dim(2) != h || v->dim(3) != w) {
      throw ShapeError("pct_forward: spatial mismatch between " + shape_string(source_edge.shape()) +
                       " and " + shape_string(v->shape()));
    }
  }
  const int factor = 1 << config.num_downsamples;
  if (h % factor || w % factor) {
    throw ShapeError("pct_forward: " + std::to_string(h) + "x" + std::to_string(w) +
                     " is not divisible by " + std::to_string(factor));
  }
  Var x = ops::concat_channels({source_edge, source_pose, target_pose});
  if (x.dim(1) != config.input_channels) {
    throw ShapeError("pct_forward: expected " + std::to_string(config.input_channels) + " input channels, got " +
                     std::to_string(x.dim(1)));
  }
  x = conv_in_relu(params, "in", x);
  for (int i = 0; i < config.num_downsamples; ++i) x = conv_in_relu(params, "down" + std::to_string(i), x, 2);
  for (int i = 0; i < config.num_residual_blocks; ++i) {
    const std::string n = "res" + std::to_string(i);
    Var r = conv_in_relu(params, n + ".a", x);
    r = ops::instance_norm(apply_conv(params, n + ".b", r), kNormEps);
    x = ops::add(x, r);
  }
  for (int i = config.num_downsamples; i > 0; --i) {
    x = conv_in_relu(params, "up" + std::to_string(i - 1), ops::upsample2x(x));
  }
  x = ops::tanh(apply_conv(params, "out", x));
  return ops::mul_scalar(ops::add_scalar(x, 1.0), 0.5);
}

}  // namespace scagan
