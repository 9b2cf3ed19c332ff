#include "scagan/losses.hpp"

#include <cmath>

#include "scagan/ops.hpp"

namespace scagan {
namespace {

void require_finite(const Var& v, const char* what) {
  if (!v.value().all_finite()) throw LossError(std::string(what) + ": non-finite input");
}

Var mean_log(const Var& score) { return ops::mean(ops::log_clamped(score, kLogFloor)); }
Var mean_log_one_minus(const Var& score) {
  return ops::mean(ops::log_clamped(ops::add_scalar(ops::mul_scalar(score, -1.0), 1.0), kLogFloor));
}

// N x C x H x W -> C x (H*W) for sample n.
Var positions(const Var& features, int n) {
  const Var s = ops::slice_batch(features, n);
  return ops::reshape(s, {features.dim(1), features.dim(2) * features.dim(3)});
}

Var cap_positions(const Var& f, int max_positions) {
  const int h = f.dim(2), w = f.dim(3);
  if (h * w <= max_positions) return f;
  const double scale = std::sqrt(static_cast<double>(max_positions) / (h * w));
  const int nh = std::max(1, static_cast<int>(h * scale)), nw = std::max(1, static_cast<int>(w * scale));
  return ops::resize_nearest(f, nh, nw);
}

}  // namespace

void LossWeights::validate() const {
  if (!(adv >= 0 && l1 >= 0 && per >= 0 && cx >= 0)) throw LossError("loss weights must be >= 0");
}

Var disc_score(const Var& realness_map) {
  require_rank(realness_map.value(), 4, "disc_score");
  const int n = realness_map.dim(0);
  const int m = realness_map.dim(1) * realness_map.dim(2) * realness_map.dim(3);
  return ops::reduce(ops::reshape(realness_map, {n, m}), 1, ops::Reduce::Mean);
}

Var adv_loss_discriminator(const Var& ds_real, const Var& ds_fake, const Var& dc_real, const Var& dc_fake) {
  for (const Var* v : {&ds_real, &ds_fake, &dc_real, &dc_fake}) require_finite(*v, "adv_loss_discriminator");
  Var total = ops::add(mean_log(disc_score(ds_real)), mean_log_one_minus(disc_score(ds_fake)));
  total = ops::add(total, mean_log(disc_score(dc_real)));
  total = ops::add(total, mean_log_one_minus(disc_score(dc_fake)));
  return ops::mul_scalar(total, -1.0);
}

Var adv_loss_generator(const Var& ds_fake, const Var& dc_fake) {
  require_finite(ds_fake, "adv_loss_generator");
  require_finite(dc_fake, "adv_loss_generator");
  return ops::mul_scalar(ops::add(mean_log(disc_score(ds_fake)), mean_log(disc_score(dc_fake))), -1.0);
}

Var l1_loss(const Var& generated, const Var& target) {
  require_same_shape(generated.value(), target.value(), "l1_loss");
  return ops::mean(ops::abs(ops::sub(generated, target)));
}

Var perceptual_loss(const Var& generated, const Var& target, const FeatureExtractor& extractor) {
  require_same_shape(generated.value(), target.value(), "perceptual_loss");
  if (!extractor.has_layer(kPerceptualLayer)) {
    throw LossError("perceptual_loss: extractor '" + extractor.provenance() + "' lacks " + kPerceptualLayer);
  }
  const Var g = extractor.extract(generated, {kPerceptualLayer}).at(kPerceptualLayer);
  Var t;
  {
    NoGradGuard guard;
    t = extractor.extract(target, {kPerceptualLayer}).at(kPerceptualLayer);
  }
  return l1_loss(g, t);
}

Var cx_similarity(const Var& generated, const Var& target, const CxParams& params) {
  require_rank(generated.value(), 2, "cx_similarity generated");
  require_rank(target.value(), 2, "cx_similarity target");
  if (generated.dim(1) == 0 || target.dim(1) == 0) throw LossError("cx_similarity: empty feature set");
  if (generated.dim(0) != target.dim(0)) throw ShapeError("cx_similarity: feature dimensionality differs");
  const Var mu = ops::reduce(target, 1, ops::Reduce::Mean);  // C x 1
  auto unit = [&](const Var& f) {
    const Var centred = ops::sub(f, ops::expand(mu, f.shape()));
    const Var norm = ops::sqrt(ops::add_scalar(ops::reduce(ops::mul(centred, centred), 0, ops::Reduce::Sum), 1e-12));
    return ops::div(centred, ops::expand(norm, f.shape()));
  };
  const Var cosine = ops::matmul(unit(generated), unit(target), true, false);  // Pg x Pt
  const Var d = ops::add_scalar(ops::mul_scalar(cosine, -1.0), 1.0);
  const Var row_min = ops::add_scalar(ops::reduce(d, 1, ops::Reduce::Min), params.epsilon);
  const Var relative = ops::div(d, ops::expand(row_min, d.shape()));
  const Var w = ops::exp(ops::mul_scalar(ops::add_scalar(ops::mul_scalar(relative, -1.0), 1.0), 1.0 / params.bandwidth));
  return ops::div(w, ops::expand(ops::reduce(w, 1, ops::Reduce::Sum), w.shape()));
}

Var contextual_layer_loss(const Var& generated, const Var& target, const CxParams& params) {
  require_rank(generated.value(), 4, "contextual loss features");
  require_same_shape(generated.value(), target.value(), "contextual loss features");
  require_finite(generated, "contextual_loss");
  require_finite(target, "contextual_loss");
  const Var g = cap_positions(generated, params.max_positions);
  const Var t = cap_positions(target, params.max_positions);
  Var total;
  for (int n = 0; n < g.dim(0); ++n) {
    const Var cx = cx_similarity(positions(g, n), positions(t, n), params);
    const Var best = ops::reduce(cx, 0, ops::Reduce::Max);  // 1 x Pt
    const Var term = ops::mul_scalar(ops::log_clamped(ops::mean(best), kLogFloor), -1.0);
    total = total.defined() ? ops::add(total, term) : term;
  }
  return ops::mul_scalar(total, 1.0 / g.dim(0));
}

Var contextual_loss(const Var& generated, const Var& target, const FeatureExtractor& extractor,
                    const CxParams& params) {
  require_same_shape(generated.value(), target.value(), "contextual_loss");
  for (const auto& l : kContextualLayers)
    if (!extractor.has_layer(l)) throw LossError("contextual_loss: extractor '" + extractor.provenance() + "' lacks " + l);
  const auto g = extractor.extract(generated, kContextualLayers);
  std::map<std::string, Var> t;
  {
    NoGradGuard guard;
    t = extractor.extract(target, kContextualLayers);
  }
  Var total;
  for (const auto& l : kContextualLayers) {
    const Var term = contextual_layer_loss(g.at(l), t.at(l), params);
    total = total.defined() ? ops::add(total, term) : term;
  }
  return total;
}

WeightedLoss full_loss(const LossTerms& terms, const LossWeights& weights) {
  weights.validate();
  WeightedLoss out;
  const std::pair<const char*, std::pair<const Var*, double>> parts[] = {
      {"adv", {&terms.adv, weights.adv}},
      {"l1", {&terms.l1, weights.l1}},
      {"per", {&terms.per, weights.per}},
      {"cx", {&terms.cx, weights.cx}},
  };
  for (const auto& [name, part] : parts) {
    const Var& v = *part.first;
    if (!v.defined()) throw LossError(std::string("full_loss: term '") + name + "' missing");
    const double value = v.item();
    if (!std::isfinite(value)) throw LossError(std::string("full_loss: term '") + name + "' is non-finite");
    out.breakdown[name] = value;
    const Var weighted = ops::mul_scalar(v, part.second);
    out.total = out.total.defined() ? ops::add(out.total, weighted) : weighted;
  }
  return out;
}

}  // namespace scagan
