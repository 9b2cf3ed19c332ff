#pragma once

// Generator and discriminator objectives.

#include <map>
#include <string>
#include <vector>

#include "scagan/autograd.hpp"
#include "scagan/features.hpp"

namespace scagan {

class LossError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr double kLogFloor = 1e-12;

struct LossWeights {
  double adv = 5.0;
  double l1 = 1.0;
  double per = 1.0;
  double cx = 0.1;

  void validate() const;
};

/// Per-sample discriminator score: spatial mean of a realness map -> N x 1.
Var disc_score(const Var& realness_map);

/// -(log Ds(real) + log(1 - Ds(fake)) + log Dc(real) + log(1 - Dc(fake))), batch-averaged.
Var adv_loss_discriminator(const Var& ds_real, const Var& ds_fake, const Var& dc_real, const Var& dc_fake);
/// Non-saturating -(log Ds(fake) + log Dc(fake)), batch-averaged.
Var adv_loss_generator(const Var& ds_fake, const Var& dc_fake);

/// Mean absolute difference over C, H, W and the batch.
Var l1_loss(const Var& generated, const Var& target);

inline const std::string kPerceptualLayer = "conv1_2";
inline const std::vector<std::string> kContextualLayers = {"relu3_2", "relu4_2"};

Var perceptual_loss(const Var& generated, const Var& target, const FeatureExtractor& extractor);

struct CxParams {
  double bandwidth = 0.5;
  double epsilon = 1e-5;
  int max_positions = 65 * 65;
};

/// CX matrix (rows: generated features i, cols: target features j) for feature
/// sets given as C x P matrices. Both are centred on the target's channel mean.
Var cx_similarity(const Var& generated, const Var& target, const CxParams& params = {});
/// -log(mean_j max_i CX_ij) for one N x C x H x W feature pair, batch-averaged.
Var contextual_layer_loss(const Var& generated, const Var& target, const CxParams& params = {});
/// Sum of contextual_layer_loss over relu3_2 and relu4_2.
Var contextual_loss(const Var& generated, const Var& target, const FeatureExtractor& extractor,
                    const CxParams& params = {});

struct LossTerms {
  Var adv, l1, per, cx;
};

struct WeightedLoss {
  Var total;
  std::map<std::string, double> breakdown;  // unweighted term values
};

/// Weighted sum; throws LossError naming the first non-finite term.
WeightedLoss full_loss(const LossTerms& terms, const LossWeights& weights);

}  // namespace scagan
