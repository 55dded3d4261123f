#pragma once

#include "posecanon/ad.hpp"
#include "posecanon/skeleton.hpp"

#include "json.hpp"

#include <span>

namespace posecanon {

struct LossWeights {
  double pose = 1.0;
  double rotation = 1.0;
  double cycle = 0.25;
  double perceptual = 0.15;
  double regularization = 0.01;
  // Sub-weights inside the regularization term.
  double regDelta = 1.0;
  double regTopology = 0.1;
  double regDiversity = 0.1;

  /// Throws InvalidConfig on negative or non-finite weights.
  void validate() const;

  friend bool operator==(const LossWeights&, const LossWeights&) = default;
};

void to_json(nlohmann::json& j, const LossWeights& w);
void from_json(const nlohmann::json& j, LossWeights& w);

struct LossValues {
  double pose = 0.0;
  double rotation = 0.0;
  double cycle = 0.0;
  double perceptual = 0.0;
  double regularization = 0.0;
  double total = 0.0;
};

/// Weighted sum in the fixed order pose, rotation, cycle, perceptual, reg.
double weightedTotal(const LossValues& v, const LossWeights& w);

namespace losses {

/// Mean over all coordinates of the squared difference.
ad::Var poseLoss(const ad::Var& predicted, const ad::Var& target);

/// Clamped arccos((tr(R Rgt^T) - 1) / 2).
ad::Var rotationLoss(const ad::Var& rotation, const ad::Var& rotationGt);

/// Mean over coordinates of |R Xc_hat - X|^2. `rotationT` is R^T, poses are
/// row-per-joint, so R Xc_hat corresponds to Xc_hat * R^T.
ad::Var cycleLoss(const ad::Var& rotationT, const ad::Var& canonicalPred, const ad::Var& input);

/// Mean squared bone-length difference plus mean squared joint-angle
/// difference. Throws DegenerateBone.
ad::Var perceptualLoss(const ad::Var& canonicalPred, const ad::Var& canonicalGt,
                       const JointLayout& layout = JointLayout::human36m());

/// Mean pairwise cosine similarity between flattened attention maps. Zero when
/// fewer than two maps are given.
ad::Var attentionDiversity(ad::Tape& tape, std::span<const ad::Var> maps);

/// regDelta * mean(delta^2) + regTopology * |A_learned - A0|_F^2
/// + regDiversity * diversity, where diversity averages over layers of
/// `headsPerLayer` maps each.
ad::Var regularizationLoss(
    const ad::Var& delta,
    const ad::Var& learnedAdjacency,
    const ad::Var& anatomicalAdjacency,
    std::span<const ad::Var> attentionMaps,
    int headsPerLayer,
    const LossWeights& weights);

struct LossTerms {
  ad::Var pose;
  ad::Var rotation;
  ad::Var cycle;
  ad::Var perceptual;
  ad::Var regularization;
  ad::Var total;

  [[nodiscard]] LossValues values() const;
};

ad::Var totalLoss(const LossTerms& terms, const LossWeights& weights);

} // namespace losses

} // namespace posecanon
