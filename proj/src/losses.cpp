#include "posecanon/losses.hpp"

#include "posecanon/error.hpp"
#include "posecanon/geom3d.hpp"

#include <cmath>

namespace posecanon {

using ad::Matrix;
using ad::Var;

void LossWeights::validate() const {
  for (double w : {pose, rotation, cycle, perceptual, regularization, regDelta, regTopology, regDiversity}) {
    if (!std::isfinite(w) || w < 0.0) {
      throw Error(ErrorCode::InvalidConfig, "loss weights must be finite and nonnegative");
    }
  }
}

void to_json(nlohmann::json& j, const LossWeights& w) {
  j = nlohmann::json{
      {"pose", w.pose},
      {"rotation", w.rotation},
      {"cycle", w.cycle},
      {"perceptual", w.perceptual},
      {"regularization", w.regularization},
      {"reg_delta", w.regDelta},
      {"reg_topology", w.regTopology},
      {"reg_diversity", w.regDiversity}};
}

void from_json(const nlohmann::json& j, LossWeights& w) {
  const LossWeights d;
  w.pose = j.value("pose", d.pose);
  w.rotation = j.value("rotation", d.rotation);
  w.cycle = j.value("cycle", d.cycle);
  w.perceptual = j.value("perceptual", d.perceptual);
  w.regularization = j.value("regularization", d.regularization);
  w.regDelta = j.value("reg_delta", d.regDelta);
  w.regTopology = j.value("reg_topology", d.regTopology);
  w.regDiversity = j.value("reg_diversity", d.regDiversity);
}

double weightedTotal(const LossValues& v, const LossWeights& w) {
  return w.pose * v.pose + w.rotation * v.rotation + w.cycle * v.cycle + w.perceptual * v.perceptual +
      w.regularization * v.regularization;
}

namespace losses {

namespace {

// Rows select parent - joint (or child - parent) differences from a pose.
Matrix differenceOperator(const std::vector<std::pair<int, int>>& pairs) {
  Matrix d = Matrix::Zero(static_cast<Eigen::Index>(pairs.size()), kNumJoints);
  for (size_t r = 0; r < pairs.size(); ++r) {
    d(static_cast<Eigen::Index>(r), pairs[r].first) += 1.0;
    d(static_cast<Eigen::Index>(r), pairs[r].second) -= 1.0;
  }
  return d;
}

struct Geometry {
  Var lengths; // bones x 1
  Var angles;  // triples x 1
};

Geometry skeletonGeometry(ad::Tape& tape, const Var& pose, const JointLayout& layout) {
  std::vector<std::pair<int, int>> bones;
  for (const auto& e : layout.edges()) {
    bones.emplace_back(e.child, e.parent);
  }
  std::vector<std::pair<int, int>> toParent;
  std::vector<std::pair<int, int>> toChild;
  for (const auto& t : layout.angleTriples()) {
    toParent.emplace_back(t.parent, t.joint);
    toChild.emplace_back(t.child, t.joint);
  }
  const Var boneVec = ad::matmul(tape.constant(differenceOperator(bones)), pose);
  const Var u = ad::matmul(tape.constant(differenceOperator(toParent)), pose);
  const Var v = ad::matmul(tape.constant(differenceOperator(toChild)), pose);

  const Var uu = ad::dotRows(u, u);
  const Var vv = ad::dotRows(v, v);
  const Var bb = ad::dotRows(boneVec, boneVec);
  constexpr double kMinSq = 1e-12; // matches the 1e-6 bone threshold in skeleton
  if (bb.value().minCoeff() < kMinSq || uu.value().minCoeff() < kMinSq || vv.value().minCoeff() < kMinSq) {
    throw Error(ErrorCode::DegenerateBone, "bone shorter than 1e-6 in perceptual loss");
  }

  Geometry g;
  g.lengths = ad::sqrt(bb);
  const Var norms = ad::sqrt(ad::mul(uu, vv));
  const Var cosines = ad::mul(ad::dotRows(u, v), ad::powElem(norms, -1.0));
  g.angles = ad::arccosClamped(cosines, 0.0);
  return g;
}

} // namespace

Var poseLoss(const Var& predicted, const Var& target) {
  const Var d = ad::sub(predicted, target);
  return ad::mean(ad::mul(d, d));
}

Var rotationLoss(const Var& rotation, const Var& rotationGt) {
  const Var trace = ad::sum(ad::mul(rotation, rotationGt));
  return ad::arccosClamped(ad::scale(ad::addScalar(trace, -1.0), 0.5), kArccosClampEps);
}

Var cycleLoss(const Var& rotationT, const Var& canonicalPred, const Var& input) {
  const Var reconstructed = ad::matmul(canonicalPred, rotationT);
  const Var d = ad::sub(reconstructed, input);
  return ad::mean(ad::mul(d, d));
}

Var perceptualLoss(const Var& canonicalPred, const Var& canonicalGt, const JointLayout& layout) {
  ad::Tape& tape = *canonicalPred.tape();
  const Geometry pred = skeletonGeometry(tape, canonicalPred, layout);
  const Geometry gt = skeletonGeometry(tape, canonicalGt, layout);
  const Var dl = ad::sub(pred.lengths, gt.lengths);
  const Var da = ad::sub(pred.angles, gt.angles);
  return ad::add(ad::mean(ad::mul(dl, dl)), ad::mean(ad::mul(da, da)));
}

Var attentionDiversity(ad::Tape& tape, std::span<const Var> maps) {
  if (maps.size() < 2) {
    return tape.constant(Matrix::Zero(1, 1));
  }
  std::vector<Var> norms;
  norms.reserve(maps.size());
  for (const Var& m : maps) {
    norms.push_back(ad::sqrt(ad::sqnorm(m)));
  }
  Var acc;
  int pairs = 0;
  for (size_t i = 0; i < maps.size(); ++i) {
    for (size_t j = i + 1; j < maps.size(); ++j) {
      const Var cosine = ad::divBy(ad::sum(ad::mul(maps[i], maps[j])), ad::mul(norms[i], norms[j]));
      acc = acc.valid() ? ad::add(acc, cosine) : cosine;
      ++pairs;
    }
  }
  return ad::scale(acc, 1.0 / pairs);
}

Var regularizationLoss(
    const Var& delta,
    const Var& learnedAdjacency,
    const Var& anatomicalAdjacency,
    std::span<const Var> attentionMaps,
    int headsPerLayer,
    const LossWeights& weights) {
  ad::Tape& tape = *delta.tape();
  const Var deltaTerm = ad::mean(ad::mul(delta, delta));
  const Var topology = ad::sqnorm(ad::sub(learnedAdjacency, anatomicalAdjacency));

  Var diversity = tape.constant(Matrix::Zero(1, 1));
  if (headsPerLayer >= 2 && !attentionMaps.empty()) {
    const size_t layers = attentionMaps.size() / static_cast<size_t>(headsPerLayer);
    Var acc;
    for (size_t l = 0; l < layers; ++l) {
      const Var layerDiv = attentionDiversity(tape, attentionMaps.subspan(l * headsPerLayer, headsPerLayer));
      acc = acc.valid() ? ad::add(acc, layerDiv) : layerDiv;
    }
    if (acc.valid()) {
      diversity = ad::scale(acc, 1.0 / static_cast<double>(layers));
    }
  }
  return ad::add(
      ad::add(ad::scale(deltaTerm, weights.regDelta), ad::scale(topology, weights.regTopology)),
      ad::scale(diversity, weights.regDiversity));
}

Var totalLoss(const LossTerms& t, const LossWeights& w) {
  Var acc = ad::scale(t.pose, w.pose);
  acc = ad::add(acc, ad::scale(t.rotation, w.rotation));
  acc = ad::add(acc, ad::scale(t.cycle, w.cycle));
  acc = ad::add(acc, ad::scale(t.perceptual, w.perceptual));
  acc = ad::add(acc, ad::scale(t.regularization, w.regularization));
  return acc;
}

LossValues LossTerms::values() const {
  LossValues v;
  v.pose = pose.scalar();
  v.rotation = rotation.scalar();
  v.cycle = cycle.scalar();
  v.perceptual = perceptual.scalar();
  v.regularization = regularization.scalar();
  v.total = total.valid() ? total.scalar() : 0.0;
  return v;
}

} // namespace losses

} // namespace posecanon
