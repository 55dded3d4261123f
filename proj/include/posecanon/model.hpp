#pragma once

#include "posecanon/ad.hpp"
#include "posecanon/geocanon.hpp"
#include "posecanon/geom3d.hpp"
#include "posecanon/skeleton.hpp"

#include "json.hpp"

#include <algorithm>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace posecanon {

struct ModelConfig {
  int hiddenDim = 256;
  int fusedDim = 384;
  int gcnLayers = 3;
  int transformerLayers = 2;
  int attentionHeads = 8;
  bool residualHeadEnabled = true;

  /// Full-size network: hidden 256, fused 384, 3 GCN / 2 transformer layers,
  /// 8 heads.
  static ModelConfig standard() {
    return {};
  }
  /// Desk-scale preset: hidden 32, fused 48, 1 / 1 layers, 2 heads.
  static ModelConfig toy() {
    return {32, 48, 1, 1, 2, true};
  }

  /// Throws InvalidConfig on non-positive sizes or head counts that do not
  /// divide hidden_dim and fused_dim.
  void validate() const;

  [[nodiscard]] int mlpDim() const {
    return 2 * hiddenDim;
  }
  [[nodiscard]] int gateHiddenDim() const {
    return std::max(1, hiddenDim / 2);
  }

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

void to_json(nlohmann::json& j, const ModelConfig& c);
void from_json(const nlohmann::json& j, ModelConfig& c);

/// Decides weight decay eligibility: only Weight tensors are decayed.
enum class ParamKind { Weight, Bias, Gain, PositionalEncoding, GraphTopology, GateLogit };

struct Parameter {
  std::string name;
  ParamKind kind = ParamKind::Weight;
  ad::Matrix value;
};

/// Every learnable tensor of the network, in a fixed registration order.
class ModelParams {
 public:
  ModelParams() = default;

  /// Fan-in scaled uniform weights, zero biases, unit gains, A_learned =
  /// A0 + symmetric noise of amplitude 1e-3, alpha = 0.
  static ModelParams initialize(const ModelConfig& config, std::uint64_t seed);

  [[nodiscard]] const ModelConfig& config() const {
    return config_;
  }
  [[nodiscard]] std::vector<Parameter>& list() {
    return params_;
  }
  [[nodiscard]] const std::vector<Parameter>& list() const {
    return params_;
  }
  [[nodiscard]] const ad::Matrix& get(const std::string& name) const;
  [[nodiscard]] ad::Matrix& get(const std::string& name);
  [[nodiscard]] bool has(const std::string& name) const {
    return index_.count(name) > 0;
  }
  [[nodiscard]] size_t scalarCount() const;

  /// Re-symmetrises A_learned and clamps it to be nonnegative. Called after
  /// every optimizer update.
  void projectConstraints();

  /// Millimetres per network unit; poses are divided by this before the
  /// network and residuals multiplied by it afterwards.
  double inputScale = 1.0;

  /// Registers a tensor. Used by initialize() and checkpoint loading.
  void add(std::string name, ParamKind kind, ad::Matrix value);
  void setConfig(const ModelConfig& c) {
    config_ = c;
  }

 private:
  ModelConfig config_;
  std::vector<Parameter> params_;
  std::map<std::string, size_t> index_;
};

/// Fixed anatomical bone graph (symmetric 0/1, no self loops).
ad::Matrix anatomicalAdjacency(const JointLayout& layout = JointLayout::human36m());

namespace model {

/// Tape handles for every parameter, keyed by name.
class BoundParams {
 public:
  BoundParams(ad::Tape& tape, const ModelParams& params, bool requireGrad);
  /// Binds existing nodes, one per parameter in registration order (used by
  /// gradient checks, which own the leaves).
  BoundParams(ad::Tape& tape, const ModelParams& params, std::span<const ad::Var> vars);

  [[nodiscard]] const ad::Var& operator[](const std::string& name) const;
  [[nodiscard]] const std::vector<ad::Var>& vars() const {
    return vars_;
  }
  [[nodiscard]] const ModelConfig& config() const {
    return *config_;
  }
  [[nodiscard]] ad::Tape& tape() const {
    return *tape_;
  }
  [[nodiscard]] const ad::Var& anatomical() const {
    return a0_;
  }

 private:
  ad::Tape* tape_;
  const ModelConfig* config_;
  std::vector<ad::Var> vars_;
  std::map<std::string, size_t> index_;
  ad::Var a0_;
};

struct BranchOutput {
  ad::Var features; // 17 x hidden
  ad::Var pooled;   // 1 x hidden
};

struct AttentionOutput {
  ad::Var output;              // 17 x model dim (after output projection)
  std::vector<ad::Var> maps;   // per head, 17 x 17, rows sum to 1
};

struct FusionOutput {
  ad::Var z;          // 1 x fused
  ad::Var zFused;     // pooled cross-attention, 1 x fused
  ad::Var gate;       // 1 x 2: [w_gcn, w_trans]
  ad::Var zGcnProj;   // 1 x fused
  ad::Var zTransProj; // 1 x fused
};

struct ForwardOutput {
  ad::Var rot6;  // 1 x 6 (a, b)
  ad::Var delta; // 17 x 3 in network units
  ad::Var adjacency;
  BranchOutput gcn;
  BranchOutput transformer;
  FusionOutput fusion;
  std::vector<ad::Var> selfAttentionMaps; // transformerLayers * heads
};

/// A = sigmoid(alpha) A0 + (1 - sigmoid(alpha)) sym(A_learned), then
/// D^-1/2 (A + I) D^-1/2.
ad::Var adaptiveAdjacency(const BoundParams& p);

/// Input projection then gcnLayers rounds of relu(Â H W + b); mean pooled.
BranchOutput gcnBranch(const BoundParams& p, const ad::Var& pose, const ad::Var& adjacency);

/// Embedding + positional encodings, pre-norm self-attention / gelu MLP blocks
/// with residual connections; mean pooled.
BranchOutput transformerBranch(const BoundParams& p, const ad::Var& pose, std::vector<ad::Var>* attentionMaps = nullptr);

/// Multi-head attention of `queries` over `keysValues` using parameters under
/// `prefix` (Wq, bq, Wk, bk, Wv, bv, Wo, bo).
AttentionOutput multiHeadAttention(
    const BoundParams& p, const std::string& prefix, const ad::Var& queries, const ad::Var& keysValues, int heads);

/// GCN features query transformer features; gated sum of pooled features.
FusionOutput fuse(const BoundParams& p, const BranchOutput& gcn, const BranchOutput& transformer);

/// Full forward pass on a pose already divided by the input scale.
ForwardOutput forward(const BoundParams& p, const ad::Var& scaledPose);

/// Differentiable Gram-Schmidt: returns R^T (rows are the columns of R).
ad::Var rotationTransposeFrom6d(const ad::Var& rot6);

} // namespace model

struct Prediction {
  Rot6D rot6;
  Pose delta; // millimetres; zero when the residual head is disabled
};

struct NetworkCanonResult {
  Pose pose;
  RotationMatrix rotation;
  Pose delta;
};

/// Network prediction for a pelvis-centred pose in millimetres.
Prediction predict(const Pose& pose, const ModelParams& params);

/// R = rot_from_6d(prediction); canonical = R^T X + delta.
NetworkCanonResult canonicalizeWithModel(const Pose& pose, const ModelParams& params);

/// Plain evaluation of the normalised adaptive adjacency.
ad::Matrix evaluateAdjacency(const ModelParams& params);

} // namespace posecanon
