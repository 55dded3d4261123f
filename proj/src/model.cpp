#include "posecanon/model.hpp"

#include "posecanon/error.hpp"

#include <cmath>
#include <random>

namespace posecanon {

using ad::Matrix;
using ad::Var;

void ModelConfig::validate() const {
  if (hiddenDim <= 0 || fusedDim <= 0 || gcnLayers < 0 || transformerLayers < 0 || attentionHeads <= 0) {
    throw Error(ErrorCode::InvalidConfig, "model dimensions must be positive");
  }
  if (fusedDim % attentionHeads != 0) {
    throw Error(ErrorCode::InvalidConfig, "fused_dim must be divisible by attention_heads");
  }
  if (hiddenDim % attentionHeads != 0) {
    throw Error(ErrorCode::InvalidConfig, "hidden_dim must be divisible by attention_heads");
  }
}

void to_json(nlohmann::json& j, const ModelConfig& c) {
  j = nlohmann::json{
      {"hidden_dim", c.hiddenDim},
      {"fused_dim", c.fusedDim},
      {"gcn_layers", c.gcnLayers},
      {"transformer_layers", c.transformerLayers},
      {"attention_heads", c.attentionHeads},
      {"residual_head_enabled", c.residualHeadEnabled}};
}

void from_json(const nlohmann::json& j, ModelConfig& c) {
  ModelConfig d;
  c.hiddenDim = j.value("hidden_dim", d.hiddenDim);
  c.fusedDim = j.value("fused_dim", d.fusedDim);
  c.gcnLayers = j.value("gcn_layers", d.gcnLayers);
  c.transformerLayers = j.value("transformer_layers", d.transformerLayers);
  c.attentionHeads = j.value("attention_heads", d.attentionHeads);
  c.residualHeadEnabled = j.value("residual_head_enabled", d.residualHeadEnabled);
}

Matrix anatomicalAdjacency(const JointLayout& layout) {
  Matrix a = Matrix::Zero(kNumJoints, kNumJoints);
  for (const auto& e : layout.edges()) {
    a(e.parent, e.child) = 1.0;
    a(e.child, e.parent) = 1.0;
  }
  return a;
}

void ModelParams::add(std::string name, ParamKind kind, Matrix value) {
  if (index_.count(name)) {
    throw Error(ErrorCode::InvalidConfig, "duplicate parameter " + name);
  }
  index_[name] = params_.size();
  params_.push_back({std::move(name), kind, std::move(value)});
}

const Matrix& ModelParams::get(const std::string& name) const {
  const auto it = index_.find(name);
  if (it == index_.end()) {
    throw Error(ErrorCode::InvalidConfig, "no parameter named " + name);
  }
  return params_[it->second].value;
}

Matrix& ModelParams::get(const std::string& name) {
  const auto it = index_.find(name);
  if (it == index_.end()) {
    throw Error(ErrorCode::InvalidConfig, "no parameter named " + name);
  }
  return params_[it->second].value;
}

size_t ModelParams::scalarCount() const {
  size_t n = 0;
  for (const auto& p : params_) {
    n += static_cast<size_t>(p.value.size());
  }
  return n;
}

void ModelParams::projectConstraints() {
  if (!has("graph.A_learned")) {
    return;
  }
  Matrix& a = get("graph.A_learned");
  // eval() breaks the aliasing between a and its transpose.
  a = (0.5 * (a + a.transpose())).eval().cwiseMax(0.0);
}

namespace {

class Initializer {
 public:
  explicit Initializer(std::uint64_t seed) : rng_(seed) {}

  Matrix uniform(Eigen::Index rows, Eigen::Index cols, double bound) {
    std::uniform_real_distribution<double> dist(-bound, bound);
    Matrix m(rows, cols);
    // Row-major fill so the stream layout is independent of storage order.
    for (Eigen::Index r = 0; r < rows; ++r) {
      for (Eigen::Index c = 0; c < cols; ++c) {
        m(r, c) = dist(rng_);
      }
    }
    return m;
  }

  // Variance 1/fanIn.
  Matrix fanIn(Eigen::Index rows, Eigen::Index cols, double gain = 1.0) {
    return uniform(rows, cols, gain * std::sqrt(3.0 / static_cast<double>(rows)));
  }

 private:
  std::mt19937_64 rng_;
};

void addLinear(ModelParams& p, Initializer& init, const std::string& prefix, int in, int out, double gain = 1.0) {
  p.add(prefix + ".W", ParamKind::Weight, init.fanIn(in, out, gain));
  p.add(prefix + ".b", ParamKind::Bias, Matrix::Zero(1, out));
}

void addAttention(ModelParams& p, Initializer& init, const std::string& prefix, int queryIn, int kvIn, int dim) {
  p.add(prefix + ".Wq", ParamKind::Weight, init.fanIn(queryIn, dim));
  p.add(prefix + ".bq", ParamKind::Bias, Matrix::Zero(1, dim));
  p.add(prefix + ".Wk", ParamKind::Weight, init.fanIn(kvIn, dim));
  p.add(prefix + ".bk", ParamKind::Bias, Matrix::Zero(1, dim));
  p.add(prefix + ".Wv", ParamKind::Weight, init.fanIn(kvIn, dim));
  p.add(prefix + ".bv", ParamKind::Bias, Matrix::Zero(1, dim));
  p.add(prefix + ".Wo", ParamKind::Weight, init.fanIn(dim, dim));
  p.add(prefix + ".bo", ParamKind::Bias, Matrix::Zero(1, dim));
}

constexpr double kTopologyNoise = 1e-3;
constexpr double kPositionalInit = 0.1;
constexpr double kResidualOutputGain = 0.1;

} // namespace

ModelParams ModelParams::initialize(const ModelConfig& config, std::uint64_t seed) {
  config.validate();
  ModelParams p;
  p.config_ = config;
  Initializer init(seed);
  const int h = config.hiddenDim;
  const int f = config.fusedDim;

  p.add("graph.alpha", ParamKind::GateLogit, Matrix::Zero(1, 1));
  Matrix noise = init.uniform(kNumJoints, kNumJoints, kTopologyNoise);
  Matrix learned = anatomicalAdjacency() + 0.5 * (noise + noise.transpose());
  p.add("graph.A_learned", ParamKind::GraphTopology, learned.cwiseMax(0.0));

  addLinear(p, init, "gcn.in", 3, h);
  for (int l = 0; l < config.gcnLayers; ++l) {
    addLinear(p, init, "gcn." + std::to_string(l), h, h);
  }

  addLinear(p, init, "trans.embed", 3, h);
  p.add("trans.pos", ParamKind::PositionalEncoding, init.uniform(kNumJoints, h, kPositionalInit));
  for (int l = 0; l < config.transformerLayers; ++l) {
    const std::string pre = "trans." + std::to_string(l);
    p.add(pre + ".ln1.g", ParamKind::Gain, Matrix::Ones(1, h));
    p.add(pre + ".ln1.b", ParamKind::Bias, Matrix::Zero(1, h));
    addAttention(p, init, pre + ".attn", h, h, h);
    p.add(pre + ".ln2.g", ParamKind::Gain, Matrix::Ones(1, h));
    p.add(pre + ".ln2.b", ParamKind::Bias, Matrix::Zero(1, h));
    addLinear(p, init, pre + ".mlp1", h, config.mlpDim());
    addLinear(p, init, pre + ".mlp2", config.mlpDim(), h);
  }

  addAttention(p, init, "fuse.cross", h, h, f);
  addLinear(p, init, "fuse.proj_gcn", h, f);
  addLinear(p, init, "fuse.proj_trans", h, f);
  addLinear(p, init, "gate.l1", 2 * h, config.gateHiddenDim());
  addLinear(p, init, "gate.l2", config.gateHiddenDim(), 2);

  addLinear(p, init, "rot.l1", f, h);
  addLinear(p, init, "rot.l2", h, 6);
  if (config.residualHeadEnabled) {
    addLinear(p, init, "res.l1", f, h);
    addLinear(p, init, "res.l2", h, 3 * kNumJoints, kResidualOutputGain);
  }
  return p;
}

namespace model {

BoundParams::BoundParams(ad::Tape& tape, const ModelParams& params, bool requireGrad)
    : tape_(&tape), config_(&params.config()) {
  vars_.reserve(params.list().size());
  for (const auto& prm : params.list()) {
    index_[prm.name] = vars_.size();
    vars_.push_back(requireGrad ? tape.leaf(prm.value) : tape.constant(prm.value));
  }
  a0_ = tape.constant(anatomicalAdjacency());
}

BoundParams::BoundParams(ad::Tape& tape, const ModelParams& params, std::span<const ad::Var> vars)
    : tape_(&tape), config_(&params.config()) {
  if (vars.size() != params.list().size()) {
    throw Error(ErrorCode::ShapeMismatch, "one node per parameter expected");
  }
  for (size_t k = 0; k < vars.size(); ++k) {
    const auto& prm = params.list()[k];
    if (vars[k].rows() != prm.value.rows() || vars[k].cols() != prm.value.cols()) {
      throw Error(ErrorCode::ShapeMismatch, "node shape differs from parameter " + prm.name);
    }
    index_[prm.name] = k;
    vars_.push_back(vars[k]);
  }
  a0_ = tape.constant(anatomicalAdjacency());
}

const Var& BoundParams::operator[](const std::string& name) const {
  const auto it = index_.find(name);
  if (it == index_.end()) {
    throw Error(ErrorCode::InvalidConfig, "no parameter named " + name);
  }
  return vars_[it->second];
}

namespace {

Var linear(const BoundParams& p, const std::string& prefix, const Var& x) {
  return ad::addRow(ad::matmul(x, p[prefix + ".W"]), p[prefix + ".b"]);
}

Var layerNorm(const BoundParams& p, const std::string& prefix, const Var& x) {
  return ad::addRow(ad::mulRow(ad::layerNormRows(x), p[prefix + ".g"]), p[prefix + ".b"]);
}

} // namespace

Var adaptiveAdjacency(const BoundParams& p) {
  ad::Tape& t = p.tape();
  const Var sig = ad::sigmoid(p["graph.alpha"]);
  const Var oneMinus = ad::addScalar(ad::scale(sig, -1.0), 1.0);
  const Var& learned = p["graph.A_learned"];
  const Var sym = ad::scale(ad::add(learned, ad::transpose(learned)), 0.5);
  const Var mixed = ad::add(ad::scaleBy(p.anatomical(), sig), ad::scaleBy(sym, oneMinus));
  const Var withSelf = ad::add(mixed, t.constant(Matrix::Identity(kNumJoints, kNumJoints)));
  const Var degree = ad::matmul(withSelf, t.constant(Matrix::Ones(kNumJoints, 1)));
  const Var invSqrt = ad::powElem(degree, -0.5);
  return ad::mul(withSelf, ad::matmul(invSqrt, ad::transpose(invSqrt)));
}

BranchOutput gcnBranch(const BoundParams& p, const Var& pose, const Var& adjacency) {
  Var h = linear(p, "gcn.in", pose);
  for (int l = 0; l < p.config().gcnLayers; ++l) {
    const std::string pre = "gcn." + std::to_string(l);
    h = ad::relu(ad::addRow(ad::matmul(adjacency, ad::matmul(h, p[pre + ".W"])), p[pre + ".b"]));
  }
  return {h, ad::meanRows(h)};
}

AttentionOutput multiHeadAttention(
    const BoundParams& p, const std::string& prefix, const Var& queries, const Var& keysValues, int heads) {
  const Var q = ad::addRow(ad::matmul(queries, p[prefix + ".Wq"]), p[prefix + ".bq"]);
  const Var k = ad::addRow(ad::matmul(keysValues, p[prefix + ".Wk"]), p[prefix + ".bk"]);
  const Var v = ad::addRow(ad::matmul(keysValues, p[prefix + ".Wv"]), p[prefix + ".bv"]);
  const Eigen::Index dim = q.cols();
  const Eigen::Index headDim = dim / heads;
  const double invSqrt = 1.0 / std::sqrt(static_cast<double>(headDim));

  AttentionOutput out;
  std::vector<Var> headOutputs;
  for (int hIdx = 0; hIdx < heads; ++hIdx) {
    const Var qh = ad::sliceCols(q, hIdx * headDim, headDim);
    const Var kh = ad::sliceCols(k, hIdx * headDim, headDim);
    const Var vh = ad::sliceCols(v, hIdx * headDim, headDim);
    const Var attn = ad::softmaxRows(ad::scale(ad::matmul(qh, ad::transpose(kh)), invSqrt));
    out.maps.push_back(attn);
    headOutputs.push_back(ad::matmul(attn, vh));
  }
  const Var merged = heads == 1 ? headOutputs[0] : ad::concatCols(headOutputs);
  out.output = ad::addRow(ad::matmul(merged, p[prefix + ".Wo"]), p[prefix + ".bo"]);
  return out;
}

BranchOutput transformerBranch(const BoundParams& p, const Var& pose, std::vector<Var>* attentionMaps) {
  Var h = ad::add(linear(p, "trans.embed", pose), p["trans.pos"]);
  for (int l = 0; l < p.config().transformerLayers; ++l) {
    const std::string pre = "trans." + std::to_string(l);
    const Var normed = layerNorm(p, pre + ".ln1", h);
    AttentionOutput attn = multiHeadAttention(p, pre + ".attn", normed, normed, p.config().attentionHeads);
    if (attentionMaps != nullptr) {
      attentionMaps->insert(attentionMaps->end(), attn.maps.begin(), attn.maps.end());
    }
    h = ad::add(h, attn.output);
    const Var normed2 = layerNorm(p, pre + ".ln2", h);
    h = ad::add(h, linear(p, pre + ".mlp2", ad::gelu(linear(p, pre + ".mlp1", normed2))));
  }
  return {h, ad::meanRows(h)};
}

FusionOutput fuse(const BoundParams& p, const BranchOutput& gcn, const BranchOutput& transformer) {
  FusionOutput out;
  const AttentionOutput cross =
      multiHeadAttention(p, "fuse.cross", gcn.features, transformer.features, p.config().attentionHeads);
  out.zFused = ad::meanRows(cross.output);
  out.zGcnProj = linear(p, "fuse.proj_gcn", gcn.pooled);
  out.zTransProj = linear(p, "fuse.proj_trans", transformer.pooled);

  const Var gateIn = ad::concatCols({gcn.pooled, transformer.pooled});
  out.gate = ad::softmaxRows(linear(p, "gate.l2", ad::gelu(linear(p, "gate.l1", gateIn))));
  const Var wGcn = ad::sliceCols(out.gate, 0, 1);
  const Var wTrans = ad::sliceCols(out.gate, 1, 1);
  out.z = ad::add(out.zFused, ad::add(ad::scaleBy(out.zGcnProj, wGcn), ad::scaleBy(out.zTransProj, wTrans)));
  return out;
}

ForwardOutput forward(const BoundParams& p, const Var& scaledPose) {
  ForwardOutput out;
  out.adjacency = adaptiveAdjacency(p);
  out.gcn = gcnBranch(p, scaledPose, out.adjacency);
  out.transformer = transformerBranch(p, scaledPose, &out.selfAttentionMaps);
  out.fusion = fuse(p, out.gcn, out.transformer);
  out.rot6 = linear(p, "rot.l2", ad::gelu(linear(p, "rot.l1", out.fusion.z)));
  if (p.config().residualHeadEnabled) {
    const Var flat = linear(p, "res.l2", ad::gelu(linear(p, "res.l1", out.fusion.z)));
    out.delta = ad::reshape(flat, kNumJoints, 3);
  } else {
    out.delta = p.tape().constant(Matrix::Zero(kNumJoints, 3));
  }
  return out;
}

Var rotationTransposeFrom6d(const Var& rot6) {
  const Var a = ad::sliceCols(rot6, 0, 3);
  const Var b = ad::sliceCols(rot6, 3, 3);
  const Var na = ad::sqrt(ad::sqnorm(a));
  if (na.scalar() < kRot6dDegeneracy) {
    throw Error(ErrorCode::DegenerateInput, "first 6D generator has vanishing norm");
  }
  const Var c1 = ad::divBy(a, na);
  const Var bPerp = ad::sub(b, ad::scaleBy(c1, ad::dotRows(c1, b)));
  const Var nb = ad::sqrt(ad::sqnorm(bPerp));
  if (nb.scalar() < kRot6dDegeneracy) {
    throw Error(ErrorCode::DegenerateInput, "6D generators are parallel");
  }
  const Var c2 = ad::divBy(bPerp, nb);
  const Var c3 = ad::cross3(c1, c2);
  const std::vector<Var> rows{c1, c2, c3};
  return ad::concatRows(rows);
}

} // namespace model

Prediction predict(const Pose& pose, const ModelParams& params) {
  ad::Tape tape;
  const model::BoundParams bound(tape, params, false);
  const Var x = tape.constant(Matrix(pose.joints / params.inputScale));
  const model::ForwardOutput out = model::forward(bound, x);
  Prediction pred;
  const Matrix& r = out.rot6.value();
  pred.rot6 = Rot6D{Vec3(r(0, 0), r(0, 1), r(0, 2)), Vec3(r(0, 3), r(0, 4), r(0, 5))};
  pred.delta.joints = out.delta.value() * params.inputScale;
  return pred;
}

NetworkCanonResult canonicalizeWithModel(const Pose& pose, const ModelParams& params) {
  const Prediction pred = predict(pose, params);
  NetworkCanonResult out;
  out.rotation = rotFrom6d(pred.rot6);
  out.pose = applyRotation(out.rotation.transpose(), pose);
  out.pose.joints += pred.delta.joints;
  out.delta = pred.delta;
  return out;
}

Matrix evaluateAdjacency(const ModelParams& params) {
  ad::Tape tape;
  const model::BoundParams bound(tape, params, false);
  return model::adaptiveAdjacency(bound).value();
}

} // namespace posecanon
