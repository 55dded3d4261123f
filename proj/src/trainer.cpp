#include "posecanon/trainer.hpp"

#include "posecanon/error.hpp"
#include "posecanon/seeding.hpp"
#include "posecanon/text_format.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>
#include <sstream>
#include <thread>

namespace posecanon {

using ad::Matrix;
using ad::Var;

namespace {

constexpr std::string_view kCheckpointMagic = "posecanon-checkpoint";
constexpr std::uint64_t kShuffleSalt = 3;

const char* kindName(ParamKind k) {
  switch (k) {
    case ParamKind::Weight:
      return "weight";
    case ParamKind::Bias:
      return "bias";
    case ParamKind::Gain:
      return "gain";
    case ParamKind::PositionalEncoding:
      return "positional";
    case ParamKind::GraphTopology:
      return "topology";
    case ParamKind::GateLogit:
      return "gate_logit";
  }
  return "weight";
}

ParamKind kindFromName(const std::string& s) {
  for (ParamKind k : {ParamKind::Weight, ParamKind::Bias, ParamKind::Gain, ParamKind::PositionalEncoding,
                      ParamKind::GraphTopology, ParamKind::GateLogit}) {
    if (s == kindName(k)) {
      return k;
    }
  }
  throw Error(ErrorCode::ParseError, "unknown parameter kind '" + s + "'");
}

nlohmann::json matrixToJson(const Matrix& m) {
  std::vector<double> flat;
  flat.reserve(static_cast<size_t>(m.size()));
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      flat.push_back(m(r, c));
    }
  }
  return nlohmann::json{{"rows", m.rows()}, {"cols", m.cols()}, {"values", flat}};
}

Matrix matrixFromJson(const nlohmann::json& j) {
  const auto rows = j.at("rows").get<Eigen::Index>();
  const auto cols = j.at("cols").get<Eigen::Index>();
  const auto flat = j.at("values").get<std::vector<double>>();
  if (rows < 0 || cols < 0 || static_cast<size_t>(rows * cols) != flat.size()) {
    throw Error(ErrorCode::ParseError, "tensor shape does not match its value count");
  }
  Matrix m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) {
      m(r, c) = flat[static_cast<size_t>(r * cols + c)];
    }
  }
  return m;
}

std::uint64_t datasetHash(const std::vector<PosePairSample>& trainSet, const std::vector<PosePairSample>& valSet) {
  return splitmix64(samplesHash(trainSet)) ^ samplesHash(valSet);
}

struct Accumulated {
  LossValues loss;
  std::vector<Matrix> grads;
};

// Per-sample gradients on private tapes, summed in sample order so the result
// is identical for any thread count.
Accumulated batchGradients(const ModelParams& params, const std::vector<const PosePairSample*>& batch,
                           const LossWeights& weights, int threads, bool needGrads) {
  const size_t n = batch.size();
  std::vector<LossValues> values(n);
  std::vector<std::vector<Matrix>> grads(needGrads ? n : 0);
  std::vector<std::exception_ptr> errors(n);

  auto work = [&](size_t i) {
    try {
      ad::Tape tape;
      const model::BoundParams bound(tape, params, needGrads);
      losses::LossTerms terms = sampleLoss(bound, *batch[i], params.inputScale, weights);
      values[i] = terms.values();
      if (needGrads) {
        tape.backward(terms.total);
        auto& g = grads[i];
        g.reserve(bound.vars().size());
        for (const Var& v : bound.vars()) {
          g.push_back(v.grad());
        }
      }
    } catch (...) {
      errors[i] = std::current_exception();
    }
  };

  const size_t workers = std::max<size_t>(1, std::min<size_t>(static_cast<size_t>(threads), n));
  if (workers == 1) {
    for (size_t i = 0; i < n; ++i) {
      work(i);
    }
  } else {
    std::vector<std::thread> pool;
    for (size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        for (size_t i = w; i < n; i += workers) {
          work(i);
        }
      });
    }
    for (auto& t : pool) {
      t.join();
    }
  }
  for (const auto& e : errors) {
    if (e) {
      std::rethrow_exception(e);
    }
  }

  Accumulated acc;
  const double inv = 1.0 / static_cast<double>(n);
  for (size_t i = 0; i < n; ++i) {
    acc.loss.pose += values[i].pose;
    acc.loss.rotation += values[i].rotation;
    acc.loss.cycle += values[i].cycle;
    acc.loss.perceptual += values[i].perceptual;
    acc.loss.regularization += values[i].regularization;
    acc.loss.total += values[i].total;
  }
  acc.loss.pose *= inv;
  acc.loss.rotation *= inv;
  acc.loss.cycle *= inv;
  acc.loss.perceptual *= inv;
  acc.loss.regularization *= inv;
  acc.loss.total *= inv;
  if (needGrads) {
    acc.grads = std::move(grads[0]);
    for (size_t i = 1; i < n; ++i) {
      for (size_t k = 0; k < acc.grads.size(); ++k) {
        acc.grads[k] += grads[i][k];
      }
    }
    for (auto& g : acc.grads) {
      g *= inv;
    }
  }
  return acc;
}

int resolveThreads(int requested) {
  if (requested > 0) {
    return requested;
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(std::min(hw, 8U));
}

void writeTextFile(const std::filesystem::path& path, const std::string& content) {
  std::ofstream os(path, std::ios::binary);
  if (!os) {
    throw Error(ErrorCode::IoError, "cannot write " + path.string());
  }
  os << content;
}

struct RunState {
  TrainConfig config;
  ModelParams params;
  AdamState adam;
  int epoch = 0;
  std::uint64_t datasetHash = 0;
  double bestVal = std::numeric_limits<double>::infinity();
  int bestEpoch = -1;
  ModelParams best;
  std::vector<EpochRecord> log;
};

void writeLog(const std::filesystem::path& dir, const std::vector<EpochRecord>& log) {
  std::ostringstream os;
  for (const auto& r : log) {
    os << toJson(r).dump() << '\n';
  }
  writeTextFile(dir / "train_log.jsonl", os.str());
}

Checkpoint snapshot(const RunState& s, const ModelParams& params) {
  Checkpoint c;
  c.config = s.config;
  c.params = params;
  c.adam = s.adam;
  c.epoch = s.epoch;
  c.datasetHash = s.datasetHash;
  c.bestValRotationDeg = s.bestVal;
  c.bestEpoch = s.bestEpoch;
  c.log = s.log;
  return c;
}

EpochRecord evaluateEpoch(const RunState& s, const std::vector<PosePairSample>& valSet, EpochRecord rec) {
  rec.evaluated = !valSet.empty();
  if (rec.evaluated) {
    const CorpusReport report = evaluateCorpus(modelCanonicalizer(s.params), valSet, "model");
    rec.valRotationErrorDeg = report.meanRotationErrorDeg;
    rec.valMedianRotationErrorDeg = report.medianRotationErrorDeg;
    rec.valMpjpe = report.meanMpjpe;
    rec.valPaMpjpe = report.meanPaMpjpe;
  }
  return rec;
}

void recordEpoch(RunState& s, const EpochRecord& rec, const TrainRunOptions& opt) {
  s.log.push_back(rec);
  if (rec.evaluated && rec.valRotationErrorDeg < s.bestVal) {
    s.bestVal = rec.valRotationErrorDeg;
    s.bestEpoch = rec.epoch;
    s.best = s.params;
    if (!opt.outDir.empty()) {
      saveCheckpoint(opt.outDir / "best.ckpt.json", snapshot(s, s.params));
    }
  }
  if (!opt.outDir.empty()) {
    saveCheckpoint(opt.outDir / "last.ckpt.json", snapshot(s, s.params));
    writeLog(opt.outDir, s.log);
  }
  if (opt.onEpoch) {
    opt.onEpoch(rec);
  }
}

TrainResult runEpochs(RunState& s, const std::vector<PosePairSample>& trainSet,
                      const std::vector<PosePairSample>& valSet, const TrainRunOptions& opt) {
  const TrainConfig& cfg = s.config;
  const int threads = resolveThreads(opt.threads);
  const auto n = static_cast<long long>(trainSet.size());
  const long long batchesPerEpoch = (n + cfg.batchSize - 1) / cfg.batchSize;
  const long long totalSteps = batchesPerEpoch * cfg.epochs;
  const int lastEpoch = opt.stopAfterEpoch ? std::min(cfg.epochs, *opt.stopAfterEpoch) : cfg.epochs;

  while (s.epoch < lastEpoch) {
    const int e = s.epoch + 1;
    std::vector<size_t> order(trainSet.size());
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 rng(deriveSeed(cfg.seed, static_cast<std::uint64_t>(e), kShuffleSalt));
    std::shuffle(order.begin(), order.end(), rng);

    LossValues sum;
    double lr = 0.0;
    for (long long b = 0; b < batchesPerEpoch; ++b) {
      std::vector<const PosePairSample*> batch;
      const long long begin = b * cfg.batchSize;
      const long long end = std::min(n, begin + cfg.batchSize);
      for (long long i = begin; i < end; ++i) {
        batch.push_back(&trainSet[order[static_cast<size_t>(i)]]);
      }
      lr = lrAt(s.adam.step, totalSteps, cfg.baseLr);
      try {
        Accumulated acc = batchGradients(s.params, batch, cfg.weights, threads, true);
        optimizerStep(s.params, acc.grads, s.adam, lr, cfg.adam);
        const double w = static_cast<double>(batch.size());
        sum.pose += w * acc.loss.pose;
        sum.rotation += w * acc.loss.rotation;
        sum.cycle += w * acc.loss.cycle;
        sum.perceptual += w * acc.loss.perceptual;
        sum.regularization += w * acc.loss.regularization;
        sum.total += w * acc.loss.total;
      } catch (const Error& err) {
        if (err.code() == ErrorCode::NonFinite || err.code() == ErrorCode::DegenerateInput) {
          throw Error(ErrorCode::NonFinite, "training aborted at epoch " + std::to_string(e) + " step " +
                                                std::to_string(s.adam.step) + ": " + err.what());
        }
        throw;
      }
    }
    const double inv = 1.0 / static_cast<double>(n);
    EpochRecord rec;
    rec.epoch = e;
    rec.steps = s.adam.step;
    rec.lr = lr;
    rec.loss = {sum.pose * inv, sum.rotation * inv, sum.cycle * inv, sum.perceptual * inv, sum.regularization * inv,
                sum.total * inv};
    s.epoch = e;
    const bool evalNow = (e % cfg.evalEvery == 0) || e == cfg.epochs;
    recordEpoch(s, evalNow ? evaluateEpoch(s, valSet, rec) : rec, opt);
  }

  TrainResult out;
  out.last = s.params;
  out.best = s.bestEpoch >= 0 ? s.best : s.params;
  out.bestEpoch = s.bestEpoch;
  out.log = s.log;
  return out;
}

} // namespace

TrainConfig TrainConfig::fullScale() {
  TrainConfig c;
  c.epochs = 80;
  c.batchSize = 1024;
  c.model = ModelConfig::standard();
  return c;
}

TrainConfig TrainConfig::toy() {
  return TrainConfig{};
}

void TrainConfig::validate() const {
  if (epochs < 0 || batchSize < 1 || evalEvery < 1) {
    throw Error(ErrorCode::InvalidConfig, "epochs must be >= 0, batch size and eval interval >= 1");
  }
  if (!std::isfinite(baseLr) || baseLr <= 0.0) {
    throw Error(ErrorCode::InvalidConfig, "learning rate must be positive");
  }
  if (!(adam.beta1 >= 0.0 && adam.beta1 < 1.0 && adam.beta2 >= 0.0 && adam.beta2 < 1.0 && adam.eps > 0.0 &&
        adam.weightDecay >= 0.0)) {
    throw Error(ErrorCode::InvalidConfig, "optimizer hyperparameters out of range");
  }
  weights.validate();
  model.validate();
}

void to_json(nlohmann::json& j, const TrainConfig& c) {
  j = nlohmann::json{
      {"epochs", c.epochs},
      {"batch_size", c.batchSize},
      {"base_lr", c.baseLr},
      {"seed", c.seed},
      {"eval_every", c.evalEvery},
      {"adam",
       {{"beta1", c.adam.beta1}, {"beta2", c.adam.beta2}, {"eps", c.adam.eps}, {"weight_decay", c.adam.weightDecay}}},
      {"loss_weights", c.weights},
      {"model", c.model}};
}

void from_json(const nlohmann::json& j, TrainConfig& c) {
  c = TrainConfig{};
  c.epochs = j.value("epochs", c.epochs);
  c.batchSize = j.value("batch_size", c.batchSize);
  c.baseLr = j.value("base_lr", c.baseLr);
  c.seed = j.value("seed", c.seed);
  c.evalEvery = j.value("eval_every", c.evalEvery);
  if (j.contains("adam")) {
    const auto& a = j.at("adam");
    c.adam.beta1 = a.value("beta1", c.adam.beta1);
    c.adam.beta2 = a.value("beta2", c.adam.beta2);
    c.adam.eps = a.value("eps", c.adam.eps);
    c.adam.weightDecay = a.value("weight_decay", c.adam.weightDecay);
  }
  if (j.contains("loss_weights")) {
    c.weights = j.at("loss_weights").get<LossWeights>();
  }
  if (j.contains("model")) {
    c.model = j.at("model").get<ModelConfig>();
  }
}

std::uint64_t configHash(const TrainConfig& c) {
  return text::fnv1a(nlohmann::json(c).dump());
}

double lrAt(long long step, long long totalSteps, double baseLr) {
  if (totalSteps <= 0) {
    return baseLr;
  }
  const double t = static_cast<double>(std::clamp(step, 0LL, totalSteps)) / static_cast<double>(totalSteps);
  return std::max(0.0, baseLr * 0.5 * (1.0 + std::cos(std::numbers::pi * t)));
}

AdamState AdamState::zeros(const ModelParams& params) {
  AdamState s;
  for (const auto& p : params.list()) {
    s.m.push_back(Matrix::Zero(p.value.rows(), p.value.cols()));
    s.v.push_back(Matrix::Zero(p.value.rows(), p.value.cols()));
  }
  return s;
}

void optimizerStep(ModelParams& params, const std::vector<Matrix>& grads, AdamState& state, double lr,
                   const AdamHyper& h) {
  auto& list = params.list();
  if (grads.size() != list.size() || state.m.size() != list.size() || state.v.size() != list.size()) {
    throw Error(ErrorCode::ShapeMismatch, "gradient or optimizer state count differs from parameter count");
  }
  for (size_t k = 0; k < list.size(); ++k) {
    if (grads[k].rows() != list[k].value.rows() || grads[k].cols() != list[k].value.cols()) {
      throw Error(ErrorCode::ShapeMismatch, "gradient shape mismatch for " + list[k].name);
    }
    if (!grads[k].allFinite()) {
      throw Error(ErrorCode::NonFinite, "non-finite gradient for " + list[k].name);
    }
  }
  state.step += 1;
  const double c1 = 1.0 - std::pow(h.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(h.beta2, static_cast<double>(state.step));
  for (size_t k = 0; k < list.size(); ++k) {
    Matrix& p = list[k].value;
    if (list[k].kind == ParamKind::Weight && h.weightDecay != 0.0) {
      p *= 1.0 - lr * h.weightDecay;
    }
    state.m[k] = h.beta1 * state.m[k] + (1.0 - h.beta1) * grads[k];
    state.v[k] = h.beta2 * state.v[k] + (1.0 - h.beta2) * grads[k].cwiseAbs2();
    p.array() -= lr * (state.m[k].array() / c1) / ((state.v[k].array() / c2).sqrt() + h.eps);
    if (!p.allFinite()) {
      throw Error(ErrorCode::NonFinite, "parameter " + list[k].name + " became non-finite");
    }
  }
  params.projectConstraints();
}

double torsoScale(const std::vector<PosePairSample>& samples) {
  if (samples.empty()) {
    throw Error(ErrorCode::EmptySequence, "no samples to derive the input scale from");
  }
  const JointLayout& layout = JointLayout::human36m();
  const int thorax = *layout.indexOf("thorax");
  double sum = 0.0;
  for (const auto& s : samples) {
    sum += (s.target.joint(thorax) - s.target.joint(layout.pelvis)).norm();
  }
  const double scale = sum / static_cast<double>(samples.size());
  if (!(scale > 1e-9)) {
    throw Error(ErrorCode::DegenerateInput, "torso scale is zero");
  }
  return scale;
}

losses::LossTerms sampleLoss(const model::BoundParams& p, const PosePairSample& sample, double inputScale,
                             const LossWeights& weights) {
  ad::Tape& tape = p.tape();
  const Var x = tape.constant(Matrix(sample.input.joints / inputScale));
  const Var target = tape.constant(Matrix(sample.target.joints / inputScale));
  const Var rGt = tape.constant(Matrix(sample.rotation.matrix()));

  const model::ForwardOutput out = model::forward(p, x);
  const Var rT = model::rotationTransposeFrom6d(out.rot6);
  const Var r = ad::transpose(rT);
  const Var canonical = ad::add(ad::matmul(x, r), out.delta);

  losses::LossTerms t;
  t.pose = losses::poseLoss(canonical, target);
  t.rotation = losses::rotationLoss(r, rGt);
  t.cycle = losses::cycleLoss(rT, canonical, x);
  t.perceptual = losses::perceptualLoss(canonical, target);
  t.regularization = losses::regularizationLoss(out.delta, p["graph.A_learned"], p.anatomical(), out.selfAttentionMaps,
                                                p.config().attentionHeads, weights);
  t.total = losses::totalLoss(t, weights);
  return t;
}

nlohmann::json toJson(const EpochRecord& r) {
  nlohmann::json j{
      {"epoch", r.epoch},
      {"steps", r.steps},
      {"lr", r.lr},
      {"loss",
       {{"pose", r.loss.pose},
        {"rotation", r.loss.rotation},
        {"cycle", r.loss.cycle},
        {"perceptual", r.loss.perceptual},
        {"regularization", r.loss.regularization},
        {"total", r.loss.total}}}};
  if (r.evaluated) {
    j["val_rotation_error_deg"] = r.valRotationErrorDeg;
    j["val_median_rotation_error_deg"] = r.valMedianRotationErrorDeg;
    j["val_mpjpe_mm"] = r.valMpjpe;
    j["val_pa_mpjpe_mm"] = r.valPaMpjpe;
  }
  return j;
}

EpochRecord epochFromJson(const nlohmann::json& j) {
  EpochRecord r;
  r.epoch = j.at("epoch").get<int>();
  r.steps = j.at("steps").get<long long>();
  r.lr = j.at("lr").get<double>();
  const auto& l = j.at("loss");
  r.loss = {l.at("pose").get<double>(),       l.at("rotation").get<double>(),
            l.at("cycle").get<double>(),      l.at("perceptual").get<double>(),
            l.at("regularization").get<double>(), l.at("total").get<double>()};
  r.evaluated = j.contains("val_rotation_error_deg");
  if (r.evaluated) {
    r.valRotationErrorDeg = j.at("val_rotation_error_deg").get<double>();
    r.valMedianRotationErrorDeg = j.at("val_median_rotation_error_deg").get<double>();
    r.valMpjpe = j.at("val_mpjpe_mm").get<double>();
    r.valPaMpjpe = j.at("val_pa_mpjpe_mm").get<double>();
  }
  return r;
}

void saveCheckpoint(const std::filesystem::path& path, const Checkpoint& c) {
  nlohmann::json params = nlohmann::json::array();
  for (const auto& p : c.params.list()) {
    nlohmann::json e = matrixToJson(p.value);
    e["name"] = p.name;
    e["kind"] = kindName(p.kind);
    params.push_back(std::move(e));
  }
  nlohmann::json m = nlohmann::json::array();
  nlohmann::json v = nlohmann::json::array();
  for (size_t k = 0; k < c.adam.m.size(); ++k) {
    m.push_back(matrixToJson(c.adam.m[k]));
    v.push_back(matrixToJson(c.adam.v[k]));
  }
  nlohmann::json log = nlohmann::json::array();
  for (const auto& r : c.log) {
    log.push_back(toJson(r));
  }
  const nlohmann::json j{
      {"format", kCheckpointMagic},
      {"format_version", kCheckpointFormatVersion},
      {"config", c.config},
      {"config_hash", text::toHex(configHash(c.config))},
      {"dataset_hash", text::toHex(c.datasetHash)},
      {"input_scale", c.params.inputScale},
      {"epoch", c.epoch},
      {"seed", c.config.seed},
      {"best_val_rotation_error_deg", std::isfinite(c.bestValRotationDeg) ? nlohmann::json(c.bestValRotationDeg) : nlohmann::json(nullptr)},
      {"best_epoch", c.bestEpoch},
      {"params", params},
      {"optimizer", {{"step", c.adam.step}, {"m", m}, {"v", v}}},
      {"log", log}};

  // Write-then-rename so an interrupted save never leaves a truncated file.
  const std::filesystem::path tmp = path.string() + ".tmp";
  writeTextFile(tmp, j.dump() + "\n");
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    throw Error(ErrorCode::IoError, "cannot move checkpoint into place: " + ec.message());
  }
}

Checkpoint loadCheckpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) {
    throw Error(ErrorCode::IoError, "cannot open " + path.string());
  }
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(is);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseError, path.string() + ": " + e.what());
  }
  if (!j.is_object() || j.value("format", std::string()) != kCheckpointMagic) {
    throw Error(ErrorCode::VersionMismatch, path.string() + ": not a checkpoint file");
  }
  if (j.value("format_version", -1) != kCheckpointFormatVersion) {
    throw Error(ErrorCode::VersionMismatch, path.string() + ": unsupported checkpoint version");
  }
  try {
    Checkpoint c;
    c.config = j.at("config").get<TrainConfig>();
    if (j.at("config_hash").get<std::string>() != text::toHex(configHash(c.config))) {
      throw Error(ErrorCode::ParseError, "config hash does not match stored config");
    }
    c.datasetHash = std::stoull(j.at("dataset_hash").get<std::string>(), nullptr, 16);
    c.epoch = j.at("epoch").get<int>();
    c.bestEpoch = j.at("best_epoch").get<int>();
    const auto& best = j.at("best_val_rotation_error_deg");
    c.bestValRotationDeg = best.is_null() ? std::numeric_limits<double>::infinity() : best.get<double>();
    c.params.setConfig(c.config.model);
    for (const auto& e : j.at("params")) {
      c.params.add(e.at("name").get<std::string>(), kindFromName(e.at("kind").get<std::string>()), matrixFromJson(e));
    }
    c.params.inputScale = j.at("input_scale").get<double>();
    const ModelParams reference = ModelParams::initialize(c.config.model, 0);
    if (reference.list().size() != c.params.list().size()) {
      throw Error(ErrorCode::ParseError, "parameter set does not match the model config");
    }
    for (size_t k = 0; k < reference.list().size(); ++k) {
      const auto& a = reference.list()[k];
      const auto& b = c.params.list()[k];
      if (a.name != b.name || a.value.rows() != b.value.rows() || a.value.cols() != b.value.cols()) {
        throw Error(ErrorCode::ParseError, "parameter " + b.name + " does not match the model config");
      }
    }
    const auto& opt = j.at("optimizer");
    c.adam.step = opt.at("step").get<long long>();
    for (const auto& e : opt.at("m")) {
      c.adam.m.push_back(matrixFromJson(e));
    }
    for (const auto& e : opt.at("v")) {
      c.adam.v.push_back(matrixFromJson(e));
    }
    if (c.adam.m.size() != c.params.list().size() || c.adam.v.size() != c.params.list().size()) {
      throw Error(ErrorCode::ParseError, "optimizer state does not match parameters");
    }
    for (const auto& r : j.at("log")) {
      c.log.push_back(epochFromJson(r));
    }
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseError, path.string() + ": " + e.what());
  } catch (const std::invalid_argument&) {
    throw Error(ErrorCode::ParseError, path.string() + ": bad dataset hash");
  }
}

ModelParams loadModel(const std::filesystem::path& path) {
  return loadCheckpoint(path).params;
}

TrainResult train(const TrainConfig& config, const std::vector<PosePairSample>& trainSet,
                  const std::vector<PosePairSample>& valSet, const TrainRunOptions& options) {
  config.validate();
  RunState s;
  s.config = config;
  s.params = ModelParams::initialize(config.model, config.seed);
  s.params.inputScale = torsoScale(trainSet);
  s.adam = AdamState::zeros(s.params);
  s.datasetHash = datasetHash(trainSet, valSet);
  if (!options.outDir.empty()) {
    std::filesystem::create_directories(options.outDir);
    writeTextFile(options.outDir / "config.json", nlohmann::json(config).dump(2) + "\n");
  }

  // Epoch 0: the untrained model on the training set, forward only.
  std::vector<const PosePairSample*> all;
  for (const auto& t : trainSet) {
    all.push_back(&t);
  }
  EpochRecord rec0;
  rec0.lr = lrAt(0, 1, config.baseLr);
  try {
    rec0.loss = batchGradients(s.params, all, config.weights, resolveThreads(options.threads), false).loss;
  } catch (const Error& err) {
    if (err.code() == ErrorCode::NonFinite || err.code() == ErrorCode::DegenerateInput) {
      throw Error(ErrorCode::NonFinite, std::string("training aborted at epoch 0 step 0: ") + err.what());
    }
    throw;
  }
  recordEpoch(s, evaluateEpoch(s, valSet, rec0), options);
  return runEpochs(s, trainSet, valSet, options);
}

TrainResult resume(const std::filesystem::path& checkpoint, const std::vector<PosePairSample>& trainSet,
                   const std::vector<PosePairSample>& valSet, const TrainRunOptions& options,
                   const std::optional<TrainConfig>& expected) {
  Checkpoint c = loadCheckpoint(checkpoint);
  if (expected && configHash(*expected) != configHash(c.config)) {
    throw Error(ErrorCode::ConfigMismatch, "training config differs from the checkpoint's");
  }
  if (datasetHash(trainSet, valSet) != c.datasetHash) {
    throw Error(ErrorCode::ConfigMismatch, "dataset differs from the one the checkpoint was trained on");
  }
  RunState s;
  s.config = c.config;
  s.params = std::move(c.params);
  s.adam = std::move(c.adam);
  s.epoch = c.epoch;
  s.datasetHash = c.datasetHash;
  s.bestVal = c.bestValRotationDeg;
  s.bestEpoch = c.bestEpoch;
  s.log = std::move(c.log);
  s.best = s.params;
  const std::filesystem::path bestPath = checkpoint.parent_path() / "best.ckpt.json";
  if (s.bestEpoch >= 0 && std::filesystem::exists(bestPath)) {
    s.best = loadCheckpoint(bestPath).params;
  }
  if (!options.outDir.empty()) {
    std::filesystem::create_directories(options.outDir);
    writeTextFile(options.outDir / "config.json", nlohmann::json(s.config).dump(2) + "\n");
  }
  return runEpochs(s, trainSet, valSet, options);
}

Canonicalizer modelCanonicalizer(const ModelParams& params) {
  return [params](const Pose& p) {
    const NetworkCanonResult r = canonicalizeWithModel(p, params);
    return CanonResult{r.pose, r.rotation};
  };
}

} // namespace posecanon
