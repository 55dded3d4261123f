#pragma once

#include "posecanon/datagen.hpp"
#include "posecanon/losses.hpp"
#include "posecanon/metrics.hpp"
#include "posecanon/model.hpp"

#include "json.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace posecanon {

inline constexpr int kCheckpointFormatVersion = 1;

struct AdamHyper {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weightDecay = 0.01;

  friend bool operator==(const AdamHyper&, const AdamHyper&) = default;
};

struct TrainConfig {
  int epochs = 30;
  int batchSize = 64;
  double baseLr = 5e-4;
  std::uint64_t seed = 0;
  int evalEvery = 1;
  AdamHyper adam;
  LossWeights weights;
  ModelConfig model = ModelConfig::toy();

  /// Full-scale schedule: 80 epochs, batch 1024, standard network.
  static TrainConfig fullScale();
  /// Desk-scale schedule: 30 epochs, batch 64, toy network.
  static TrainConfig toy();

  /// Throws InvalidConfig.
  void validate() const;

  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

void to_json(nlohmann::json& j, const TrainConfig& c);
void from_json(const nlohmann::json& j, TrainConfig& c);

/// FNV-1a of the canonical JSON form; any field change alters it.
std::uint64_t configHash(const TrainConfig& c);

/// base * (1 + cos(pi * step / total)) / 2, clamped to step in [0, total].
double lrAt(long long step, long long totalSteps, double baseLr);

struct AdamState {
  long long step = 0;
  std::vector<ad::Matrix> m;
  std::vector<ad::Matrix> v;

  static AdamState zeros(const ModelParams& params);
};

/// One decoupled-decay adaptive-moment update. Weight decay multiplies
/// Weight-kind tensors by (1 - lr * decay) before the moment step. Throws
/// NonFinite if a gradient or updated value is not finite.
void optimizerStep(ModelParams& params, const std::vector<ad::Matrix>& grads, AdamState& state, double lr,
                   const AdamHyper& hyper);

/// Mean pelvis-to-thorax distance over the targets, mm.
double torsoScale(const std::vector<PosePairSample>& samples);

/// Loss terms for one sample on a tape whose parameters are already bound.
losses::LossTerms sampleLoss(const model::BoundParams& p, const PosePairSample& sample, double inputScale,
                             const LossWeights& weights);

struct EpochRecord {
  int epoch = 0;
  long long steps = 0;
  double lr = 0.0;
  LossValues loss;
  double valRotationErrorDeg = 0.0;
  double valMedianRotationErrorDeg = 0.0;
  double valMpjpe = 0.0;
  double valPaMpjpe = 0.0;
  bool evaluated = false;
};

nlohmann::json toJson(const EpochRecord& r);
EpochRecord epochFromJson(const nlohmann::json& j);

struct Checkpoint {
  TrainConfig config;
  ModelParams params;
  AdamState adam;
  int epoch = 0; // completed epochs
  std::uint64_t datasetHash = 0;
  double bestValRotationDeg = 0.0;
  int bestEpoch = -1;
  std::vector<EpochRecord> log;
};

void saveCheckpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
/// Throws VersionMismatch, ParseError, IoError.
Checkpoint loadCheckpoint(const std::filesystem::path& path);
/// Parameters only, for inference.
ModelParams loadModel(const std::filesystem::path& path);

struct TrainRunOptions {
  /// Checkpoints (last.ckpt.json, best.ckpt.json), train_log.jsonl and
  /// config.json land here. Empty: nothing is written.
  std::filesystem::path outDir;
  /// Stop after this many completed epochs, leaving a resumable checkpoint.
  std::optional<int> stopAfterEpoch;
  /// Worker threads for per-sample gradients; results do not depend on it.
  int threads = 0;
  std::function<void(const EpochRecord&)> onEpoch;
};

struct TrainResult {
  ModelParams last;
  ModelParams best;
  int bestEpoch = -1;
  std::vector<EpochRecord> log;
};

/// Seeded training from initialisation. Epoch 0 of the log describes the
/// untrained model. Throws NonFinite naming the step on divergence; the log
/// file keeps all completed epochs.
TrainResult train(const TrainConfig& config, const std::vector<PosePairSample>& trainSet,
                  const std::vector<PosePairSample>& valSet, const TrainRunOptions& options = {});

/// Continues from a checkpoint. `expected` (if given) must hash identically to
/// the stored config, and the data must match the stored dataset hash;
/// otherwise ConfigMismatch.
TrainResult resume(const std::filesystem::path& checkpoint, const std::vector<PosePairSample>& trainSet,
                   const std::vector<PosePairSample>& valSet, const TrainRunOptions& options = {},
                   const std::optional<TrainConfig>& expected = std::nullopt);

/// Network canonicaliser for corpus evaluation.
Canonicalizer modelCanonicalizer(const ModelParams& params);

} // namespace posecanon
