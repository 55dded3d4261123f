#pragma once

#include "posecanon/datagen.hpp"
#include "posecanon/geocanon.hpp"
#include "posecanon/geom3d.hpp"

#include "json.hpp"

#include <filesystem>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

namespace posecanon {

/// Mean per-joint Euclidean distance, mm.
double mpjpe(const Pose& pred, const Pose& gt);

struct SimilarityTransform {
  double scale = 1.0;
  RotationMatrix rotation;
  Vec3 translation = Vec3::Zero();

  /// scale * R p + t for every joint.
  [[nodiscard]] Pose apply(const Pose& p) const;
};

struct ProcrustesResult {
  Pose aligned;
  SimilarityTransform transform;
};

/// Least-squares similarity (rotation, translation, uniform scale) taking
/// `pred` onto `gt`, reflections excluded. Throws DegenerateConfiguration when
/// either centred point set has rank < 2.
ProcrustesResult procrustesAlign(const Pose& pred, const Pose& gt);

double paMpjpe(const Pose& pred, const Pose& gt);

/// Geodesic angle in degrees, in [0, 180].
double rotationErrorDeg(const RotationMatrix& pred, const RotationMatrix& gt);

/// Maps an input pose to (canonical pose, rotation with input = R * canonical).
using Canonicalizer = std::function<CanonResult(const Pose&)>;

Canonicalizer geometricCanonicalizer();

struct SampleMetrics {
  size_t index = 0;
  std::int64_t baseId = 0;
  std::string flag = "ok";
  double rotationErrorDeg = 0.0;
  double mpjpe = 0.0;
  double paMpjpe = 0.0;
  double inputMpjpe = 0.0; // input vs target, before canonicalisation
};

struct CorpusReport {
  std::string method;
  size_t count = 0;
  size_t flagged = 0;
  double meanRotationErrorDeg = 0.0;
  double medianRotationErrorDeg = 0.0;
  double meanMpjpe = 0.0;
  double meanPaMpjpe = 0.0;
  double meanInputMpjpe = 0.0;
  std::vector<SampleMetrics> rows;
};

/// Runs the canonicaliser on every sample. Samples whose canonicalisation
/// throws are recorded as flagged rows and left out of the means. Means are
/// accumulated in sample order.
CorpusReport evaluateCorpus(const Canonicalizer& canonicalizer, const std::vector<PosePairSample>& samples,
                            const std::string& method = "custom");

nlohmann::json reportSummary(const CorpusReport& report);
/// Tab-separated per-sample table with a header row.
void writeReportTable(std::ostream& os, const CorpusReport& report);
/// Writes `<path>` (table) and `<path>.json` (summary).
void writeReport(const std::filesystem::path& path, const CorpusReport& report);

} // namespace posecanon
