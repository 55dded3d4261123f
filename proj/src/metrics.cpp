#include "posecanon/metrics.hpp"

#include "posecanon/error.hpp"
#include "posecanon/text_format.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <ostream>

namespace posecanon {

double mpjpe(const Pose& pred, const Pose& gt) {
  return (pred.joints - gt.joints).rowwise().norm().mean();
}

Pose SimilarityTransform::apply(const Pose& p) const {
  Pose out;
  out.joints = (scale * (p.joints * rotation.matrix().transpose())).rowwise() + translation.transpose();
  return out;
}

namespace {

// Rank test on a centred point set via its singular values.
bool rankAtLeastTwo(const Eigen::Matrix<double, kNumJoints, 3>& centred) {
  const Eigen::JacobiSVD<Eigen::MatrixXd> svd(centred);
  const auto& s = svd.singularValues();
  return s(0) > 0.0 && s(1) > 1e-9 * s(0);
}

} // namespace

ProcrustesResult procrustesAlign(const Pose& pred, const Pose& gt) {
  const Eigen::RowVector3d muP = pred.joints.colwise().mean();
  const Eigen::RowVector3d muG = gt.joints.colwise().mean();
  const JointMatrix p = pred.joints.rowwise() - muP;
  const JointMatrix g = gt.joints.rowwise() - muG;
  if (!rankAtLeastTwo(p) || !rankAtLeastTwo(g)) {
    throw Error(ErrorCode::DegenerateConfiguration, "point set is collinear or collapsed");
  }

  // Cross-covariance gt^T pred; optimal R = U S V^T with S fixing det +1.
  const Mat3 sigma = g.transpose() * p;
  const Eigen::JacobiSVD<Mat3> svd(sigma, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Mat3& u = svd.matrixU();
  const Mat3& v = svd.matrixV();
  Vec3 s = Vec3::Ones();
  if ((u * v.transpose()).determinant() < 0.0) {
    s(2) = -1.0;
  }
  const Mat3 r = u * s.asDiagonal() * v.transpose();
  const double scale = svd.singularValues().dot(s) / p.squaredNorm();

  ProcrustesResult out;
  out.transform.rotation = RotationMatrix::fromMatrixUnchecked(r);
  out.transform.scale = scale;
  out.transform.translation = muG.transpose() - scale * r * muP.transpose();
  out.aligned = out.transform.apply(pred);
  return out;
}

double paMpjpe(const Pose& pred, const Pose& gt) {
  return mpjpe(procrustesAlign(pred, gt).aligned, gt);
}

double rotationErrorDeg(const RotationMatrix& pred, const RotationMatrix& gt) {
  return radToDeg(geodesicAngle(pred, gt));
}

Canonicalizer geometricCanonicalizer() {
  return [](const Pose& p) { return geometricCanonicalize(p); };
}

CorpusReport evaluateCorpus(const Canonicalizer& canonicalizer, const std::vector<PosePairSample>& samples,
                            const std::string& method) {
  CorpusReport report;
  report.method = method;
  report.count = samples.size();
  std::vector<double> rotErrors;
  double sumRot = 0.0;
  double sumMpjpe = 0.0;
  double sumPa = 0.0;
  double sumInput = 0.0;

  for (size_t i = 0; i < samples.size(); ++i) {
    const auto& s = samples[i];
    SampleMetrics row;
    row.index = i;
    row.baseId = s.baseId;
    row.inputMpjpe = mpjpe(s.input, s.target);
    try {
      const CanonResult r = canonicalizer(s.input);
      if (!r.pose.allFinite()) {
        throw Error(ErrorCode::NonFinite, "canonicaliser produced non-finite joints");
      }
      row.rotationErrorDeg = rotationErrorDeg(r.rotation, s.rotation);
      row.mpjpe = mpjpe(r.pose, s.target);
      row.paMpjpe = paMpjpe(r.pose, s.target);
    } catch (const Error& e) {
      row.flag = std::string(errorCodeName(e.code()));
      row.rotationErrorDeg = row.mpjpe = row.paMpjpe = std::numeric_limits<double>::quiet_NaN();
      ++report.flagged;
      report.rows.push_back(row);
      continue;
    }
    sumRot += row.rotationErrorDeg;
    sumMpjpe += row.mpjpe;
    sumPa += row.paMpjpe;
    sumInput += row.inputMpjpe;
    rotErrors.push_back(row.rotationErrorDeg);
    report.rows.push_back(row);
  }

  const size_t n = rotErrors.size();
  if (n > 0) {
    const double dn = static_cast<double>(n);
    report.meanRotationErrorDeg = sumRot / dn;
    report.meanMpjpe = sumMpjpe / dn;
    report.meanPaMpjpe = sumPa / dn;
    report.meanInputMpjpe = sumInput / dn;
    std::sort(rotErrors.begin(), rotErrors.end());
    report.medianRotationErrorDeg = n % 2 == 1 ? rotErrors[n / 2] : 0.5 * (rotErrors[n / 2 - 1] + rotErrors[n / 2]);
  } else {
    const double nan = std::numeric_limits<double>::quiet_NaN();
    report.meanRotationErrorDeg = report.medianRotationErrorDeg = report.meanMpjpe = report.meanPaMpjpe =
        report.meanInputMpjpe = nan;
  }
  return report;
}

nlohmann::json reportSummary(const CorpusReport& r) {
  auto num = [](double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); };
  return nlohmann::json{
      {"method", r.method},
      {"samples", r.count},
      {"flagged", r.flagged},
      {"mean_rotation_error_deg", num(r.meanRotationErrorDeg)},
      {"median_rotation_error_deg", num(r.medianRotationErrorDeg)},
      {"mean_mpjpe_mm", num(r.meanMpjpe)},
      {"mean_pa_mpjpe_mm", num(r.meanPaMpjpe)},
      {"mean_input_mpjpe_mm", num(r.meanInputMpjpe)}};
}

void writeReportTable(std::ostream& os, const CorpusReport& report) {
  os << "index\tbase_id\tflag\trotation_error_deg\tmpjpe_mm\tpa_mpjpe_mm\tinput_mpjpe_mm\n";
  for (const auto& r : report.rows) {
    os << r.index << '\t' << r.baseId << '\t' << r.flag << '\t' << text::formatDouble(r.rotationErrorDeg) << '\t'
       << text::formatDouble(r.mpjpe) << '\t' << text::formatDouble(r.paMpjpe) << '\t'
       << text::formatDouble(r.inputMpjpe) << '\n';
  }
}

void writeReport(const std::filesystem::path& path, const CorpusReport& report) {
  std::ofstream table(path, std::ios::binary);
  if (!table) {
    throw Error(ErrorCode::IoError, "cannot write " + path.string());
  }
  writeReportTable(table, report);
  std::ofstream summary(path.string() + ".json", std::ios::binary);
  if (!summary) {
    throw Error(ErrorCode::IoError, "cannot write " + path.string() + ".json");
  }
  summary << reportSummary(report).dump(2) << '\n';
}

} // namespace posecanon
