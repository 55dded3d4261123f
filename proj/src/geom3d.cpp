#include "posecanon/geom3d.hpp"

#include "posecanon/error.hpp"

#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

namespace posecanon {

std::string_view errorCodeName(ErrorCode code) {
  switch (code) {
    case ErrorCode::DegenerateInput:
      return "DegenerateInput";
    case ErrorCode::DegenerateBone:
      return "DegenerateBone";
    case ErrorCode::DegenerateTorso:
      return "DegenerateTorso";
    case ErrorCode::DegenerateConfiguration:
      return "DegenerateConfiguration";
    case ErrorCode::InvalidRange:
      return "InvalidRange";
    case ErrorCode::InvalidSplit:
      return "InvalidSplit";
    case ErrorCode::InvalidConfig:
      return "InvalidConfig";
    case ErrorCode::ShapeMismatch:
      return "ShapeMismatch";
    case ErrorCode::NonFinite:
      return "NonFinite";
    case ErrorCode::ParseError:
      return "ParseError";
    case ErrorCode::UnknownJointName:
      return "UnknownJointName";
    case ErrorCode::VersionMismatch:
      return "VersionMismatch";
    case ErrorCode::ConfigMismatch:
      return "ConfigMismatch";
    case ErrorCode::EmptySequence:
      return "EmptySequence";
    case ErrorCode::TooShort:
      return "TooShort";
    case ErrorCode::ZeroVariance:
      return "ZeroVariance";
    case ErrorCode::IoError:
      return "IoError";
  }
  return "Unknown";
}

double degToRad(double deg) {
  return deg * std::numbers::pi / 180.0;
}

double radToDeg(double rad) {
  return rad * 180.0 / std::numbers::pi;
}

RotationMatrix RotationMatrix::fromMatrix(const Mat3& m, double tol) {
  RotationMatrix r(m);
  if (!m.allFinite() || r.orthogonalityError() > tol || r.determinantError() > tol) {
    throw Error(ErrorCode::DegenerateInput, "matrix is not a proper rotation");
  }
  return r;
}

RotationMatrix RotationMatrix::aboutX(double angle) {
  const double c = std::cos(angle);
  const double s = std::sin(angle);
  Mat3 m;
  m << 1, 0, 0, 0, c, -s, 0, s, c;
  return RotationMatrix(m);
}

RotationMatrix RotationMatrix::aboutY(double angle) {
  const double c = std::cos(angle);
  const double s = std::sin(angle);
  Mat3 m;
  m << c, 0, s, 0, 1, 0, -s, 0, c;
  return RotationMatrix(m);
}

RotationMatrix RotationMatrix::aboutZ(double angle) {
  const double c = std::cos(angle);
  const double s = std::sin(angle);
  Mat3 m;
  m << c, -s, 0, s, c, 0, 0, 0, 1;
  return RotationMatrix(m);
}

RotationMatrix RotationMatrix::axisAngle(const Vec3& axis, double angle) {
  return RotationMatrix(Eigen::AngleAxisd(angle, axis.normalized()).toRotationMatrix());
}

double RotationMatrix::orthogonalityError() const {
  return (m_.transpose() * m_ - Mat3::Identity()).cwiseAbs().maxCoeff();
}

double RotationMatrix::determinantError() const {
  return std::abs(m_.determinant() - 1.0);
}

void EulerRanges::validate() const {
  for (const AngleInterval* iv : {&yawCore, &yawFull, &pitch, &roll}) {
    if (!std::isfinite(iv->low) || !std::isfinite(iv->high)) {
      throw Error(ErrorCode::InvalidRange, "non-finite angle bound");
    }
    if (iv->low > iv->high) {
      throw Error(
          ErrorCode::InvalidRange,
          "interval low " + std::to_string(iv->low) + " exceeds high " + std::to_string(iv->high));
    }
  }
  if (!(yawCoreWeight >= 0.0 && yawCoreWeight <= 1.0)) {
    throw Error(ErrorCode::InvalidRange, "yaw core weight must lie in [0, 1]");
  }
}

EulerRanges EulerRanges::defaults() {
  EulerRanges r;
  r.yawCore = {degToRad(-60.0), degToRad(60.0)};
  r.yawCoreWeight = 0.7;
  r.yawFull = {degToRad(-180.0), degToRad(180.0)};
  r.pitch = {degToRad(-30.0), degToRad(30.0)};
  r.roll = {degToRad(-15.0), degToRad(15.0)};
  return r;
}

EulerRanges EulerRanges::zero() {
  EulerRanges r;
  r.yawCoreWeight = 1.0;
  return r;
}

RotationMatrix rotFrom6d(const Rot6D& r) {
  if (!r.a.allFinite() || !r.b.allFinite()) {
    throw Error(ErrorCode::DegenerateInput, "non-finite 6D rotation");
  }
  const double na = r.a.norm();
  if (na < kRot6dDegeneracy) {
    throw Error(ErrorCode::DegenerateInput, "first 6D generator has vanishing norm");
  }
  const Vec3 c1 = r.a / na;
  const Vec3 bPerp = r.b - c1.dot(r.b) * c1;
  const double nb = bPerp.norm();
  if (nb < kRot6dDegeneracy) {
    throw Error(ErrorCode::DegenerateInput, "6D generators are parallel");
  }
  const Vec3 c2 = bPerp / nb;
  Mat3 m;
  m.col(0) = c1;
  m.col(1) = c2;
  m.col(2) = c1.cross(c2);
  return RotationMatrix::fromMatrixUnchecked(m);
}

double geodesicAngle(const RotationMatrix& ra, const RotationMatrix& rb) {
  // atan2 of the axis-angle sine and cosine of ra * rb^T: exact near 0 and pi,
  // where the plain arccos of the trace loses half the significant digits.
  const Mat3 m = ra.matrix() * rb.matrix().transpose();
  const double cosAngle = std::clamp((m.trace() - 1.0) / 2.0, -1.0, 1.0);
  const Vec3 axisSin(m(2, 1) - m(1, 2), m(0, 2) - m(2, 0), m(1, 0) - m(0, 1));
  return std::atan2(0.5 * axisSin.norm(), cosAngle);
}

double geodesicAngleClamped(const RotationMatrix& ra, const RotationMatrix& rb) {
  const double trace = ra.matrix().cwiseProduct(rb.matrix()).sum();
  const double c = std::clamp((trace - 1.0) / 2.0, -1.0 + kArccosClampEps, 1.0 - kArccosClampEps);
  return std::acos(c);
}

RotationMatrix eulerToMatrix(const EulerYPR& e) {
  return RotationMatrix::fromMatrixUnchecked(
      RotationMatrix::aboutZ(e.yaw).matrix() * RotationMatrix::aboutY(e.pitch).matrix() *
      RotationMatrix::aboutX(e.roll).matrix());
}

namespace {

double sampleInterval(std::mt19937_64& rng, const AngleInterval& iv) {
  if (iv.width() == 0.0) {
    return iv.low;
  }
  std::uniform_real_distribution<double> dist(iv.low, iv.high);
  return dist(rng);
}

} // namespace

SampledRotation sampleCameraRotation(std::mt19937_64& rng, const EulerRanges& ranges) {
  ranges.validate();
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  EulerYPR e;
  // Always consume the mixture draw so the stream layout does not depend on
  // the configured weight.
  const bool core = unit(rng) < ranges.yawCoreWeight;
  e.yaw = sampleInterval(rng, core ? ranges.yawCore : ranges.yawFull);
  e.pitch = sampleInterval(rng, ranges.pitch);
  e.roll = sampleInterval(rng, ranges.roll);
  return {eulerToMatrix(e), e};
}

RotationMatrix compose(const RotationMatrix& ra, const RotationMatrix& rb) {
  return RotationMatrix::fromMatrixUnchecked(ra.matrix() * rb.matrix());
}

RotationMatrix transpose(const RotationMatrix& r) {
  return r.transpose();
}

Pose applyRotation(const RotationMatrix& r, const Pose& pose) {
  Pose out;
  out.joints = pose.joints * r.matrix().transpose();
  return out;
}

} // namespace posecanon
