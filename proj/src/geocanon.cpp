#include "posecanon/geocanon.hpp"

#include "posecanon/error.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace posecanon {

namespace {

constexpr double kMinTorsoNormal = 1e-6;

// Unsigned angle between two vectors, accurate near 0 and pi.
double angleBetween(const Vec3& u, const Vec3& v) {
  return std::atan2(u.cross(v).norm(), u.dot(v));
}

Vec3 shoulderLine(const Pose& p, const JointLayout& layout) {
  return p.joint(layout.leftShoulder) - p.joint(layout.rightShoulder);
}

} // namespace

Vec3 torsoNormal(const Pose& p, const JointLayout& layout) {
  const Vec3 lsho = p.joint(layout.leftShoulder);
  const Vec3 rsho = p.joint(layout.rightShoulder);
  const Vec3 midSho = 0.5 * (lsho + rsho);
  const Vec3 midHip = 0.5 * (p.joint(layout.leftHip) + p.joint(layout.rightHip));
  const Vec3 across = rsho - lsho;
  const Vec3 down = midHip - midSho;
  const double scale = across.norm() * down.norm();
  const Vec3 n = across.cross(down);
  if (!n.allFinite() || scale < kMinTorsoNormal || n.norm() < kMinTorsoNormal * scale) {
    throw Error(ErrorCode::DegenerateTorso, "shoulder and hip joints are collinear or coincident");
  }
  return n.normalized();
}

RotationMatrix shortestArc(const Vec3& from, const Vec3& to, const Vec3& fallbackAxis) {
  const Vec3 axis = from.cross(to);
  const double s = axis.norm();
  const double c = from.dot(to);
  if (s < 1e-15) {
    if (c > 0.0) {
      return RotationMatrix::identity();
    }
    return RotationMatrix::axisAngle(fallbackAxis, std::numbers::pi);
  }
  return RotationMatrix::axisAngle(axis / s, std::atan2(s, c));
}

CanonResult geometricCanonicalize(const Pose& p, const CanonicalFrame& frame, const JointLayout& layout) {
  const Vec3 facing = frame.facingAxis;
  const Vec3 lateral = frame.lateralAxis();

  // Step 1: torso normal onto the facing axis.
  const Vec3 n = torsoNormal(p, layout);
  const RotationMatrix step1 = shortestArc(n, facing, frame.upAxis);

  // Step 2: residual spin about the facing axis. The shoulder line is
  // orthogonal to the normal, so after step 1 it lies in the lateral/up plane.
  Vec3 sho = step1.apply(shoulderLine(p, layout));
  sho -= sho.dot(facing) * facing;
  const double spin = std::atan2(lateral.cross(sho).dot(facing), lateral.dot(sho));
  const RotationMatrix step2 = RotationMatrix::axisAngle(facing, -spin);

  // Pose rows map through the inverse of the recovered camera rotation.
  const RotationMatrix toCanonical = compose(step2, step1);
  CanonResult out;
  out.pose = applyRotation(toCanonical, p);
  out.rotation = toCanonical.transpose();
  return out;
}

bool isGeometricCanonical(const Pose& p, const CanonicalFrame& frame, double tol, const JointLayout& layout) {
  const Vec3 n = torsoNormal(p, layout);
  const Vec3 sho = shoulderLine(p, layout);
  return angleBetween(n, frame.facingAxis) <= tol && angleBetween(sho, frame.lateralAxis()) <= tol;
}

} // namespace posecanon
