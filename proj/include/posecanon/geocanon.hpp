#pragma once

#include "posecanon/geom3d.hpp"
#include "posecanon/skeleton.hpp"

namespace posecanon {

struct CanonResult {
  Pose pose;
  RotationMatrix rotation; // canonical -> input: input = rotation * pose
};

/// Torso-plane normal (Rsho - Lsho) x (midHip - midSho), normalised. Points in
/// the direction the subject faces. Throws DegenerateTorso.
Vec3 torsoNormal(const Pose& p, const JointLayout& layout = JointLayout::human36m());

/// Shortest-arc rotation taking unit `from` onto unit `to`. The antipodal case
/// is resolved by a half-turn about `fallbackAxis` (must be orthogonal to `to`).
RotationMatrix shortestArc(const Vec3& from, const Vec3& to, const Vec3& fallbackAxis);

/// Rule-based canonicaliser: rotate the torso normal onto the facing axis,
/// then rotate about the facing axis so the shoulder line (L - R) lies along
/// the lateral axis. `p` must be pelvis-centred. The returned rotation R
/// satisfies p = R * result.pose.
CanonResult geometricCanonicalize(
    const Pose& p,
    const CanonicalFrame& frame = {},
    const JointLayout& layout = JointLayout::human36m());

/// True iff the torso normal and the shoulder line are within `tol` radians of
/// the facing and lateral axes.
bool isGeometricCanonical(
    const Pose& p,
    const CanonicalFrame& frame = {},
    double tol = 1e-6,
    const JointLayout& layout = JointLayout::human36m());

} // namespace posecanon
