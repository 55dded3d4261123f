#pragma once

#include "posecanon/geom3d.hpp"

#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace posecanon {

struct BoneEdge {
  int parent = 0;
  int child = 0;
};

/// Angle measured at `joint` between the bone towards `parent` and the bone
/// towards `child`. A straight limb gives pi.
struct AngleTriple {
  int parent = 0;
  int joint = 0;
  int child = 0;
};

/// Ordered joint labels plus the bone tree. Construction validates that the
/// edges form a spanning tree rooted at the pelvis.
class JointLayout {
 public:
  JointLayout(
      std::vector<std::string> names,
      std::vector<BoneEdge> edges,
      int pelvis,
      int leftShoulder,
      int rightShoulder,
      int leftHip,
      int rightHip);

  /// pelvis, r_hip, r_knee, r_ankle, l_hip, l_knee, l_ankle, spine, thorax,
  /// neck, head, l_shoulder, l_elbow, l_wrist, r_shoulder, r_elbow, r_wrist.
  static const JointLayout& human36m();

  [[nodiscard]] const std::vector<std::string>& names() const {
    return names_;
  }
  [[nodiscard]] const std::vector<BoneEdge>& edges() const {
    return edges_;
  }
  [[nodiscard]] const std::vector<AngleTriple>& angleTriples() const {
    return angles_;
  }
  [[nodiscard]] int parentOf(int joint) const {
    return parent_[joint];
  }
  [[nodiscard]] std::optional<int> indexOf(const std::string& name) const;

  int pelvis;
  int leftShoulder;
  int rightShoulder;
  int leftHip;
  int rightHip;

 private:
  std::vector<std::string> names_;
  std::vector<BoneEdge> edges_;
  std::vector<int> parent_;
  std::vector<AngleTriple> angles_;
};

/// Body-centred target frame. The lateral axis (subject's left) is
/// up x facing.
struct CanonicalFrame {
  Vec3 facingAxis = Vec3(-1.0, 0.0, 0.0);
  Vec3 upAxis = Vec3(0.0, 0.0, 1.0);

  [[nodiscard]] Vec3 lateralAxis() const {
    return upAxis.cross(facingAxis);
  }
  /// Throws InvalidConfig when the axes are not orthogonal unit vectors.
  void validate() const;
};

Pose centerAtPelvis(const Pose& p, const JointLayout& layout = JointLayout::human36m());

std::vector<double> boneLengths(const Pose& p, const JointLayout& layout = JointLayout::human36m());

/// One angle per AngleTriple of the layout. Throws DegenerateBone when an
/// incident bone is shorter than 1e-6.
std::vector<double> jointAngles(const Pose& p, const JointLayout& layout = JointLayout::human36m());

} // namespace posecanon
