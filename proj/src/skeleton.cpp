#include "posecanon/skeleton.hpp"

#include "posecanon/error.hpp"

#include <algorithm>
#include <cmath>

namespace posecanon {

namespace {

constexpr double kMinBoneNorm = 1e-6;

} // namespace

JointLayout::JointLayout(
    std::vector<std::string> names,
    std::vector<BoneEdge> edges,
    int pelvisIndex,
    int leftShoulderIndex,
    int rightShoulderIndex,
    int leftHipIndex,
    int rightHipIndex)
    : pelvis(pelvisIndex),
      leftShoulder(leftShoulderIndex),
      rightShoulder(rightShoulderIndex),
      leftHip(leftHipIndex),
      rightHip(rightHipIndex),
      names_(std::move(names)),
      edges_(std::move(edges)) {
  const int n = static_cast<int>(names_.size());
  if (n != kNumJoints) {
    throw Error(ErrorCode::InvalidConfig, "layout must have 17 joints");
  }
  for (int idx : {pelvis, leftShoulder, rightShoulder, leftHip, rightHip}) {
    if (idx < 0 || idx >= n) {
      throw Error(ErrorCode::InvalidConfig, "landmark index out of range");
    }
  }
  if (static_cast<int>(edges_.size()) != n - 1) {
    throw Error(ErrorCode::InvalidConfig, "a tree over 17 joints needs 16 edges");
  }
  parent_.assign(n, -1);
  for (const auto& e : edges_) {
    if (e.parent < 0 || e.parent >= n || e.child < 0 || e.child >= n || e.parent == e.child) {
      throw Error(ErrorCode::InvalidConfig, "edge index out of range");
    }
    if (e.child == pelvis || parent_[e.child] != -1) {
      throw Error(ErrorCode::InvalidConfig, "joint '" + names_[e.child] + "' has two parents");
    }
    parent_[e.child] = e.parent;
  }
  // Every joint must reach the pelvis without revisiting a node.
  for (int j = 0; j < n; ++j) {
    int cur = j;
    int steps = 0;
    while (cur != pelvis) {
      cur = parent_[cur];
      if (cur < 0 || ++steps > n) {
        throw Error(ErrorCode::InvalidConfig, "joint '" + names_[j] + "' is not connected to the root");
      }
    }
  }
  for (int j = 0; j < n; ++j) {
    if (parent_[j] < 0) {
      continue;
    }
    for (const auto& e : edges_) {
      if (e.parent == j) {
        angles_.push_back({parent_[j], j, e.child});
      }
    }
  }
}

const JointLayout& JointLayout::human36m() {
  static const JointLayout layout(
      {"pelvis",
       "r_hip",
       "r_knee",
       "r_ankle",
       "l_hip",
       "l_knee",
       "l_ankle",
       "spine",
       "thorax",
       "neck",
       "head",
       "l_shoulder",
       "l_elbow",
       "l_wrist",
       "r_shoulder",
       "r_elbow",
       "r_wrist"},
      {{0, 1},
       {1, 2},
       {2, 3},
       {0, 4},
       {4, 5},
       {5, 6},
       {0, 7},
       {7, 8},
       {8, 9},
       {9, 10},
       {8, 11},
       {11, 12},
       {12, 13},
       {8, 14},
       {14, 15},
       {15, 16}},
      0,
      11,
      14,
      4,
      1);
  return layout;
}

std::optional<int> JointLayout::indexOf(const std::string& name) const {
  const auto it = std::find(names_.begin(), names_.end(), name);
  if (it == names_.end()) {
    return std::nullopt;
  }
  return static_cast<int>(it - names_.begin());
}

void CanonicalFrame::validate() const {
  constexpr double tol = 1e-9;
  if (std::abs(facingAxis.norm() - 1.0) > tol || std::abs(upAxis.norm() - 1.0) > tol ||
      std::abs(facingAxis.dot(upAxis)) > tol) {
    throw Error(ErrorCode::InvalidConfig, "canonical frame axes must be orthogonal unit vectors");
  }
}

Pose centerAtPelvis(const Pose& p, const JointLayout& layout) {
  Pose out;
  out.joints = p.joints.rowwise() - p.joints.row(layout.pelvis);
  return out;
}

std::vector<double> boneLengths(const Pose& p, const JointLayout& layout) {
  std::vector<double> lengths;
  lengths.reserve(layout.edges().size());
  for (const auto& e : layout.edges()) {
    lengths.push_back((p.joint(e.child) - p.joint(e.parent)).norm());
  }
  return lengths;
}

std::vector<double> jointAngles(const Pose& p, const JointLayout& layout) {
  std::vector<double> angles;
  angles.reserve(layout.angleTriples().size());
  for (const auto& t : layout.angleTriples()) {
    const Vec3 u = p.joint(t.parent) - p.joint(t.joint);
    const Vec3 v = p.joint(t.child) - p.joint(t.joint);
    const double nu = u.norm();
    const double nv = v.norm();
    if (nu < kMinBoneNorm || nv < kMinBoneNorm) {
      throw Error(ErrorCode::DegenerateBone, "zero-length bone at joint '" + layout.names()[t.joint] + "'");
    }
    angles.push_back(std::acos(std::clamp(u.dot(v) / (nu * nv), -1.0, 1.0)));
  }
  return angles;
}

} // namespace posecanon
