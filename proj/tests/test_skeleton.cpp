#include "doctest.h"
#include "helpers.hpp"

#include "posecanon/skeleton.hpp"

using namespace posecanon;
using namespace testutil;

namespace {

const JointLayout& h36m() {
  return JointLayout::human36m();
}

int angleIndexAt(int joint, int child) {
  const auto& triples = h36m().angleTriples();
  for (size_t k = 0; k < triples.size(); ++k) {
    if (triples[k].joint == joint && triples[k].child == child) {
      return static_cast<int>(k);
    }
  }
  return -1;
}

} // namespace

TEST_CASE("layout matches the 17-joint convention") {
  const auto& l = h36m();
  REQUIRE(l.names().size() == 17);
  CHECK(l.names()[0] == "pelvis");
  CHECK(l.names()[16] == "r_wrist");
  CHECK(l.edges().size() == 16);
  CHECK(l.pelvis == 0);
  CHECK(l.leftShoulder == 11);
  CHECK(l.rightShoulder == 14);
  CHECK(l.leftHip == 4);
  CHECK(l.rightHip == 1);
  CHECK(l.indexOf("l_elbow") == 12);
  CHECK_FALSE(l.indexOf("tail").has_value());
  // One angle per (parent, joint, child): thorax contributes three, leaves none.
  CHECK(l.angleTriples().size() == 13);
}

TEST_CASE("layout construction rejects cycles and orphans") {
  auto names = h36m().names();
  auto edges = h36m().edges();
  SUBCASE("cycle") {
    edges[15] = {16, 14}; // r_shoulder gets two parents
    CHECK(codeOf([&] { JointLayout(names, edges, 0, 11, 14, 4, 1); }) == ErrorCode::InvalidConfig);
  }
  SUBCASE("orphan loop") {
    // Detach r_elbow/r_wrist into a two-cycle unreachable from the pelvis.
    edges[14] = {16, 15};
    edges[15] = {15, 16};
    CHECK(codeOf([&] { JointLayout(names, edges, 0, 11, 14, 4, 1); }) == ErrorCode::InvalidConfig);
  }
  SUBCASE("too few edges") {
    edges.pop_back();
    CHECK(codeOf([&] { JointLayout(names, edges, 0, 11, 14, 4, 1); }) == ErrorCode::InvalidConfig);
  }
  SUBCASE("edge into the root") {
    edges[0] = {1, 0};
    CHECK(codeOf([&] { JointLayout(names, edges, 0, 11, 14, 4, 1); }) == ErrorCode::InvalidConfig);
  }
}

TEST_CASE("centering") {
  std::mt19937_64 rng(1);
  Pose p = randomPose(rng);
  p.setJoint(0, Vec3(10, 20, 30));
  const Pose c = centerAtPelvis(p);
  CHECK(c.joint(0).norm() == 0.0);
  CHECK(maxAbs(c.joints - (p.joints.rowwise() - Eigen::RowVector3d(10, 20, 30))) < 1e-12);
  CHECK(maxAbs(centerAtPelvis(c).joints - c.joints) == 0.0);
}

TEST_CASE("bone lengths of a unit chain") {
  // Place every child one unit from its parent along a joint-specific direction.
  Pose p;
  std::vector<bool> placed(kNumJoints, false);
  placed[0] = true;
  for (int pass = 0; pass < kNumJoints; ++pass) {
    for (const auto& e : h36m().edges()) {
      if (placed[static_cast<size_t>(e.parent)] && !placed[static_cast<size_t>(e.child)]) {
        const Vec3 dir = Vec3(std::cos(e.child), std::sin(e.child), 0.3 * e.child).normalized();
        p.setJoint(e.child, p.joint(e.parent) + dir);
        placed[static_cast<size_t>(e.child)] = true;
      }
    }
  }
  for (double len : boneLengths(p)) {
    CHECK(len == doctest::Approx(1.0).epsilon(1e-14));
  }
}

TEST_CASE("bone lengths and angles are rigid invariants") {
  std::mt19937_64 rng(2);
  for (int k = 0; k < 50; ++k) {
    const Pose p = randomPose(rng);
    const RotationMatrix r = randomRotation(rng);
    Pose moved = applyRotation(r, p);
    moved.joints.rowwise() += Eigen::RowVector3d(100.0 * k, -50.0, 7.0);
    const auto l0 = boneLengths(p);
    const auto l1 = boneLengths(moved);
    const auto a0 = jointAngles(p);
    const auto a1 = jointAngles(moved);
    for (size_t i = 0; i < l0.size(); ++i) {
      REQUIRE(std::abs(l0[i] - l1[i]) < 1e-9);
    }
    for (size_t i = 0; i < a0.size(); ++i) {
      REQUIRE(std::abs(a0[i] - a1[i]) < 1e-9);
    }
    Pose doubled;
    doubled.joints = 2.0 * p.joints;
    const auto l2 = boneLengths(doubled);
    for (size_t i = 0; i < l0.size(); ++i) {
      REQUIRE(std::abs(l2[i] - 2.0 * l0[i]) < 1e-9);
    }
  }
}

TEST_CASE("elbow angles") {
  Pose p = basePose();
  const int elbowAngle = angleIndexAt(15, 16);
  REQUIRE(elbowAngle >= 0);
  const Vec3 sho = p.joint(14);
  const Vec3 elb = p.joint(15);
  SUBCASE("straight arm") {
    p.setJoint(16, elb + 0.8 * (elb - sho));
    CHECK(jointAngles(p)[static_cast<size_t>(elbowAngle)] == doctest::Approx(kPi).epsilon(1e-7)); // acos loses digits near pi
  }
  SUBCASE("right angle") {
    const Vec3 upper = elb - sho;
    const Vec3 perp = upper.cross(Vec3(0.3, 0.2, 1.0)).normalized();
    p.setJoint(16, elb + 250.0 * perp);
    CHECK(jointAngles(p)[static_cast<size_t>(elbowAngle)] == doctest::Approx(kPi / 2).epsilon(1e-12));
  }
  SUBCASE("collapsed forearm") {
    p.setJoint(16, elb);
    CHECK(codeOf([&] { jointAngles(p); }) == ErrorCode::DegenerateBone);
  }
}

TEST_CASE("canonical frame defaults") {
  const CanonicalFrame f;
  CHECK(f.facingAxis == Vec3(-1, 0, 0));
  CHECK(f.upAxis == Vec3(0, 0, 1));
  CHECK((f.lateralAxis() - Vec3(0, -1, 0)).norm() == 0.0);
  CHECK_NOTHROW(f.validate());
  CanonicalFrame bad;
  bad.upAxis = Vec3(-1, 0, 0.1);
  CHECK(codeOf([&] { bad.validate(); }) == ErrorCode::InvalidConfig);
}
