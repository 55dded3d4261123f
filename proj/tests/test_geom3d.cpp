#include "doctest.h"
#include "helpers.hpp"

#include "posecanon/geom3d.hpp"

using namespace posecanon;
using namespace testutil;

TEST_CASE("rotFrom6d on orthonormal generators gives identity") {
  const RotationMatrix r = rotFrom6d({Vec3(1, 0, 0), Vec3(0, 1, 0)});
  CHECK(maxAbs(r.matrix() - Mat3::Identity()) == 0.0);
}

TEST_CASE("rotFrom6d ignores generator scale") {
  const RotationMatrix r = rotFrom6d({Vec3(2, 0, 0), Vec3(0, 3, 0)});
  CHECK(maxAbs(r.matrix() - Mat3::Identity()) < 1e-15);
}

TEST_CASE("rotFrom6d on swapped axes") {
  // c1 = e_y, c2 = e_x, c3 = e_y x e_x = -e_z.
  const RotationMatrix r = rotFrom6d({Vec3(0, 1, 0), Vec3(1, 0, 0)});
  const Mat3 expected = hand(0, 1, 0, 1, 0, 0, 0, 0, -1);
  CHECK(maxAbs(r.matrix() - expected) < 1e-15);
  CHECK(r.matrix().determinant() == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("rotFrom6d rejects collapsed generators") {
  CHECK(codeOf([] { rotFrom6d({Vec3::Zero(), Vec3(0, 1, 0)}); }) == ErrorCode::DegenerateInput);
  CHECK(codeOf([] { rotFrom6d({Vec3(1e-9, 0, 0), Vec3(0, 1, 0)}); }) == ErrorCode::DegenerateInput);
  CHECK(codeOf([] { rotFrom6d({Vec3(1, 2, 3), Vec3(2, 4, 6)}); }) == ErrorCode::DegenerateInput);
  CHECK(codeOf([] { rotFrom6d({Vec3(1, 0, 0), Vec3(1, 1e-9, 0)}); }) == ErrorCode::DegenerateInput);
  CHECK(codeOf([] { rotFrom6d({Vec3(NAN, 0, 0), Vec3(0, 1, 0)}); }) == ErrorCode::DegenerateInput);
}

TEST_CASE("rotFrom6d output is a proper rotation for random generators") {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> n(0.0, 1.0);
  for (int k = 0; k < 2000; ++k) {
    const Rot6D g{Vec3(n(rng), n(rng), n(rng)) * 5.0, Vec3(n(rng), n(rng), n(rng)) * 0.1};
    const RotationMatrix r = rotFrom6d(g);
    REQUIRE(r.orthogonalityError() < 1e-9);
    REQUIRE(r.determinantError() < 1e-9);
    // First column points along a.
    REQUIRE((r.matrix().col(0) - g.a.normalized()).norm() < 1e-12);
  }
}

TEST_CASE("6D round trip reproduces the rotation") {
  std::mt19937_64 rng(2);
  for (int k = 0; k < 2000; ++k) {
    const RotationMatrix r = randomRotation(rng);
    const RotationMatrix back = rotFrom6d(Rot6D::fromRotation(r));
    REQUIRE(maxAbs(back.matrix() - r.matrix()) < 1e-9);
  }
}

TEST_CASE("fromMatrix validates") {
  CHECK(codeOf([] { RotationMatrix::fromMatrix(2.0 * Mat3::Identity()); }) == ErrorCode::DegenerateInput);
  CHECK(codeOf([] { RotationMatrix::fromMatrix(Mat3(Eigen::Vector3d(1, 1, -1).asDiagonal())); }) ==
        ErrorCode::DegenerateInput);
  CHECK_NOTHROW(RotationMatrix::fromMatrix(RotationMatrix::aboutZ(0.3).matrix()));
}

TEST_CASE("geodesic angle examples") {
  const RotationMatrix i;
  CHECK(geodesicAngle(i, i) == 0.0);
  CHECK(geodesicAngle(RotationMatrix::aboutZ(kPi / 2), i) == doctest::Approx(kPi / 2).epsilon(1e-14));
  // tr(Rx(0.3) Rx(0.1)^T) = 1 + 2 cos 0.2.
  CHECK(geodesicAngle(RotationMatrix::aboutX(0.3), RotationMatrix::aboutX(0.1)) ==
        doctest::Approx(0.2).epsilon(1e-13));
  CHECK(geodesicAngle(RotationMatrix::aboutY(kPi), i) == doctest::Approx(kPi).epsilon(1e-14));
}

TEST_CASE("clamped geodesic carries the documented bias at zero") {
  const RotationMatrix i;
  CHECK(geodesicAngleClamped(i, i) == doctest::Approx(std::acos(1.0 - kArccosClampEps)).epsilon(1e-12));
  CHECK(geodesicAngleClamped(i, i) < 4.5e-4);
  CHECK(geodesicAngleClamped(RotationMatrix::aboutX(0.3), RotationMatrix::aboutX(0.1)) ==
        doctest::Approx(0.2).epsilon(1e-12));
}

TEST_CASE("geodesic angle is symmetric, left-invariant and separates rotations") {
  std::mt19937_64 rng(3);
  for (int k = 0; k < 1000; ++k) {
    const RotationMatrix a = randomRotation(rng);
    const RotationMatrix b = randomRotation(rng);
    const RotationMatrix r = randomRotation(rng);
    const double d = geodesicAngle(a, b);
    REQUIRE(d >= 0.0);
    REQUIRE(d <= kPi);
    REQUIRE(std::abs(d - geodesicAngle(b, a)) < 1e-12);
    REQUIRE(std::abs(d - geodesicAngle(compose(r, a), compose(r, b))) < 1e-9);
    REQUIRE(geodesicAngle(a, a) < 1e-7);
    const RotationMatrix nudged = compose(a, RotationMatrix::axisAngle(Vec3(1, 2, 3), 2e-5));
    REQUIRE(geodesicAngle(a, nudged) > 1e-5);
  }
}

TEST_CASE("euler examples") {
  CHECK(maxAbs(eulerToMatrix({0, 0, 0}).matrix() - Mat3::Identity()) == 0.0);
  CHECK(maxAbs(eulerToMatrix({kPi, 0, 0}).matrix() - hand(-1, 0, 0, 0, -1, 0, 0, 0, 1)) < 1e-15);
  // Rz(pi/2) = [0 -1 0; 1 0 0; 0 0 1], Ry(pi/2) = [0 0 1; 0 1 0; -1 0 0].
  const Mat3 product = hand(0, -1, 0, 0, 0, 1, -1, 0, 0);
  CHECK(maxAbs(eulerToMatrix({kPi / 2, kPi / 2, 0}).matrix() - product) < 1e-15);
}

TEST_CASE("euler composition order is yaw pitch roll") {
  const EulerYPR e{0.4, -0.3, 0.2};
  const Mat3 expected = RotationMatrix::aboutZ(e.yaw).matrix() * RotationMatrix::aboutY(e.pitch).matrix() *
      RotationMatrix::aboutX(e.roll).matrix();
  CHECK(maxAbs(eulerToMatrix(e).matrix() - expected) < 1e-15);
}

TEST_CASE("elementary rotations follow the right-hand rule") {
  CHECK((RotationMatrix::aboutZ(kPi / 2).apply(Vec3::UnitX()) - Vec3::UnitY()).norm() < 1e-15);
  CHECK((RotationMatrix::aboutX(kPi / 2).apply(Vec3::UnitY()) - Vec3::UnitZ()).norm() < 1e-15);
  CHECK((RotationMatrix::aboutY(kPi / 2).apply(Vec3::UnitZ()) - Vec3::UnitX()).norm() < 1e-15);
  CHECK(maxAbs(RotationMatrix::axisAngle(Vec3(0, 0, 5), 0.7).matrix() - RotationMatrix::aboutZ(0.7).matrix()) < 1e-15);
}

TEST_CASE("zero-width sampling ranges give the identity") {
  std::mt19937_64 rng(4);
  const SampledRotation s = sampleCameraRotation(rng, EulerRanges::zero());
  CHECK(maxAbs(s.rotation.matrix() - Mat3::Identity()) == 0.0);
}

TEST_CASE("camera sampling is reproducible under a fixed seed") {
  std::mt19937_64 a(99);
  std::mt19937_64 b(99);
  for (int k = 0; k < 10; ++k) {
    const auto sa = sampleCameraRotation(a, EulerRanges::defaults());
    const auto sb = sampleCameraRotation(b, EulerRanges::defaults());
    REQUIRE(sa.rotation.matrix() == sb.rotation.matrix());
  }
}

TEST_CASE("inverted sampling interval is rejected") {
  EulerRanges r = EulerRanges::defaults();
  r.pitch = {0.5, -0.5};
  std::mt19937_64 rng(5);
  CHECK(codeOf([&] { sampleCameraRotation(rng, r); }) == ErrorCode::InvalidRange);
  r = EulerRanges::defaults();
  r.yawCoreWeight = 1.5;
  CHECK(codeOf([&] { r.validate(); }) == ErrorCode::InvalidRange);
}

TEST_CASE("sampled yaw histogram matches the configured mixture") {
  const EulerRanges ranges = EulerRanges::defaults();
  constexpr int kBins = 36;
  constexpr int kSamples = 100000;
  std::mt19937_64 rng(2024);
  std::vector<int> counts(kBins, 0);
  for (int k = 0; k < kSamples; ++k) {
    const auto s = sampleCameraRotation(rng, ranges);
    REQUIRE(s.euler.pitch >= ranges.pitch.low);
    REQUIRE(s.euler.pitch <= ranges.pitch.high);
    REQUIRE(s.euler.roll >= ranges.roll.low);
    REQUIRE(s.euler.roll <= ranges.roll.high);
    REQUIRE(maxAbs(eulerToMatrix(s.euler).matrix() - s.rotation.matrix()) == 0.0);
    const int bin = std::clamp(static_cast<int>((s.euler.yaw + kPi) / (2 * kPi) * kBins), 0, kBins - 1);
    ++counts[static_cast<size_t>(bin)];
  }
  // Expected mass per 10 degree bin: core uniform over [-60, 60] with weight
  // 0.7, plus the full circle with weight 0.3.
  double chi2 = 0.0;
  for (int b = 0; b < kBins; ++b) {
    const double lo = -180.0 + 10.0 * b;
    const double hi = lo + 10.0;
    const double coreOverlap = std::max(0.0, std::min(hi, 60.0) - std::max(lo, -60.0));
    const double p = 0.7 * coreOverlap / 120.0 + 0.3 * 10.0 / 360.0;
    const double expected = p * kSamples;
    chi2 += (counts[static_cast<size_t>(b)] - expected) * (counts[static_cast<size_t>(b)] - expected) / expected;
  }
  // Upper 1% point of chi-square with 35 degrees of freedom.
  CHECK(chi2 < 57.34);
}

TEST_CASE("apply, transpose and compose") {
  std::mt19937_64 rng(6);
  const Pose x = randomPose(rng);
  CHECK(maxAbs(applyRotation(RotationMatrix(), x).joints - x.joints) == 0.0);
  for (int k = 0; k < 100; ++k) {
    const RotationMatrix r = randomRotation(rng);
    const Pose y = applyRotation(r, x);
    REQUIRE(maxAbs(applyRotation(transpose(r), y).joints - x.joints) < 1e-9);
    // Row convention: joint j of the output is R times joint j of the input.
    REQUIRE((y.joint(5) - r.apply(x.joint(5))).norm() < 1e-12);
  }
  CHECK(maxAbs(compose(RotationMatrix::aboutZ(0.3), RotationMatrix::aboutZ(0.5)).matrix() -
               RotationMatrix::aboutZ(0.8).matrix()) < 1e-15);
}

TEST_CASE("degree conversion") {
  CHECK(degToRad(180.0) == kPi);
  CHECK(radToDeg(kPi / 2) == doctest::Approx(90.0));
}
