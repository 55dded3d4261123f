#pragma once

#include <Eigen/Dense>

#include <array>
#include <random>

namespace posecanon {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

inline constexpr int kNumJoints = 17;

// One joint per row, millimetres.
using JointMatrix = Eigen::Matrix<double, kNumJoints, 3>;

struct Pose {
  JointMatrix joints = JointMatrix::Zero();

  [[nodiscard]] Vec3 joint(int index) const {
    return joints.row(index).transpose();
  }
  void setJoint(int index, const Vec3& p) {
    joints.row(index) = p.transpose();
  }
  [[nodiscard]] bool allFinite() const {
    return joints.allFinite();
  }
};

// Clamp margin for arccos in geodesic distances. Bias near 0 or pi is at most
// acos(1 - 1e-7) ~ 4.5e-4 rad.
inline constexpr double kArccosClampEps = 1e-7;

// Threshold below which a 6D generator is treated as collapsed.
inline constexpr double kRot6dDegeneracy = 1e-8;

/// Proper rotation (orthonormal, det +1). Joints transform as column vectors
/// under left multiplication: p' = R p, i.e. for a pose X' = X R^T.
class RotationMatrix {
 public:
  RotationMatrix() : m_(Mat3::Identity()) {}

  /// Validates orthonormality and determinant within `tol`.
  static RotationMatrix fromMatrix(const Mat3& m, double tol = 1e-9);
  /// No validation. For matrices built by construction (products of rotations).
  static RotationMatrix fromMatrixUnchecked(const Mat3& m) {
    return RotationMatrix(m);
  }
  static RotationMatrix identity() {
    return RotationMatrix();
  }
  static RotationMatrix aboutX(double angle);
  static RotationMatrix aboutY(double angle);
  static RotationMatrix aboutZ(double angle);
  /// Right-handed rotation of `angle` about the (normalised) `axis`.
  static RotationMatrix axisAngle(const Vec3& axis, double angle);

  [[nodiscard]] const Mat3& matrix() const {
    return m_;
  }
  [[nodiscard]] double operator()(int r, int c) const {
    return m_(r, c);
  }

  [[nodiscard]] RotationMatrix transpose() const {
    return RotationMatrix(m_.transpose());
  }
  [[nodiscard]] Vec3 apply(const Vec3& v) const {
    return m_ * v;
  }

  /// Max deviation of m^T m from identity and of det from +1.
  [[nodiscard]] double orthogonalityError() const;
  [[nodiscard]] double determinantError() const;

 private:
  explicit RotationMatrix(const Mat3& m) : m_(m) {}
  Mat3 m_;
};

/// Continuous 6D rotation parameterisation: two raw column generators.
struct Rot6D {
  Vec3 a = Vec3::UnitX();
  Vec3 b = Vec3::UnitY();

  static Rot6D fromArray(const std::array<double, 6>& v) {
    return {Vec3(v[0], v[1], v[2]), Vec3(v[3], v[4], v[5])};
  }
  static Rot6D fromRotation(const RotationMatrix& r) {
    return {r.matrix().col(0), r.matrix().col(1)};
  }
};

struct EulerYPR {
  double yaw = 0.0;
  double pitch = 0.0;
  double roll = 0.0;
};

struct AngleInterval {
  double low = 0.0; // radians
  double high = 0.0;

  [[nodiscard]] double width() const {
    return high - low;
  }
};

/// Camera-rotation sampling distribution. Yaw is a two-component mixture:
/// with probability `yawCoreWeight` uniform over `yawCore`, otherwise uniform
/// over `yawFull`. Pitch and roll are uniform.
struct EulerRanges {
  AngleInterval yawCore;
  double yawCoreWeight = 0.7;
  AngleInterval yawFull;
  AngleInterval pitch;
  AngleInterval roll;

  /// 70% of yaw in [-60, 60] deg, remainder over the full circle; pitch
  /// [-30, 30] deg; roll [-15, 15] deg.
  static EulerRanges defaults();
  /// All intervals collapsed to zero: sampling always yields identity.
  static EulerRanges zero();

  /// Throws InvalidRange when any interval has low > high, the weight is
  /// outside [0, 1] or any bound is non-finite.
  void validate() const;
};

struct SampledRotation {
  RotationMatrix rotation;
  EulerYPR euler;
};

/// Gram-Schmidt on (a, b); third column is c1 x c2. Throws DegenerateInput.
RotationMatrix rotFrom6d(const Rot6D& r);

/// Angle of the relative rotation ra * rb^T in [0, pi], evaluated without
/// clamping bias (atan2 of the axis-angle sine and cosine).
double geodesicAngle(const RotationMatrix& ra, const RotationMatrix& rb);

/// arccos((tr(ra rb^T) - 1) / 2) with the argument clamped to [-1+eps, 1-eps].
/// Matches the differentiable rotation loss; biased by up to 4.5e-4 rad at the
/// boundaries.
double geodesicAngleClamped(const RotationMatrix& ra, const RotationMatrix& rb);

/// R = Rz(yaw) * Ry(pitch) * Rx(roll) (intrinsic Z-Y-X).
RotationMatrix eulerToMatrix(const EulerYPR& e);

SampledRotation sampleCameraRotation(std::mt19937_64& rng, const EulerRanges& ranges);

RotationMatrix compose(const RotationMatrix& ra, const RotationMatrix& rb);
RotationMatrix transpose(const RotationMatrix& r);
Pose applyRotation(const RotationMatrix& r, const Pose& pose);

double degToRad(double deg);
double radToDeg(double rad);

} // namespace posecanon
