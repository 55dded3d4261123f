#pragma once

#include "posecanon/datagen.hpp"
#include "posecanon/error.hpp"
#include "posecanon/geom3d.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>
#include <string>

namespace testutil {

using namespace posecanon;

inline constexpr double kPi = std::numbers::pi;

// Uniform rotation from a normalised Gaussian quaternion.
inline RotationMatrix randomRotation(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Eigen::Quaterniond q(n(rng), n(rng), n(rng), n(rng));
  q.normalize();
  return RotationMatrix::fromMatrix(q.toRotationMatrix(), 1e-12);
}

inline Pose randomPose(std::mt19937_64& rng, double spread = 300.0) {
  std::uniform_real_distribution<double> u(-spread, spread);
  Pose p;
  for (int j = 0; j < kNumJoints; ++j) {
    p.setJoint(j, Vec3(u(rng), u(rng), u(rng)));
  }
  return p;
}

// A plausible canonical pose from the shipped generator.
inline Pose basePose(std::uint64_t seed = 11) {
  return generateBasePoses(1, seed).front();
}

inline Mat3 hand(double a, double b, double c, double d, double e, double f, double g, double h, double i) {
  Mat3 m;
  m << a, b, c, d, e, f, g, h, i;
  return m;
}

inline double maxAbs(const Eigen::MatrixXd& m) {
  return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff();
}

template <typename Fn>
ErrorCode codeOf(Fn&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  throw std::runtime_error("expected a posecanon::Error");
}

template <typename Fn>
std::string messageOf(Fn&& fn) {
  try {
    fn();
  } catch (const std::exception& e) {
    return e.what();
  }
  return {};
}

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

// Fresh scratch directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    const auto stamp = std::chrono::steady_clock::now().time_since_epoch().count();
    path_ = std::filesystem::temp_directory_path() /
        ("posecanon_" + tag + "_" + std::to_string(stamp) + "_" + std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  [[nodiscard]] const std::filesystem::path& path() const {
    return path_;
  }
  std::filesystem::path operator/(const std::string& name) const {
    return path_ / name;
  }

 private:
  std::filesystem::path path_;
};

} // namespace testutil
