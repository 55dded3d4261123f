#include "doctest.h"
#include "helpers.hpp"

#include "posecanon/datagen.hpp"
#include "posecanon/geocanon.hpp"
#include "posecanon/kinematics.hpp"
#include "posecanon/metrics.hpp"

#include <sstream>

using namespace posecanon;
using namespace testutil;

namespace {

SignalSeries series(const std::vector<double>& t, const std::function<double(double, int)>& f, int channels = 1) {
  SignalSeries s;
  s.t = t;
  s.v.resize(static_cast<Eigen::Index>(t.size()), channels);
  for (size_t k = 0; k < t.size(); ++k) {
    for (int c = 0; c < channels; ++c) {
      s.v(static_cast<Eigen::Index>(k), c) = f(t[k], c);
    }
  }
  for (int c = 0; c < channels; ++c) {
    s.channels.push_back("c" + std::to_string(c));
  }
  s.units = "mm";
  return s;
}

std::vector<Pose> posesOf(const std::vector<PoseRecord>& recs) {
  std::vector<Pose> out;
  for (const auto& r : recs) {
    out.push_back(r.pose);
  }
  return out;
}

std::vector<PoseRecord> rotated(const std::vector<PoseRecord>& recs, const RotationMatrix& r) {
  auto out = recs;
  for (auto& rec : out) {
    rec.pose = applyRotation(r, rec.pose);
  }
  return out;
}

} // namespace

TEST_CASE("time grid validation") {
  SignalSeries s = series(uniformTimes(10, 100.0), [](double t, int) { return t; });
  CHECK_NOTHROW(s.validate());
  CHECK(s.dt() == doctest::Approx(0.01).epsilon(1e-12));
  s.t[4] += 1e-4;
  CHECK(codeOf([&] { s.validate(); }) == ErrorCode::InvalidConfig);
  s = series(uniformTimes(10, 100.0), [](double t, int) { return t; });
  s.v(3, 0) = NAN;
  CHECK(codeOf([&] { s.validate(); }) == ErrorCode::NonFinite);
  s = series(uniformTimes(10, 100.0), [](double t, int) { return t; });
  s.t.pop_back();
  CHECK(codeOf([&] { s.validate(); }) == ErrorCode::ShapeMismatch);
  s = series({0.0, -1.0, -2.0}, [](double t, int) { return t; });
  CHECK(codeOf([&] { s.validate(); }) == ErrorCode::InvalidConfig);
}

TEST_CASE("trajectory extraction") {
  const Pose p = basePose();
  SUBCASE("constant poses") {
    const std::vector<Pose> poses(5, p);
    const auto s = extractTrajectory(poses, uniformTimes(5, 30.0), 16);
    CHECK(s.units == "mm");
    CHECK(s.channels == std::vector<std::string>{"x", "y", "z"});
    for (Eigen::Index k = 0; k < 5; ++k) {
      CHECK((s.v.row(k) - p.joints.row(16)).norm() == 0.0);
    }
  }
  SUBCASE("single frame") {
    const auto s = extractTrajectory({p}, {0.0}, 3);
    CHECK(s.size() == 1);
  }
  SUBCASE("errors") {
    CHECK(codeOf([] { extractTrajectory({}, {}, 0); }) == ErrorCode::EmptySequence);
    CHECK(codeOf([&] { extractTrajectory({p, p}, {0.0}, 0); }) == ErrorCode::ShapeMismatch);
    CHECK(codeOf([&] { extractTrajectory({p}, {0.0}, 17); }) == ErrorCode::InvalidConfig);
  }
}

TEST_CASE("normalisation") {
  const auto t = uniformTimes(50, 10.0);
  const SignalSeries s = series(t, [](double x, int c) { return std::sin(3.0 * x + c) + 0.1 * x * x; }, 3);
  const SignalSeries z = normalizeSignal(s);
  for (Eigen::Index c = 0; c < 3; ++c) {
    const double mean = z.v.col(c).mean();
    const double var = (z.v.col(c).array() - mean).square().mean();
    CHECK(std::abs(mean) < 1e-12);
    CHECK(std::abs(std::sqrt(var) - 1.0) < 1e-12);
  }
  CHECK(z.units == "normalized");
  SignalSeries affine = s;
  affine.v = (s.v.array() * 7.5 + 30.0).matrix();
  CHECK(maxAbs(normalizeSignal(affine).v - z.v) < 1e-12);
  CHECK(maxAbs(normalizeSignal(z).v - z.v) < 1e-12);

  const SignalSeries mm = normalizeSignal(s, Normalization::MinMax);
  for (Eigen::Index c = 0; c < 3; ++c) {
    CHECK(mm.v.col(c).minCoeff() == 0.0);
    CHECK(mm.v.col(c).maxCoeff() == doctest::Approx(1.0).epsilon(1e-15));
  }
  SignalSeries flat = s;
  flat.v.col(1).setConstant(4.0);
  CHECK(codeOf([&] { normalizeSignal(flat); }) == ErrorCode::ZeroVariance);
  CHECK(codeOf([&] { normalizeSignal(flat, Normalization::MinMax); }) == ErrorCode::ZeroVariance);
}

TEST_CASE("smoothing") {
  const auto t = uniformTimes(7, 1.0);
  const SignalSeries s = series(t, [](double x, int) { return x * x; });
  CHECK(smoothSignal(s, 1).v == s.v);
  const SignalSeries m = smoothSignal(s, 3);
  // The window shrinks symmetrically at the ends so no lag is introduced.
  CHECK(m.v(0, 0) == 0.0);
  CHECK(m.v(1, 0) == doctest::Approx((0.0 + 1.0 + 4.0) / 3.0));
  CHECK(m.v(3, 0) == doctest::Approx((4.0 + 9.0 + 16.0) / 3.0));
  CHECK(m.v(6, 0) == 36.0);
  CHECK(codeOf([&] { smoothSignal(s, 4); }) == ErrorCode::InvalidConfig);
  const SignalSeries c = series(t, [](double, int) { return 2.0; });
  CHECK(maxAbs(smoothSignal(c, 5).v - c.v) < 1e-15);
}

TEST_CASE("finite differences") {
  SUBCASE("constant series has zero acceleration") {
    const SignalSeries c = series(uniformTimes(20, 50.0), [](double, int) { return 3.0; });
    CHECK(maxAbs(finiteDiff(c, 2).v) < 1e-9);
    CHECK(maxAbs(finiteDiff(c, 1).v) < 1e-9);
  }
  SUBCASE("quadratics are differentiated exactly") {
    const double a = 3.7;
    const SignalSeries q = series(uniformTimes(40, 25.0, 0.3), [&](double x, int c) { return 0.5 * a * x * x + (c + 1) * x - 2.0; }, 2);
    const SignalSeries acc = finiteDiff(q, 2);
    const SignalSeries vel = finiteDiff(q, 1);
    CHECK(acc.units == "mm/s^2");
    CHECK(vel.units == "mm/s");
    for (Eigen::Index k = 0; k < acc.v.rows(); ++k) {
      for (Eigen::Index c = 0; c < 2; ++c) {
        REQUIRE(std::abs(acc.v(k, c) - a) <= 1e-9 * a);
        const double expected = a * q.t[static_cast<size_t>(k)] + static_cast<double>(c + 1);
        REQUIRE(std::abs(vel.v(k, c) - expected) <= 1e-9 * std::abs(expected));
      }
    }
  }
  SUBCASE("sine matches the analytic second derivative") {
    const double w = 2.0 * kPi;
    const SignalSeries s = series(uniformTimes(201, 100.0), [&](double x, int) { return std::sin(w * x); });
    const SignalSeries acc = finiteDiff(s, 2);
    double worst = 0.0;
    for (Eigen::Index k = 0; k < acc.v.rows(); ++k) {
      worst = std::max(worst, std::abs(acc.v(k, 0) + w * w * std::sin(w * s.t[static_cast<size_t>(k)])));
    }
    CHECK(worst < 0.05 * w * w);
  }
  SUBCASE("short series") {
    const SignalSeries two = series(uniformTimes(2, 10.0), [](double x, int) { return x; });
    CHECK(codeOf([&] { finiteDiff(two, 1); }) == ErrorCode::TooShort);
    CHECK(codeOf([&] { finiteDiff(two, 2); }) == ErrorCode::TooShort);
    const SignalSeries three = series(uniformTimes(3, 10.0), [](double x, int) { return x * x; });
    const SignalSeries acc = finiteDiff(three, 2);
    CHECK(maxAbs(acc.v - Eigen::MatrixXd::Constant(3, 1, 2.0)) < 1e-9);
    CHECK(codeOf([&] { finiteDiff(three, 3); }) == ErrorCode::InvalidConfig);
  }
}

TEST_CASE("imu to world") {
  const double g = 9.81;
  ImuSample still;
  still.aLocal = Vec3(0, 0, g);
  SignalSeries s = imuToWorld({still});
  CHECK(s.v.row(0).norm() == 0.0);
  CHECK(s.units == "m/s^2");

  ImuSample flipped;
  flipped.aLocal = Vec3(0, 0, -g);
  flipped.sensorToWorld = RotationMatrix::aboutX(kPi);
  CHECK(imuToWorld({flipped}).v.row(0).norm() < 1e-14);

  ImuSample falling;
  CHECK((imuToWorld({falling}).v.row(0) - Eigen::RowVector3d(0, 0, -g)).norm() == 0.0);

  // Linear in the local acceleration for a fixed rotation.
  std::mt19937_64 rng(1);
  const RotationMatrix r = randomRotation(rng);
  const Vec3 a(1.0, -2.0, 0.5);
  const Vec3 b(0.3, 4.0, -1.0);
  auto world = [&](const Vec3& v) {
    ImuSample x;
    x.aLocal = v;
    x.sensorToWorld = r;
    return Vec3(imuToWorld({x}, Vec3::Zero()).v.row(0).transpose());
  };
  CHECK((world(2.0 * a + 3.0 * b) - (2.0 * world(a) + 3.0 * world(b))).norm() < 1e-12);
  CHECK(codeOf([] { imuToWorld({}); }) == ErrorCode::EmptySequence);
}

TEST_CASE("signal comparison") {
  const auto t = uniformTimes(200, 50.0);
  const SignalSeries a = series(t, [](double x, int c) { return std::sin(2.3 * x + c) + 0.3 * std::cos(7.1 * x); }, 2);
  SUBCASE("identical") {
    const auto r = compareSignals(a, a);
    REQUIRE(r.channels.size() == 2);
    for (const auto& c : r.channels) {
      CHECK(c.pearson == doctest::Approx(1.0).epsilon(1e-12));
      CHECK(c.rmse < 1e-12);
      CHECK(c.lag == 0);
    }
    CHECK(r.samples == 200);
  }
  SUBCASE("negated") {
    SignalSeries b = a;
    b.v = -a.v;
    CHECK(compareSignals(a, b).channels[0].pearson == doctest::Approx(-1.0).epsilon(1e-12));
  }
  SUBCASE("shifted copy") {
    for (int k : {-7, -1, 3, 12}) {
      // b[n] = a[n - k].
      auto f = [](double x, int c) { return std::sin(2.3 * x + c) + 0.3 * std::cos(7.1 * x); };
      const SignalSeries b = series(t, [&](double x, int c) { return f(x - k * 0.02, c); }, 2);
      const auto r = compareSignals(a, b);
      CHECK(r.channels[0].lag == k);
      CHECK(r.channels[1].lag == k);
      CHECK(r.channels[0].lagSeconds == doctest::Approx(k * 0.02).epsilon(1e-9));
    }
  }
  SUBCASE("different rates are resampled onto the coarser grid") {
    const SignalSeries fine = series(uniformTimes(400, 100.0), [](double x, int c) { return 2.0 * x + c; }, 2);
    const SignalSeries coarse = series(uniformTimes(100, 25.0), [](double x, int c) { return -x + c; }, 2);
    const auto r = compareSignals(fine, coarse);
    CHECK(r.dt == doctest::Approx(0.04).epsilon(1e-12));
    CHECK(r.channels[0].pearson == doctest::Approx(-1.0).epsilon(1e-12));
  }
  SUBCASE("errors") {
    const SignalSeries early = series(uniformTimes(10, 10.0), [](double x, int) { return x; });
    const SignalSeries late = series(uniformTimes(10, 10.0, 5.0), [](double x, int) { return x; });
    CHECK(codeOf([&] { compareSignals(early, late); }) == ErrorCode::TooShort);
    const SignalSeries one = series(t, [](double x, int) { return x; });
    CHECK(codeOf([&] { compareSignals(a, one); }) == ErrorCode::ShapeMismatch);
  }
  const auto j = toJson(compareSignals(a, a));
  CHECK(j["samples"] == 200);
  CHECK(j["channels"][0]["lag_samples"] == 0);
}

TEST_CASE("sequence canonicalisation") {
  MotionSpec m;
  m.frames = 40;
  m.seed = 3;
  const auto seq = generateMotionSequence(m);
  const Canonicalizer geo = geometricCanonicalizer();

  SUBCASE("already canonical input is unchanged") {
    const auto out = canonicalizeSequence(seq, geo);
    for (size_t k = 0; k < seq.size(); ++k) {
      REQUIRE(out.flags[k] == "ok");
      REQUIRE(maxAbs(out.poses[k].joints - seq[k].pose.joints) < 1e-9);
    }
  }
  SUBCASE("frame by frame definition and rotation invariance") {
    std::mt19937_64 rng(5);
    const auto moved = rotated(seq, randomRotation(rng));
    const auto out = canonicalizeSequence(moved, geo);
    for (size_t k = 0; k < seq.size(); ++k) {
      REQUIRE(maxAbs(out.poses[k].joints - geometricCanonicalize(centerAtPelvis(moved[k].pose)).pose.joints) == 0.0);
      REQUIRE(maxAbs(out.poses[k].joints - seq[k].pose.joints) < 1e-6);
    }
    const auto times = uniformTimes(seq.size(), m.fps);
    const auto ta = extractTrajectory(posesOf(seq), times, 16);
    const auto tb = extractTrajectory(out.poses, times, 16);
    CHECK(maxAbs(ta.v - tb.v) < 1e-6);
  }
  SUBCASE("failures are flagged and carried") {
    auto broken = seq;
    for (int j : {1, 4, 11, 14}) {
      broken[5].pose.setJoint(j, Vec3(0, 0, 0));
    }
    broken[9].flag = "ParseError";
    const auto out = canonicalizeSequence(broken, geo);
    CHECK(out.flags[5] == "DegenerateTorso");
    CHECK(out.flags[9] == "ParseError");
    CHECK(out.poses[5].joints == broken[5].pose.joints);
    CHECK(out.flags[6] == "ok");
  }
}

TEST_CASE("gap filling") {
  std::vector<Pose> poses;
  for (int k = 0; k < 12; ++k) {
    Pose p;
    p.joints.setConstant(static_cast<double>(k));
    poses.push_back(p);
  }
  const auto times = uniformTimes(12, 10.0);
  std::vector<std::string> flags(12, "ok");
  SUBCASE("short gap is interpolated") {
    flags[4] = flags[5] = "DegenerateTorso";
    poses[4].joints.setConstant(-100.0);
    const auto segs = fillGaps(poses, flags, times);
    REQUIRE(segs.size() == 1);
    CHECK(segs[0].poses.size() == 12);
    CHECK(segs[0].poses[4].joints(0, 0) == doctest::Approx(4.0).epsilon(1e-12));
    CHECK(segs[0].poses[5].joints(7, 2) == doctest::Approx(5.0).epsilon(1e-12));
  }
  SUBCASE("long gap splits") {
    flags[3] = flags[4] = flags[5] = flags[6] = "x";
    const auto segs = fillGaps(poses, flags, times);
    REQUIRE(segs.size() == 2);
    CHECK(segs[0].poses.size() == 3);
    CHECK(segs[1].firstFrame == 7);
    CHECK(segs[1].times.front() == times[7]);
  }
  SUBCASE("leading and trailing runs are dropped") {
    flags[0] = flags[11] = "x";
    const auto segs = fillGaps(poses, flags, times);
    REQUIRE(segs.size() == 1);
    CHECK(segs[0].firstFrame == 1);
    CHECK(segs[0].poses.size() == 10);
  }
}

TEST_CASE("signal csv round trip and errors") {
  SignalSeries s = series(uniformTimes(25, 30.0, 1.0 / 3.0), [](double x, int c) { return std::exp(x) / (c + 3.0); }, 3);
  s.meta["joint"] = "r_wrist";
  s.meta["quantity"] = "acceleration";
  std::ostringstream os;
  writeSignalCsv(os, s);
  const std::string text = os.str();
  CHECK(text.rfind("# posecanon-signal: 1\n", 0) == 0);
  std::istringstream is(text);
  const SignalSeries back = readSignalCsv(is);
  CHECK(back.t == s.t);
  CHECK(back.v == s.v);
  CHECK(back.units == s.units);
  CHECK(back.channels == s.channels);
  CHECK(back.meta == s.meta);

  SUBCASE("version") {
    std::string bad = text;
    bad.replace(bad.find("signal: 1"), 9, "signal: 4");
    std::istringstream b(bad);
    CHECK(codeOf([&] { readSignalCsv(b); }) == ErrorCode::VersionMismatch);
  }
  SUBCASE("bad row names its line") {
    std::string bad = text;
    const auto pos = bad.rfind('\n', bad.size() - 2);
    bad.insert(pos + 1, "0.5,abc,1,2\n");
    std::istringstream b(bad);
    const std::string msg = messageOf([&] { readSignalCsv(b); });
    CHECK(msg.find("ParseError") != std::string::npos);
    CHECK(msg.find("line") != std::string::npos);
  }
  SUBCASE("missing file") {
    CHECK(codeOf([] { readSignalCsv(std::filesystem::path("/nonexistent/s.csv")); }) == ErrorCode::IoError);
  }
}

TEST_CASE("svg plot") {
  const SignalSeries s = series(uniformTimes(30, 10.0), [](double x, int c) { return std::sin(x + c); }, 2);
  const std::string svg = renderSvgPlot({{"view <a>", s}, {"view b", s}}, "wrist & acc");
  CHECK(svg.find("<svg") != std::string::npos);
  CHECK(svg.find("</svg>") != std::string::npos);
  size_t lines = 0;
  for (size_t p = svg.find("<polyline"); p != std::string::npos; p = svg.find("<polyline", p + 1)) {
    ++lines;
  }
  CHECK(lines == 4);
  CHECK(svg.find("view &lt;a&gt;:c0") != std::string::npos);
  CHECK(svg.find("wrist &amp; acc") != std::string::npos);
  CHECK(svg == renderSvgPlot({{"view <a>", s}, {"view b", s}}, "wrist & acc"));
}
