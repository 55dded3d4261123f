#pragma once

#include "posecanon/geom3d.hpp"
#include "posecanon/metrics.hpp"
#include "posecanon/pose_io.hpp"

#include <Eigen/Dense>

#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace posecanon {

inline constexpr int kSignalFormatVersion = 1;

/// Uniformly sampled multichannel series: v has one row per sample.
struct SignalSeries {
  std::vector<double> t; // seconds
  Eigen::MatrixXd v;
  std::string units;
  std::vector<std::string> channels;
  std::map<std::string, std::string> meta;

  [[nodiscard]] size_t size() const {
    return t.size();
  }
  [[nodiscard]] double dt() const;

  /// Throws ShapeMismatch, NonFinite, or InvalidConfig for a non-increasing or
  /// non-uniform (spacing within relative 1e-9) time grid.
  void validate() const;
};

/// Uniform time grid t_k = t0 + k / rate.
std::vector<double> uniformTimes(size_t n, double rate, double t0 = 0.0);

/// Per-frame position of `joint`, channels x, y, z in mm. Throws
/// EmptySequence, ShapeMismatch when times and poses differ in length.
SignalSeries extractTrajectory(const std::vector<Pose>& poses, const std::vector<double>& times, int joint);

enum class Normalization { ZScore, MinMax };

/// Per channel: z-score (population std) or min-max to [0, 1]. Throws
/// ZeroVariance for a constant channel.
SignalSeries normalizeSignal(const SignalSeries& s, Normalization method = Normalization::ZScore);

/// Centred moving average of odd width `window`, shrinking at the ends.
/// window <= 1 returns the input.
SignalSeries smoothSignal(const SignalSeries& s, int window);

/// Central differences inside, second-order one-sided stencils at the ends;
/// length preserved. Order 1 needs 3 samples, order 2 needs 4 (3 falls back to
/// the single three-point stencil everywhere). Throws TooShort.
SignalSeries finiteDiff(const SignalSeries& s, int order);

struct ImuSample {
  Vec3 aLocal = Vec3::Zero(); // m/s^2
  RotationMatrix sensorToWorld;
  double t = 0.0;
};

/// a_world = R a_local - g_up per sample, channels ax, ay, az in m/s^2.
/// Throws EmptySequence.
SignalSeries imuToWorld(const std::vector<ImuSample>& samples, const Vec3& gUp = Vec3(0.0, 0.0, 9.81));

struct ChannelComparison {
  std::string channel;
  double pearson = 0.0;
  double rmse = 0.0; // between z-scored signals
  int lag = 0;       // samples; b[n] ~ a[n - lag]
  double lagSeconds = 0.0;
};

struct SignalComparison {
  size_t samples = 0;
  double dt = 0.0;
  std::vector<ChannelComparison> channels;
};

/// Resamples both series by linear interpolation onto the coarser grid over
/// their common support, then compares channel by channel. Lags are searched
/// over |k| <= n / 2 with at least 3 overlapping samples; ties go to the
/// smallest |k|, then to negative k. Throws TooShort, ShapeMismatch.
SignalComparison compareSignals(const SignalSeries& a, const SignalSeries& b);

nlohmann::json toJson(const SignalComparison& c);

struct SequenceCanonResult {
  std::vector<Pose> poses;        // input pose carried through for failed frames
  std::vector<std::string> flags; // "ok" or the error name
};

/// Canonicalises every frame independently. Frames flagged on input or that
/// throw are marked and keep their input pose.
SequenceCanonResult canonicalizeSequence(const std::vector<PoseRecord>& frames, const Canonicalizer& canonicalizer);

struct SequenceSegment {
  std::vector<Pose> poses;
  std::vector<double> times;
  size_t firstFrame = 0;
};

/// Linearly interpolates runs of at most `maxGap` flagged frames between good
/// neighbours; longer runs (and leading or trailing runs) split the sequence.
std::vector<SequenceSegment> fillGaps(const std::vector<Pose>& poses, const std::vector<std::string>& flags,
                                      const std::vector<double>& times, int maxGap = 3);

// Signal CSV:
//   # posecanon-signal: 1
//   # units: mm/s^2
//   # <key>: <value>      (further metadata)
//   t,<channel>,...
//   <rows>
void writeSignalCsv(std::ostream& os, const SignalSeries& s);
void writeSignalCsv(const std::filesystem::path& path, const SignalSeries& s);
/// Throws ParseError (with line number), VersionMismatch, IoError.
SignalSeries readSignalCsv(std::istream& is);
SignalSeries readSignalCsv(const std::filesystem::path& path);

struct PlotSeries {
  std::string label;
  SignalSeries series;
};

/// Static SVG overlay: one polyline per (series, channel), shared axes, legend.
std::string renderSvgPlot(const std::vector<PlotSeries>& series, const std::string& title = "");

} // namespace posecanon
