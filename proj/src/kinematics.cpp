#include "posecanon/kinematics.hpp"

#include "posecanon/error.hpp"
#include "posecanon/text_format.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

namespace posecanon {

namespace {

constexpr double kUniformTol = 1e-9;

std::string lineError(size_t lineNo, const std::string& what) {
  return "line " + std::to_string(lineNo) + ": " + what;
}

SignalSeries like(const SignalSeries& s, Eigen::MatrixXd v, std::string units) {
  SignalSeries out;
  out.t = s.t;
  out.v = std::move(v);
  out.units = std::move(units);
  out.channels = s.channels;
  out.meta = s.meta;
  return out;
}

double mean(const Eigen::VectorXd& x) {
  return x.mean();
}

double populationStd(const Eigen::VectorXd& x) {
  const double m = x.mean();
  return std::sqrt((x.array() - m).square().mean());
}

double pearson(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  const Eigen::VectorXd da = a.array() - a.mean();
  const Eigen::VectorXd db = b.array() - b.mean();
  const double denom = std::sqrt(da.squaredNorm() * db.squaredNorm());
  if (!(denom > 0.0)) {
    throw Error(ErrorCode::ZeroVariance, "cannot correlate a constant channel");
  }
  return std::clamp(da.dot(db) / denom, -1.0, 1.0);
}

Eigen::VectorXd zscore(const Eigen::VectorXd& x) {
  const double sd = populationStd(x);
  if (!(sd > 0.0)) {
    throw Error(ErrorCode::ZeroVariance, "constant channel");
  }
  return (x.array() - mean(x)) / sd;
}

// Linear interpolation of column `c` at time `t` (t inside the support).
double interpolate(const SignalSeries& s, int c, double t) {
  const auto it = std::upper_bound(s.t.begin(), s.t.end(), t);
  if (it == s.t.begin()) {
    return s.v(0, c);
  }
  if (it == s.t.end()) {
    return s.v(static_cast<Eigen::Index>(s.size() - 1), c);
  }
  const auto hi = static_cast<Eigen::Index>(it - s.t.begin());
  const Eigen::Index lo = hi - 1;
  const double w = (t - s.t[static_cast<size_t>(lo)]) / (s.t[static_cast<size_t>(hi)] - s.t[static_cast<size_t>(lo)]);
  return (1.0 - w) * s.v(lo, c) + w * s.v(hi, c);
}

std::string xmlEscape(const std::string& s) {
  std::string out;
  for (char ch : s) {
    switch (ch) {
      case '&':
        out += "&amp;";
        break;
      case '<':
        out += "&lt;";
        break;
      case '>':
        out += "&gt;";
        break;
      case '"':
        out += "&quot;";
        break;
      default:
        out += ch;
    }
  }
  return out;
}

std::string fixed(double v, int digits) {
  std::ostringstream os;
  os.setf(std::ios::fixed);
  os.precision(digits);
  os << v;
  return os.str();
}

} // namespace

double SignalSeries::dt() const {
  if (t.size() < 2) {
    throw Error(ErrorCode::TooShort, "a single sample has no sample spacing");
  }
  return (t.back() - t.front()) / static_cast<double>(t.size() - 1);
}

void SignalSeries::validate() const {
  if (static_cast<size_t>(v.rows()) != t.size()) {
    throw Error(ErrorCode::ShapeMismatch, "time and value row counts differ");
  }
  if (static_cast<size_t>(v.cols()) != channels.size()) {
    throw Error(ErrorCode::ShapeMismatch, "channel names do not match value columns");
  }
  if (!v.allFinite()) {
    throw Error(ErrorCode::NonFinite, "signal contains non-finite values");
  }
  for (double x : t) {
    if (!std::isfinite(x)) {
      throw Error(ErrorCode::NonFinite, "non-finite sample time");
    }
  }
  if (t.size() >= 2) {
    const double step = dt();
    if (!(step > 0.0)) {
      throw Error(ErrorCode::InvalidConfig, "sample times must be strictly increasing");
    }
    for (size_t k = 1; k < t.size(); ++k) {
      if (std::abs((t[k] - t[k - 1]) / step - 1.0) > kUniformTol) {
        throw Error(ErrorCode::InvalidConfig, "sample times are not uniformly spaced");
      }
    }
  }
}

std::vector<double> uniformTimes(size_t n, double rate, double t0) {
  if (!(rate > 0.0)) {
    throw Error(ErrorCode::InvalidConfig, "sample rate must be positive");
  }
  std::vector<double> t(n);
  for (size_t k = 0; k < n; ++k) {
    t[k] = t0 + static_cast<double>(k) / rate;
  }
  return t;
}

SignalSeries extractTrajectory(const std::vector<Pose>& poses, const std::vector<double>& times, int joint) {
  if (poses.empty()) {
    throw Error(ErrorCode::EmptySequence, "no frames");
  }
  if (poses.size() != times.size()) {
    throw Error(ErrorCode::ShapeMismatch, "frame and time counts differ");
  }
  if (joint < 0 || joint >= kNumJoints) {
    throw Error(ErrorCode::InvalidConfig, "joint index out of range");
  }
  SignalSeries s;
  s.t = times;
  s.v.resize(static_cast<Eigen::Index>(poses.size()), 3);
  for (size_t k = 0; k < poses.size(); ++k) {
    s.v.row(static_cast<Eigen::Index>(k)) = poses[k].joints.row(joint);
  }
  s.units = "mm";
  s.channels = {"x", "y", "z"};
  s.meta["joint"] = JointLayout::human36m().names()[static_cast<size_t>(joint)];
  s.validate();
  return s;
}

SignalSeries normalizeSignal(const SignalSeries& s, Normalization method) {
  Eigen::MatrixXd v(s.v.rows(), s.v.cols());
  for (Eigen::Index c = 0; c < s.v.cols(); ++c) {
    const Eigen::VectorXd x = s.v.col(c);
    if (method == Normalization::ZScore) {
      v.col(c) = zscore(x);
    } else {
      const double lo = x.minCoeff();
      const double hi = x.maxCoeff();
      if (!(hi > lo)) {
        throw Error(ErrorCode::ZeroVariance, "constant channel " + s.channels[static_cast<size_t>(c)]);
      }
      v.col(c) = (x.array() - lo) / (hi - lo);
    }
  }
  SignalSeries out = like(s, std::move(v), "normalized");
  out.meta["normalization"] = method == Normalization::ZScore ? "zscore" : "minmax";
  return out;
}

SignalSeries smoothSignal(const SignalSeries& s, int window) {
  if (window <= 1) {
    return s;
  }
  if (window % 2 == 0) {
    throw Error(ErrorCode::InvalidConfig, "smoothing window must be odd");
  }
  const Eigen::Index n = s.v.rows();
  const Eigen::Index half = window / 2;
  Eigen::MatrixXd v(n, s.v.cols());
  for (Eigen::Index k = 0; k < n; ++k) {
    const Eigen::Index reach = std::min({half, k, n - 1 - k});
    v.row(k) = s.v.middleRows(k - reach, 2 * reach + 1).colwise().mean();
  }
  SignalSeries out = like(s, std::move(v), s.units);
  out.meta["smoothing_window"] = std::to_string(window);
  return out;
}

SignalSeries finiteDiff(const SignalSeries& s, int order) {
  if (order != 1 && order != 2) {
    throw Error(ErrorCode::InvalidConfig, "finite difference order must be 1 or 2");
  }
  const Eigen::Index n = s.v.rows();
  if (n < 3) {
    throw Error(ErrorCode::TooShort, "finite differences need at least 3 samples");
  }
  const double h = s.dt();
  const auto& v = s.v;
  Eigen::MatrixXd d(n, v.cols());
  if (order == 1) {
    for (Eigen::Index k = 1; k + 1 < n; ++k) {
      d.row(k) = (v.row(k + 1) - v.row(k - 1)) / (2.0 * h);
    }
    d.row(0) = (-3.0 * v.row(0) + 4.0 * v.row(1) - v.row(2)) / (2.0 * h);
    d.row(n - 1) = (3.0 * v.row(n - 1) - 4.0 * v.row(n - 2) + v.row(n - 3)) / (2.0 * h);
  } else {
    const double h2 = h * h;
    for (Eigen::Index k = 1; k + 1 < n; ++k) {
      d.row(k) = (v.row(k + 1) - 2.0 * v.row(k) + v.row(k - 1)) / h2;
    }
    if (n >= 4) {
      d.row(0) = (2.0 * v.row(0) - 5.0 * v.row(1) + 4.0 * v.row(2) - v.row(3)) / h2;
      d.row(n - 1) = (2.0 * v.row(n - 1) - 5.0 * v.row(n - 2) + 4.0 * v.row(n - 3) - v.row(n - 4)) / h2;
    } else {
      d.row(0) = d.row(1);
      d.row(n - 1) = d.row(1);
    }
  }
  const std::string units = s.units + (order == 1 ? "/s" : "/s^2");
  return like(s, std::move(d), units);
}

SignalSeries imuToWorld(const std::vector<ImuSample>& samples, const Vec3& gUp) {
  if (samples.empty()) {
    throw Error(ErrorCode::EmptySequence, "no IMU samples");
  }
  SignalSeries s;
  s.v.resize(static_cast<Eigen::Index>(samples.size()), 3);
  for (size_t k = 0; k < samples.size(); ++k) {
    s.t.push_back(samples[k].t);
    s.v.row(static_cast<Eigen::Index>(k)) = (samples[k].sensorToWorld.apply(samples[k].aLocal) - gUp).transpose();
  }
  s.units = "m/s^2";
  s.channels = {"ax", "ay", "az"};
  s.meta["frame"] = "world";
  return s;
}

SignalComparison compareSignals(const SignalSeries& a, const SignalSeries& b) {
  if (a.v.cols() != b.v.cols()) {
    throw Error(ErrorCode::ShapeMismatch, "signals have different channel counts");
  }
  if (a.size() < 3 || b.size() < 3) {
    throw Error(ErrorCode::TooShort, "comparison needs at least 3 samples per signal");
  }
  const double step = std::max(a.dt(), b.dt());
  const double start = std::max(a.t.front(), b.t.front());
  const double end = std::min(a.t.back(), b.t.back());
  if (!(end >= start)) {
    throw Error(ErrorCode::TooShort, "signals do not overlap in time");
  }
  const auto n = static_cast<Eigen::Index>(std::floor((end - start) / step + 1e-9)) + 1;
  if (n < 3) {
    throw Error(ErrorCode::TooShort, "overlap shorter than 3 samples");
  }

  SignalComparison out;
  out.samples = static_cast<size_t>(n);
  out.dt = step;
  for (Eigen::Index c = 0; c < a.v.cols(); ++c) {
    Eigen::VectorXd ra(n);
    Eigen::VectorXd rb(n);
    for (Eigen::Index k = 0; k < n; ++k) {
      const double t = start + static_cast<double>(k) * step;
      ra(k) = interpolate(a, static_cast<int>(c), t);
      rb(k) = interpolate(b, static_cast<int>(c), t);
    }
    ChannelComparison cc;
    cc.channel = c < static_cast<Eigen::Index>(a.channels.size()) ? a.channels[static_cast<size_t>(c)] : std::to_string(c);
    cc.pearson = pearson(ra, rb);
    const Eigen::VectorXd za = zscore(ra);
    const Eigen::VectorXd zb = zscore(rb);
    cc.rmse = std::sqrt((za - zb).squaredNorm() / static_cast<double>(n));

    const Eigen::Index maxLag = std::min<Eigen::Index>(n / 2, n - 3);
    double best = -2.0;
    Eigen::Index bestLag = 0;
    auto consider = [&](Eigen::Index k) {
      const Eigen::Index m = n - std::abs(k);
      const Eigen::VectorXd sa = k >= 0 ? za.head(m) : za.tail(m);
      const Eigen::VectorXd sb = k >= 0 ? zb.tail(m) : zb.head(m);
      const Eigen::VectorXd da = sa.array() - sa.mean();
      const Eigen::VectorXd db = sb.array() - sb.mean();
      const double denom = std::sqrt(da.squaredNorm() * db.squaredNorm());
      if (!(denom > 0.0)) {
        return;
      }
      const double r = da.dot(db) / denom;
      if (r > best) {
        best = r;
        bestLag = k;
      }
    };
    // Visit 0, -1, 1, -2, 2, ... so strict improvement implements the tie rule.
    consider(0);
    for (Eigen::Index k = 1; k <= maxLag; ++k) {
      consider(-k);
      consider(k);
    }
    cc.lag = static_cast<int>(bestLag);
    cc.lagSeconds = static_cast<double>(bestLag) * step;
    out.channels.push_back(cc);
  }
  return out;
}

nlohmann::json toJson(const SignalComparison& c) {
  nlohmann::json ch = nlohmann::json::array();
  for (const auto& x : c.channels) {
    ch.push_back({{"channel", x.channel},
                  {"pearson", x.pearson},
                  {"rmse_zscored", x.rmse},
                  {"lag_samples", x.lag},
                  {"lag_seconds", x.lagSeconds}});
  }
  return nlohmann::json{{"samples", c.samples}, {"dt_s", c.dt}, {"channels", ch}};
}

SequenceCanonResult canonicalizeSequence(const std::vector<PoseRecord>& frames, const Canonicalizer& canonicalizer) {
  SequenceCanonResult out;
  out.poses.reserve(frames.size());
  out.flags.reserve(frames.size());
  for (const auto& f : frames) {
    if (f.flag != "ok") {
      out.poses.push_back(f.pose);
      out.flags.push_back(f.flag);
      continue;
    }
    try {
      if (!f.pose.allFinite()) {
        throw Error(ErrorCode::NonFinite, "frame has non-finite joints");
      }
      out.poses.push_back(canonicalizer(centerAtPelvis(f.pose)).pose);
      out.flags.emplace_back("ok");
    } catch (const Error& e) {
      out.poses.push_back(f.pose);
      out.flags.emplace_back(errorCodeName(e.code()));
    }
  }
  return out;
}

std::vector<SequenceSegment> fillGaps(const std::vector<Pose>& poses, const std::vector<std::string>& flags,
                                      const std::vector<double>& times, int maxGap) {
  if (poses.size() != flags.size() || poses.size() != times.size()) {
    throw Error(ErrorCode::ShapeMismatch, "poses, flags and times differ in length");
  }
  std::vector<SequenceSegment> segments;
  const size_t n = poses.size();
  size_t i = 0;
  while (i < n && flags[i] != "ok") {
    ++i;
  }
  while (i < n) {
    SequenceSegment seg;
    seg.firstFrame = i;
    seg.poses.push_back(poses[i]);
    seg.times.push_back(times[i]);
    size_t last = i;
    size_t j = i + 1;
    while (j < n) {
      if (flags[j] == "ok") {
        seg.poses.push_back(poses[j]);
        seg.times.push_back(times[j]);
        last = j;
        ++j;
        continue;
      }
      size_t k = j;
      while (k < n && flags[k] != "ok") {
        ++k;
      }
      if (k == n || static_cast<int>(k - j) > maxGap) {
        break;
      }
      // Interpolate frames j..k-1 between last and k.
      for (size_t g = j; g < k; ++g) {
        const double w = (times[g] - times[last]) / (times[k] - times[last]);
        Pose p;
        p.joints = (1.0 - w) * poses[last].joints + w * poses[k].joints;
        seg.poses.push_back(p);
        seg.times.push_back(times[g]);
      }
      j = k;
    }
    segments.push_back(std::move(seg));
    i = j;
    while (i < n && flags[i] != "ok") {
      ++i;
    }
  }
  return segments;
}

void writeSignalCsv(std::ostream& os, const SignalSeries& s) {
  s.validate();
  os << "# posecanon-signal: " << kSignalFormatVersion << '\n';
  os << "# units: " << s.units << '\n';
  for (const auto& [k, v] : s.meta) {
    os << "# " << k << ": " << v << '\n';
  }
  os << 't';
  for (const auto& c : s.channels) {
    os << ',' << c;
  }
  os << '\n';
  for (size_t k = 0; k < s.size(); ++k) {
    os << text::formatDouble(s.t[k]);
    for (Eigen::Index c = 0; c < s.v.cols(); ++c) {
      os << ',' << text::formatDouble(s.v(static_cast<Eigen::Index>(k), c));
    }
    os << '\n';
  }
}

void writeSignalCsv(const std::filesystem::path& path, const SignalSeries& s) {
  std::ofstream os(path, std::ios::binary);
  if (!os) {
    throw Error(ErrorCode::IoError, "cannot write " + path.string());
  }
  writeSignalCsv(os, s);
}

SignalSeries readSignalCsv(std::istream& is) {
  SignalSeries s;
  bool sawVersion = false;
  bool sawHeader = false;
  std::vector<std::vector<double>> rows;
  std::string line;
  size_t lineNo = 0;
  while (std::getline(is, line)) {
    ++lineNo;
    const std::string trimmed = text::trim(line);
    if (trimmed.empty()) {
      continue;
    }
    if (trimmed[0] == '#') {
      const std::string body = text::trim(std::string_view(trimmed).substr(1));
      const auto colon = body.find(':');
      if (colon == std::string::npos) {
        continue;
      }
      const std::string key = text::trim(std::string_view(body).substr(0, colon));
      const std::string value = text::trim(std::string_view(body).substr(colon + 1));
      if (key == "posecanon-signal") {
        if (value != std::to_string(kSignalFormatVersion)) {
          throw Error(ErrorCode::VersionMismatch, lineError(lineNo, "unsupported signal format version " + value));
        }
        sawVersion = true;
      } else if (key == "units") {
        s.units = value;
      } else {
        s.meta[key] = value;
      }
      continue;
    }
    const auto fields = text::split(trimmed, ',');
    if (!sawHeader) {
      if (fields.empty() || text::trim(fields[0]) != "t") {
        throw Error(ErrorCode::ParseError, lineError(lineNo, "expected header starting with 't'"));
      }
      for (size_t k = 1; k < fields.size(); ++k) {
        s.channels.push_back(text::trim(fields[k]));
      }
      sawHeader = true;
      continue;
    }
    if (fields.size() != s.channels.size() + 1) {
      throw Error(ErrorCode::ParseError, lineError(lineNo, "expected " + std::to_string(s.channels.size() + 1) + " fields"));
    }
    std::vector<double> row(fields.size());
    for (size_t k = 0; k < fields.size(); ++k) {
      if (!text::parseDouble(text::trim(fields[k]), row[k])) {
        throw Error(ErrorCode::ParseError, lineError(lineNo, "bad number in column " + std::to_string(k + 1)));
      }
    }
    rows.push_back(std::move(row));
  }
  if (!sawVersion) {
    throw Error(ErrorCode::VersionMismatch, "missing '# posecanon-signal' line");
  }
  if (!sawHeader) {
    throw Error(ErrorCode::ParseError, "missing column header");
  }
  s.v.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(s.channels.size()));
  for (size_t r = 0; r < rows.size(); ++r) {
    s.t.push_back(rows[r][0]);
    for (size_t c = 0; c < s.channels.size(); ++c) {
      s.v(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c + 1];
    }
  }
  try {
    s.validate();
  } catch (const Error& e) {
    throw Error(ErrorCode::ParseError, e.what());
  }
  return s;
}

SignalSeries readSignalCsv(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) {
    throw Error(ErrorCode::IoError, "cannot open " + path.string());
  }
  return readSignalCsv(is);
}

std::string renderSvgPlot(const std::vector<PlotSeries>& series, const std::string& title) {
  constexpr double kWidth = 800.0;
  constexpr double kHeight = 420.0;
  constexpr double kLeft = 60.0;
  constexpr double kRight = 180.0;
  constexpr double kTop = 40.0;
  constexpr double kBottom = 50.0;
  static const char* const kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd",
                                         "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

  double tMin = std::numeric_limits<double>::infinity();
  double tMax = -tMin;
  double yMin = tMin;
  double yMax = -tMin;
  for (const auto& ps : series) {
    if (ps.series.size() == 0) {
      continue;
    }
    tMin = std::min(tMin, ps.series.t.front());
    tMax = std::max(tMax, ps.series.t.back());
    yMin = std::min(yMin, ps.series.v.minCoeff());
    yMax = std::max(yMax, ps.series.v.maxCoeff());
  }
  if (!std::isfinite(tMin)) {
    tMin = 0.0;
    tMax = 1.0;
    yMin = 0.0;
    yMax = 1.0;
  }
  if (tMax <= tMin) {
    tMax = tMin + 1.0;
  }
  if (yMax <= yMin) {
    yMin -= 0.5;
    yMax += 0.5;
  }
  const double plotW = kWidth - kLeft - kRight;
  const double plotH = kHeight - kTop - kBottom;
  auto px = [&](double t) { return kLeft + (t - tMin) / (tMax - tMin) * plotW; };
  auto py = [&](double y) { return kTop + (yMax - y) / (yMax - yMin) * plotH; };

  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
     << "\" viewBox=\"0 0 " << kWidth << ' ' << kHeight << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  if (!title.empty()) {
    os << "<text x=\"" << kLeft << "\" y=\"22\" font-size=\"15\">" << xmlEscape(title) << "</text>\n";
  }
  os << "<rect x=\"" << kLeft << "\" y=\"" << kTop << "\" width=\"" << plotW << "\" height=\"" << plotH
     << "\" fill=\"none\" stroke=\"#444\"/>\n";
  for (int k = 0; k <= 4; ++k) {
    const double t = tMin + (tMax - tMin) * k / 4.0;
    const double y = yMin + (yMax - yMin) * k / 4.0;
    os << "<text x=\"" << fixed(px(t), 1) << "\" y=\"" << fixed(kHeight - kBottom + 18, 1)
       << "\" text-anchor=\"middle\">" << fixed(t, 2) << "</text>\n";
    os << "<text x=\"" << fixed(kLeft - 6, 1) << "\" y=\"" << fixed(py(y) + 4, 1) << "\" text-anchor=\"end\">"
       << fixed(y, 2) << "</text>\n";
    os << "<line x1=\"" << kLeft << "\" x2=\"" << kLeft + plotW << "\" y1=\"" << fixed(py(y), 1) << "\" y2=\""
       << fixed(py(y), 1) << "\" stroke=\"#ddd\"/>\n";
  }
  os << "<text x=\"" << fixed(kLeft + plotW / 2, 1) << "\" y=\"" << kHeight - 10 << "\" text-anchor=\"middle\">t (s)</text>\n";

  size_t colour = 0;
  double legendY = kTop + 10;
  for (const auto& ps : series) {
    for (Eigen::Index c = 0; c < ps.series.v.cols(); ++c) {
      const char* stroke = kPalette[colour++ % std::size(kPalette)];
      os << "<polyline fill=\"none\" stroke=\"" << stroke << "\" stroke-width=\"1.5\" points=\"";
      for (size_t k = 0; k < ps.series.size(); ++k) {
        os << fixed(px(ps.series.t[k]), 2) << ',' << fixed(py(ps.series.v(static_cast<Eigen::Index>(k), c)), 2) << ' ';
      }
      os << "\"/>\n";
      std::string name = ps.label;
      if (ps.series.v.cols() > 1) {
        name += ":" + (c < static_cast<Eigen::Index>(ps.series.channels.size()) ? ps.series.channels[static_cast<size_t>(c)]
                                                                                  : std::to_string(c));
      }
      const double lx = kWidth - kRight + 15;
      os << "<line x1=\"" << lx << "\" x2=\"" << lx + 20 << "\" y1=\"" << legendY << "\" y2=\"" << legendY
         << "\" stroke=\"" << stroke << "\" stroke-width=\"2\"/>\n";
      os << "<text x=\"" << lx + 26 << "\" y=\"" << legendY + 4 << "\">" << xmlEscape(name) << "</text>\n";
      legendY += 18;
    }
  }
  os << "</svg>\n";
  return os.str();
}

} // namespace posecanon
