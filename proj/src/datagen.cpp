#include "posecanon/datagen.hpp"

#include "posecanon/error.hpp"
#include "posecanon/geocanon.hpp"
#include "posecanon/seeding.hpp"
#include "posecanon/text_format.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <fstream>
#include <numeric>
#include <sstream>

namespace posecanon {

namespace {

constexpr std::string_view kPairMagic = "#posecanon-pairs";
constexpr int kPairFields = 2 + 51 + 51 + 9 + 3;

// Salts keep the base-pose stream independent of the pair stream.
constexpr std::uint64_t kBaseSalt = 1;
constexpr std::uint64_t kSplitSalt = 2;
constexpr std::uint64_t kMotionSalt = 4;

const char* const kBoneKeys[] = {"hip", "thigh", "shin", "spine", "thorax", "neck", "head", "shoulder", "upper_arm", "forearm"};
const char* const kAngleKeys[] = {
    "hip_flexion",
    "hip_abduction",
    "knee_flexion",
    "spine_lean",
    "spine_side",
    "thorax_bend",
    "neck_bend",
    "head_bend",
    "torso_twist",
    "shoulder_elevation",
    "shoulder_flexion",
    "shoulder_abduction",
    "elbow_flexion"};

std::string lineError(size_t lineNo, const std::string& what) {
  return "line " + std::to_string(lineNo) + ": " + what;
}

using ChainAngles = std::map<std::string, double>;

double draw(std::mt19937_64& rng, const AngleRangeDeg& r) {
  if (r.high == r.low) {
    return degToRad(r.low);
  }
  std::uniform_real_distribution<double> dist(degToRad(r.low), degToRad(r.high));
  return dist(rng);
}

bool isLimbAngle(std::string_view key) {
  return key.starts_with("hip_") || key.starts_with("knee_") || key.starts_with("shoulder_") ||
      key.starts_with("elbow_");
}

// Limb angles get independent "r." and "l." entries; axial ones a single entry.
// Draw order is the fixed key order, right before left.
ChainAngles drawAngles(std::mt19937_64& rng, const BasePoseConfig& c) {
  ChainAngles a;
  for (const char* k : kAngleKeys) {
    if (isLimbAngle(k)) {
      a[std::string("r.") + k] = draw(rng, c.range(k));
      a[std::string("l.") + k] = draw(rng, c.range(k));
    } else {
      a[k] = draw(rng, c.range(k));
    }
  }
  return a;
}

// Unit direction from spherical offsets around `down`: `flex` tilts towards
// `forward`, `abd` towards `side`. The three axes must be orthonormal.
Vec3 limbDirection(const Vec3& down, const Vec3& forward, const Vec3& side, double flex, double abd) {
  return std::cos(flex) * std::cos(abd) * down + std::sin(flex) * std::cos(abd) * forward + std::sin(abd) * side;
}

Pose buildPose(const ChainAngles& a, const BasePoseConfig& c) {
  const JointLayout& layout = JointLayout::human36m();
  const Vec3 up = Vec3::UnitZ();
  const Vec3 forward = -Vec3::UnitX();
  const Vec3 right = Vec3::UnitY(); // lateral axis is the subject's left, -Y

  Pose p;
  auto put = [&](int joint, const Vec3& v) { p.setJoint(joint, v); };
  put(layout.pelvis, Vec3::Zero());

  // Legs.
  for (int side : {+1, -1}) {
    const int hip = side > 0 ? layout.rightHip : layout.leftHip;
    const int knee = side > 0 ? 2 : 5;
    const int ankle = side > 0 ? 3 : 6;
    const std::string pre = side > 0 ? "r." : "l.";
    const Vec3 out = side * right;
    const Vec3 hipPos = c.length("hip") * out;
    const double flex = a.at(pre + "hip_flexion");
    const double abd = a.at(pre + "hip_abduction");
    const Vec3 thigh = limbDirection(-up, forward, out, flex, abd);
    const double kneeFlex = a.at(pre + "knee_flexion");
    // Knee bends the shin backwards, about +Y.
    const Vec3 shin = RotationMatrix::axisAngle(Vec3::UnitY(), -kneeFlex).apply(thigh);
    put(hip, hipPos);
    put(knee, hipPos + c.length("thigh") * thigh);
    put(ankle, hipPos + c.length("thigh") * thigh + c.length("shin") * shin);
  }

  // Spine chain. Positive bends about +Y tilt towards +X (backwards).
  const double lean = a.at("spine_lean");
  const double sideBend = a.at("spine_side");
  const Vec3 spineDir = limbDirection(up, forward, right, lean, sideBend);
  const Vec3 thoraxDir = RotationMatrix::axisAngle(Vec3::UnitY(), -a.at("thorax_bend")).apply(spineDir);
  const Vec3 neckDir = RotationMatrix::axisAngle(Vec3::UnitY(), a.at("neck_bend")).apply(thoraxDir);
  const Vec3 headDir = RotationMatrix::axisAngle(Vec3::UnitY(), -a.at("head_bend")).apply(neckDir);
  const Vec3 spine = c.length("spine") * spineDir;
  const Vec3 thorax = spine + c.length("thorax") * thoraxDir;
  const Vec3 neck = thorax + c.length("neck") * neckDir;
  put(7, spine);
  put(8, thorax);
  put(9, neck);
  put(10, neck + c.length("head") * headDir);

  // Shoulder girdle and arms, twisted about the vertical.
  const RotationMatrix twist = RotationMatrix::aboutZ(a.at("torso_twist"));
  const Vec3 fwdT = twist.apply(forward);
  for (int side : {+1, -1}) {
    const int sho = side > 0 ? layout.rightShoulder : layout.leftShoulder;
    const int elbow = side > 0 ? 15 : 12;
    const int wrist = side > 0 ? 16 : 13;
    const std::string pre = side > 0 ? "r." : "l.";
    const Vec3 out = twist.apply(side * right);
    const double elev = a.at(pre + "shoulder_elevation");
    const Vec3 shoDir = std::cos(elev) * out + std::sin(elev) * up;
    const Vec3 shoPos = thorax + c.length("shoulder") * shoDir;
    const double flex = a.at(pre + "shoulder_flexion");
    const double abd = a.at(pre + "shoulder_abduction");
    const Vec3 upper = limbDirection(-up, fwdT, out, flex, abd);
    const double elbowFlex = a.at(pre + "elbow_flexion");
    const Vec3 fore = RotationMatrix::axisAngle(twist.apply(Vec3::UnitY()), -elbowFlex).apply(upper);
    put(sho, shoPos);
    put(elbow, shoPos + c.length("upper_arm") * upper);
    put(wrist, shoPos + c.length("upper_arm") * upper + c.length("forearm") * fore);
  }
  return p;
}

std::string boneKeyForEdge(int child) {
  switch (child) {
    case 1:
    case 4:
      return "hip";
    case 2:
    case 5:
      return "thigh";
    case 3:
    case 6:
      return "shin";
    case 7:
      return "spine";
    case 8:
      return "thorax";
    case 9:
      return "neck";
    case 10:
      return "head";
    case 11:
    case 14:
      return "shoulder";
    case 12:
    case 15:
      return "upper_arm";
    case 13:
    case 16:
      return "forearm";
    default:
      throw Error(ErrorCode::InvalidConfig, "no template bone for joint " + std::to_string(child));
  }
}

void writeSampleLine(std::ostream& os, const PosePairSample& s) {
  os << s.baseId << ' ' << s.seed;
  auto putPose = [&](const Pose& p) {
    for (int j = 0; j < kNumJoints; ++j) {
      for (int c = 0; c < 3; ++c) {
        os << ' ' << text::formatDouble(p.joints(j, c));
      }
    }
  };
  putPose(s.input);
  putPose(s.target);
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) {
      os << ' ' << text::formatDouble(s.rotation(r, c));
    }
  }
  os << ' ' << text::formatDouble(s.euler.yaw) << ' ' << text::formatDouble(s.euler.pitch) << ' '
     << text::formatDouble(s.euler.roll) << '\n';
}

std::string readFile(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) {
    throw Error(ErrorCode::IoError, "cannot open " + path.string());
  }
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

} // namespace

PosePairSample makePair(const Pose& canonical, std::mt19937_64& rng, const EulerRanges& ranges, std::int64_t baseId,
                        std::uint64_t seed) {
  const SampledRotation sr = sampleCameraRotation(rng, ranges);
  PosePairSample s;
  s.target = canonical;
  s.input = applyRotation(sr.rotation, canonical);
  s.rotation = sr.rotation;
  s.euler = sr.euler;
  s.baseId = baseId;
  s.seed = seed;
  return s;
}

BasePoseConfig BasePoseConfig::defaults() {
  BasePoseConfig c;
  c.boneLengths = {
      {"hip", 132.0},
      {"thigh", 442.0},
      {"shin", 454.0},
      {"spine", 233.0},
      {"thorax", 257.0},
      {"neck", 121.0},
      {"head", 115.0},
      {"shoulder", 151.0},
      {"upper_arm", 278.0},
      {"forearm", 251.0}};
  c.angles = {
      {"hip_flexion", {-25.0, 50.0}},
      {"hip_abduction", {0.0, 20.0}},
      {"knee_flexion", {5.0, 90.0}},
      {"spine_lean", {-5.0, 20.0}},
      {"spine_side", {-8.0, 8.0}},
      {"thorax_bend", {5.0, 25.0}},
      {"neck_bend", {5.0, 20.0}},
      {"head_bend", {5.0, 25.0}},
      {"torso_twist", {-20.0, 20.0}},
      {"shoulder_elevation", {-10.0, 10.0}},
      {"shoulder_flexion", {-40.0, 90.0}},
      {"shoulder_abduction", {5.0, 70.0}},
      {"elbow_flexion", {10.0, 120.0}}};
  return c;
}

void BasePoseConfig::validate() const {
  if (version != 1) {
    throw Error(ErrorCode::VersionMismatch, "base pose config version " + std::to_string(version));
  }
  for (const char* k : kBoneKeys) {
    const double l = length(k);
    if (!std::isfinite(l) || l <= 0.0) {
      throw Error(ErrorCode::InvalidConfig, std::string("bone length '") + k + "' must be positive");
    }
  }
  for (const char* k : kAngleKeys) {
    const auto& r = range(k);
    if (!std::isfinite(r.low) || !std::isfinite(r.high) || r.low > r.high) {
      throw Error(ErrorCode::InvalidConfig, std::string("angle range '") + k + "' is invalid");
    }
  }
}

double BasePoseConfig::length(const std::string& key) const {
  const auto it = boneLengths.find(key);
  if (it == boneLengths.end()) {
    throw Error(ErrorCode::InvalidConfig, "missing bone length '" + key + "'");
  }
  return it->second;
}

const AngleRangeDeg& BasePoseConfig::range(const std::string& key) const {
  const auto it = angles.find(key);
  if (it == angles.end()) {
    throw Error(ErrorCode::InvalidConfig, "missing angle range '" + key + "'");
  }
  return it->second;
}

void to_json(nlohmann::json& j, const BasePoseConfig& c) {
  j = nlohmann::json::object();
  j["version"] = c.version;
  j["bone_lengths_mm"] = c.boneLengths;
  nlohmann::json a = nlohmann::json::object();
  for (const auto& [k, r] : c.angles) {
    a[k] = {r.low, r.high};
  }
  j["angle_ranges_deg"] = a;
}

void from_json(const nlohmann::json& j, BasePoseConfig& c) {
  c = BasePoseConfig{};
  c.version = j.at("version").get<int>();
  c.boneLengths = j.at("bone_lengths_mm").get<std::map<std::string, double>>();
  for (const auto& [k, v] : j.at("angle_ranges_deg").items()) {
    if (!v.is_array() || v.size() != 2) {
      throw Error(ErrorCode::InvalidConfig, "angle range '" + k + "' must be [low, high]");
    }
    c.angles[k] = {v[0].get<double>(), v[1].get<double>()};
  }
}

BasePoseConfig loadBasePoseConfig(const std::filesystem::path& path) {
  BasePoseConfig c;
  try {
    c = nlohmann::json::parse(readFile(path)).get<BasePoseConfig>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseError, path.string() + ": " + e.what());
  }
  if (c.version != BasePoseConfig{}.version) {
    throw Error(ErrorCode::VersionMismatch,
                path.string() + ": base pose config version " + std::to_string(c.version) + " is not supported");
  }
  c.validate();
  return c;
}

std::vector<double> templateBoneLengths(const BasePoseConfig& config) {
  std::vector<double> out;
  for (const auto& e : JointLayout::human36m().edges()) {
    out.push_back(config.length(boneKeyForEdge(e.child)));
  }
  return out;
}

std::vector<Pose> generateBasePoses(int n, std::uint64_t seed, const BasePoseConfig& config) {
  if (n < 1) {
    throw Error(ErrorCode::InvalidConfig, "number of base poses must be at least 1");
  }
  config.validate();
  std::vector<Pose> out;
  out.reserve(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) {
    std::mt19937_64 rng(deriveSeed(seed, static_cast<std::uint64_t>(i), kBaseSalt));
    out.push_back(geometricCanonicalize(buildPose(drawAngles(rng, config), config)).pose);
  }
  return out;
}

std::vector<PoseRecord> generateMotionSequence(const MotionSpec& spec, const BasePoseConfig& config) {
  if (spec.frames < 1 || !(spec.fps > 0.0) || !std::isfinite(spec.fps) || !(spec.amplitude >= 0.0 && spec.amplitude <= 1.0)) {
    throw Error(ErrorCode::InvalidConfig, "motion needs frames >= 1, fps > 0 and amplitude in [0, 1]");
  }
  config.validate();
  struct Oscillator {
    double mid;
    double half;
    double freq;
    double phase;
  };
  std::mt19937_64 rng(deriveSeed(spec.seed, 0, kMotionSalt));
  std::uniform_real_distribution<double> freq(0.3, 1.2);
  std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
  std::map<std::string, Oscillator> osc;
  for (const auto& [key, unused] : drawAngles(rng, config)) {
    const std::string base = key.size() > 2 && key[1] == '.' ? key.substr(2) : key;
    const auto& r = config.range(base);
    const double mid = degToRad(0.5 * (r.low + r.high));
    const double half = degToRad(0.5 * (r.high - r.low));
    osc[key] = {mid, half, 0.0, 0.0};
  }
  for (auto& [key, o] : osc) {
    o.freq = freq(rng);
    o.phase = phase(rng);
  }

  std::vector<PoseRecord> out;
  out.reserve(static_cast<size_t>(spec.frames));
  for (int k = 0; k < spec.frames; ++k) {
    const double t = k / spec.fps;
    ChainAngles a;
    for (const auto& [key, o] : osc) {
      a[key] = o.mid + spec.amplitude * o.half * std::sin(2.0 * std::numbers::pi * o.freq * t + o.phase);
    }
    PoseRecord r;
    char id[32];
    std::snprintf(id, sizeof id, "f%05d", k);
    r.id = id;
    r.subject = "synthetic";
    r.frameTime = t;
    r.pose = geometricCanonicalize(buildPose(a, config)).pose;
    out.push_back(std::move(r));
  }
  return out;
}

void SplitSpec::validate() const {
  for (double f : {train, val, test}) {
    if (!std::isfinite(f) || f < 0.0 || f > 1.0) {
      throw Error(ErrorCode::InvalidSplit, "split fractions must lie in [0, 1]");
    }
  }
  if (std::abs(train + val + test - 1.0) > 1e-9) {
    throw Error(ErrorCode::InvalidSplit, "split fractions must sum to 1");
  }
}

void to_json(nlohmann::json& j, const EulerRanges& r) {
  // Degrees are rounded to 1e-9 so "30" does not come back as 29.999999999999996.
  auto deg = [](double rad) { return std::round(radToDeg(rad) * 1e9) / 1e9; };
  auto iv = [&](const AngleInterval& a) { return nlohmann::json::array({deg(a.low), deg(a.high)}); };
  j = nlohmann::json{
      {"yaw_core_deg", iv(r.yawCore)},
      {"yaw_core_weight", r.yawCoreWeight},
      {"yaw_full_deg", iv(r.yawFull)},
      {"pitch_deg", iv(r.pitch)},
      {"roll_deg", iv(r.roll)}};
}

void from_json(const nlohmann::json& j, EulerRanges& r) {
  r = EulerRanges::defaults();
  auto iv = [&](const char* key, AngleInterval& out) {
    if (j.contains(key)) {
      const auto& v = j.at(key);
      if (!v.is_array() || v.size() != 2) {
        throw Error(ErrorCode::InvalidRange, std::string(key) + " must be [low, high]");
      }
      out = {degToRad(v[0].get<double>()), degToRad(v[1].get<double>())};
    }
  };
  iv("yaw_core_deg", r.yawCore);
  iv("yaw_full_deg", r.yawFull);
  iv("pitch_deg", r.pitch);
  iv("roll_deg", r.roll);
  r.yawCoreWeight = j.value("yaw_core_weight", r.yawCoreWeight);
}

void to_json(nlohmann::json& j, const CorpusSpec& s) {
  j = nlohmann::json{
      {"bases", s.bases},
      {"pairs_per_base", s.pairsPerBase},
      {"seed", s.seed},
      {"split", {s.split.train, s.split.val, s.split.test}},
      {"ranges", s.ranges},
      {"generator", s.generator},
      {"jitter_mm", s.jitterMm}};
}

void from_json(const nlohmann::json& j, CorpusSpec& s) {
  s = CorpusSpec{};
  s.bases = j.value("bases", s.bases);
  s.pairsPerBase = j.value("pairs_per_base", s.pairsPerBase);
  s.seed = j.value("seed", s.seed);
  if (j.contains("split")) {
    const auto& v = j.at("split");
    if (!v.is_array() || v.size() != 3) {
      throw Error(ErrorCode::InvalidSplit, "split must be [train, val, test]");
    }
    s.split = {v[0].get<double>(), v[1].get<double>(), v[2].get<double>()};
  }
  if (j.contains("ranges")) {
    s.ranges = j.at("ranges").get<EulerRanges>();
  }
  if (j.contains("generator")) {
    s.generator = j.at("generator").get<BasePoseConfig>();
  }
  s.jitterMm = j.value("jitter_mm", s.jitterMm);
}

Corpus buildCorpus(const CorpusSpec& spec) {
  spec.split.validate();
  spec.ranges.validate();
  if (spec.bases < 1 || spec.pairsPerBase < 1) {
    throw Error(ErrorCode::InvalidConfig, "bases and pairs per base must be at least 1");
  }
  if (!std::isfinite(spec.jitterMm) || spec.jitterMm < 0.0) {
    throw Error(ErrorCode::InvalidConfig, "jitter must be nonnegative");
  }
  const std::vector<Pose> bases = generateBasePoses(spec.bases, spec.seed, spec.generator);

  std::vector<int> order(static_cast<size_t>(spec.bases));
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 splitRng(deriveSeed(spec.seed, 0, kSplitSalt));
  std::shuffle(order.begin(), order.end(), splitRng);
  const int nTrain = std::min(spec.bases, static_cast<int>(std::lround(spec.split.train * spec.bases)));
  const int nVal = std::min(spec.bases - nTrain, static_cast<int>(std::lround(spec.split.val * spec.bases)));
  std::vector<int> assignment(static_cast<size_t>(spec.bases));
  for (int k = 0; k < spec.bases; ++k) {
    assignment[static_cast<size_t>(order[static_cast<size_t>(k)])] = k < nTrain ? 0 : (k < nTrain + nVal ? 1 : 2);
  }

  Corpus corpus;
  for (int b = 0; b < spec.bases; ++b) {
    auto& dest = assignment[static_cast<size_t>(b)] == 0 ? corpus.train
        : assignment[static_cast<size_t>(b)] == 1        ? corpus.val
                                                         : corpus.test;
    for (int k = 0; k < spec.pairsPerBase; ++k) {
      const auto index = static_cast<std::uint64_t>(b) * static_cast<std::uint64_t>(spec.pairsPerBase) + static_cast<std::uint64_t>(k);
      const std::uint64_t seed = deriveSeed(spec.seed, index);
      std::mt19937_64 rng(seed);
      PosePairSample s = makePair(bases[static_cast<size_t>(b)], rng, spec.ranges, b, seed);
      if (spec.jitterMm > 0.0) {
        std::normal_distribution<double> noise(0.0, spec.jitterMm);
        for (int j = 0; j < kNumJoints; ++j) {
          for (int c = 0; c < 3; ++c) {
            s.input.joints(j, c) += noise(rng);
          }
        }
        s.input = centerAtPelvis(s.input);
      }
      dest.push_back(std::move(s));
    }
  }
  return corpus;
}

void writePairFile(std::ostream& os, const std::vector<PosePairSample>& samples, const CorpusSpec& spec) {
  os << kPairMagic << ' ' << kPairFormatVersion << '\n';
  os << "#joints";
  for (const auto& n : JointLayout::human36m().names()) {
    os << ' ' << n;
  }
  os << "\n#frame facing -1 0 0 up 0 0 1\n";
  os << "#seed " << spec.seed << '\n';
  os << "#ranges " << nlohmann::json(spec.ranges).dump() << '\n';
  os << "#fields base_id sample_seed in[51] target[51] rotation[9] yaw pitch roll\n";
  for (const auto& s : samples) {
    writeSampleLine(os, s);
  }
}

void writePairFile(const std::filesystem::path& path, const std::vector<PosePairSample>& samples, const CorpusSpec& spec) {
  std::ofstream os(path, std::ios::binary);
  if (!os) {
    throw Error(ErrorCode::IoError, "cannot open " + path.string() + " for writing");
  }
  writePairFile(os, samples, spec);
  if (!os) {
    throw Error(ErrorCode::IoError, "failed writing " + path.string());
  }
}

std::vector<PosePairSample> readPairFile(std::istream& is) {
  const JointLayout& layout = JointLayout::human36m();
  std::vector<int> columnToJoint(kNumJoints);
  std::iota(columnToJoint.begin(), columnToJoint.end(), 0);
  bool sawMagic = false;
  std::vector<PosePairSample> out;
  std::string line;
  size_t lineNo = 0;

  while (std::getline(is, line)) {
    ++lineNo;
    const auto tokens = text::splitWhitespace(line);
    if (tokens.empty()) {
      continue;
    }
    if (tokens[0] == kPairMagic) {
      if (tokens.size() != 2 || tokens[1] != std::to_string(kPairFormatVersion)) {
        throw Error(ErrorCode::VersionMismatch, lineError(lineNo, "unsupported pair format version"));
      }
      sawMagic = true;
      continue;
    }
    if (tokens[0] == "#joints") {
      if (tokens.size() != kNumJoints + 1) {
        throw Error(ErrorCode::ParseError, lineError(lineNo, "expected 17 joint names"));
      }
      std::vector<bool> seen(kNumJoints, false);
      for (int c = 0; c < kNumJoints; ++c) {
        const auto idx = layout.indexOf(std::string(tokens[static_cast<size_t>(c) + 1]));
        if (!idx) {
          throw Error(ErrorCode::UnknownJointName, lineError(lineNo, "unknown joint '" + std::string(tokens[static_cast<size_t>(c) + 1]) + "'"));
        }
        if (seen[static_cast<size_t>(*idx)]) {
          throw Error(ErrorCode::ParseError, lineError(lineNo, "duplicate joint name"));
        }
        seen[static_cast<size_t>(*idx)] = true;
        columnToJoint[static_cast<size_t>(c)] = *idx;
      }
      continue;
    }
    if (tokens[0].starts_with("#")) {
      continue;
    }
    if (!sawMagic) {
      throw Error(ErrorCode::VersionMismatch, lineError(lineNo, "missing pair file header"));
    }
    if (tokens.size() != kPairFields) {
      throw Error(ErrorCode::ParseError,
                  lineError(lineNo, "expected " + std::to_string(kPairFields) + " fields, got " + std::to_string(tokens.size())));
    }
    PosePairSample s;
    {
      long long base = 0;
      unsigned long long seed = 0;
      const auto b = std::from_chars(tokens[0].data(), tokens[0].data() + tokens[0].size(), base);
      const auto sd = std::from_chars(tokens[1].data(), tokens[1].data() + tokens[1].size(), seed);
      if (b.ec != std::errc() || b.ptr != tokens[0].data() + tokens[0].size() || sd.ec != std::errc() ||
          sd.ptr != tokens[1].data() + tokens[1].size()) {
        throw Error(ErrorCode::ParseError, lineError(lineNo, "bad base id or seed"));
      }
      s.baseId = base;
      s.seed = seed;
    }
    std::vector<double> v(kPairFields - 2);
    for (size_t k = 0; k < v.size(); ++k) {
      if (!text::parseDouble(tokens[k + 2], v[k])) {
        throw Error(ErrorCode::ParseError, lineError(lineNo, "bad number in field " + std::to_string(k + 3)));
      }
    }
    for (int c = 0; c < kNumJoints; ++c) {
      const int j = columnToJoint[static_cast<size_t>(c)];
      for (int d = 0; d < 3; ++d) {
        s.input.joints(j, d) = v[static_cast<size_t>(3 * c + d)];
        s.target.joints(j, d) = v[static_cast<size_t>(51 + 3 * c + d)];
      }
    }
    Mat3 r;
    for (int k = 0; k < 9; ++k) {
      r(k / 3, k % 3) = v[static_cast<size_t>(102 + k)];
    }
    try {
      s.rotation = RotationMatrix::fromMatrix(r);
    } catch (const Error& e) {
      throw Error(ErrorCode::ParseError, lineError(lineNo, std::string("invalid rotation: ") + e.what()));
    }
    s.euler = {v[111], v[112], v[113]};
    out.push_back(std::move(s));
  }
  if (!sawMagic) {
    throw Error(ErrorCode::VersionMismatch, "missing pair file header");
  }
  return out;
}

std::vector<PosePairSample> readPairFile(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) {
    throw Error(ErrorCode::IoError, "cannot open " + path.string());
  }
  try {
    return readPairFile(is);
  } catch (const Error& e) {
    throw Error(e.code(), path.string() + ": " + std::string(e.what()).substr(errorCodeName(e.code()).size() + 2));
  }
}

void writeCorpus(const std::filesystem::path& dir, const Corpus& corpus, const CorpusSpec& spec) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) {
    throw Error(ErrorCode::IoError, "cannot create " + dir.string() + ": " + ec.message());
  }
  writePairFile(dir / "train.txt", corpus.train, spec);
  writePairFile(dir / "val.txt", corpus.val, spec);
  writePairFile(dir / "test.txt", corpus.test, spec);
  nlohmann::json meta = spec;
  meta["format_version"] = kPairFormatVersion;
  meta["counts"] = {{"train", corpus.train.size()}, {"val", corpus.val.size()}, {"test", corpus.test.size()}};
  std::ofstream os(dir / "corpus.json", std::ios::binary);
  if (!os) {
    throw Error(ErrorCode::IoError, "cannot write corpus.json in " + dir.string());
  }
  os << meta.dump(2) << '\n';
}

Corpus readCorpus(const std::filesystem::path& dir) {
  Corpus c;
  c.train = readPairFile(dir / "train.txt");
  c.val = readPairFile(dir / "val.txt");
  c.test = readPairFile(dir / "test.txt");
  return c;
}

std::uint64_t corpusHash(const std::filesystem::path& dir) {
  std::uint64_t h = text::fnv1a("");
  for (const char* name : {"train.txt", "val.txt", "test.txt"}) {
    h = text::fnv1a(readFile(dir / name), h);
  }
  return h;
}

std::uint64_t samplesHash(const std::vector<PosePairSample>& samples) {
  std::ostringstream os;
  for (const auto& s : samples) {
    writeSampleLine(os, s);
  }
  return text::fnv1a(os.str());
}

std::vector<PoseRecord> loadExternalCorpus(const std::filesystem::path& path, const ExternalLoadOptions& opt) {
  std::vector<PoseRecord> records = readPoseCorpus(path);
  for (auto& r : records) {
    if (r.flag != "ok") {
      continue;
    }
    if (!r.pose.allFinite()) {
      r.flag = std::string(errorCodeName(ErrorCode::NonFinite));
      continue;
    }
    if (opt.center || opt.canonicalize) {
      r.pose = centerAtPelvis(r.pose);
    }
    if (opt.canonicalize) {
      try {
        r.pose = geometricCanonicalize(r.pose).pose;
      } catch (const Error& e) {
        r.flag = std::string(errorCodeName(e.code()));
      }
    }
  }
  return records;
}

} // namespace posecanon
