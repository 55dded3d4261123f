#pragma once

#include "posecanon/geom3d.hpp"
#include "posecanon/pose_io.hpp"
#include "posecanon/skeleton.hpp"

#include "json.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

namespace posecanon {

inline constexpr int kPairFormatVersion = 1;

/// input = rotation * target (per joint), both pelvis-centred.
struct PosePairSample {
  Pose input;
  Pose target;
  RotationMatrix rotation;
  EulerYPR euler;
  std::int64_t baseId = 0;
  std::uint64_t seed = 0;
};

/// Rotates a canonical pose by a sampled camera rotation. `canonical` is
/// expected to be pelvis-centred and geometric-canonical.
PosePairSample makePair(const Pose& canonical, std::mt19937_64& rng, const EulerRanges& ranges,
                        std::int64_t baseId = 0, std::uint64_t seed = 0);

struct AngleRangeDeg {
  double low = 0.0;
  double high = 0.0;
};

/// Kinematic-chain template: bone lengths in mm and joint-angle ranges in
/// degrees. Every range that bends a chain is bounded away from zero so no
/// joint is generated perfectly straight.
struct BasePoseConfig {
  int version = 1;
  std::map<std::string, double> boneLengths;
  std::map<std::string, AngleRangeDeg> angles;

  static BasePoseConfig defaults();
  /// Throws InvalidConfig on a missing key, non-positive length or bad range.
  void validate() const;
  [[nodiscard]] double length(const std::string& key) const;
  [[nodiscard]] const AngleRangeDeg& range(const std::string& key) const;
};

void to_json(nlohmann::json& j, const BasePoseConfig& c);
void from_json(const nlohmann::json& j, BasePoseConfig& c);

BasePoseConfig loadBasePoseConfig(const std::filesystem::path& path);

/// Template length of every bone, in the layout's edge order.
std::vector<double> templateBoneLengths(const BasePoseConfig& config);

/// `n` poses from the kinematic template, each geometric-canonicalised.
/// Throws InvalidConfig when n < 1.
std::vector<Pose> generateBasePoses(int n, std::uint64_t seed, const BasePoseConfig& config = BasePoseConfig::defaults());

struct MotionSpec {
  int frames = 120;
  double fps = 30.0;
  std::uint64_t seed = 0;
  /// Fraction of each angle range's half-width swept by the oscillation.
  double amplitude = 0.4;
};

/// Smooth synthetic motion: every chain angle oscillates sinusoidally about
/// the middle of its range with a seeded frequency in [0.3, 1.2] Hz and
/// phase. Frames are geometric-canonical and carry frame times k / fps.
std::vector<PoseRecord> generateMotionSequence(const MotionSpec& spec,
                                               const BasePoseConfig& config = BasePoseConfig::defaults());

struct SplitSpec {
  double train = 0.8;
  double val = 0.1;
  double test = 0.1;

  /// Throws InvalidSplit unless each fraction is in [0, 1] and they sum to 1
  /// within 1e-9.
  void validate() const;
};

struct CorpusSpec {
  int bases = 50;
  int pairsPerBase = 40;
  std::uint64_t seed = 0;
  SplitSpec split;
  EulerRanges ranges = EulerRanges::defaults();
  BasePoseConfig generator = BasePoseConfig::defaults();
  double jitterMm = 0.0; // isotropic Gaussian noise on inputs, off by default
};

void to_json(nlohmann::json& j, const CorpusSpec& s);
void from_json(const nlohmann::json& j, CorpusSpec& s);
void to_json(nlohmann::json& j, const EulerRanges& r);
void from_json(const nlohmann::json& j, EulerRanges& r);

struct Corpus {
  std::vector<PosePairSample> train;
  std::vector<PosePairSample> val;
  std::vector<PosePairSample> test;
};

/// Bases are assigned to splits by a seeded permutation; split sizes are
/// rounded base counts (test takes the remainder). Sample i of the corpus
/// (base-major order) draws from deriveSeed(seed, i).
Corpus buildCorpus(const CorpusSpec& spec);

// Pair file:
//   #posecanon-pairs 1
//   #joints <names>
//   #frame facing -1 0 0 up 0 0 1
//   #seed <corpus seed>
//   #ranges <json>
//   #fields base_id sample_seed in[51] target[51] rotation[9] yaw pitch roll
void writePairFile(std::ostream& os, const std::vector<PosePairSample>& samples, const CorpusSpec& spec);
void writePairFile(const std::filesystem::path& path, const std::vector<PosePairSample>& samples, const CorpusSpec& spec);
/// Throws VersionMismatch, ParseError (with line number), UnknownJointName.
std::vector<PosePairSample> readPairFile(std::istream& is);
std::vector<PosePairSample> readPairFile(const std::filesystem::path& path);

/// Writes train.txt, val.txt, test.txt and corpus.json into `dir`.
void writeCorpus(const std::filesystem::path& dir, const Corpus& corpus, const CorpusSpec& spec);
Corpus readCorpus(const std::filesystem::path& dir);

/// FNV-1a over the bytes of the three split files.
std::uint64_t corpusHash(const std::filesystem::path& dir);
/// FNV-1a over the serialised samples (same bytes as the file body).
std::uint64_t samplesHash(const std::vector<PosePairSample>& samples);

struct ExternalLoadOptions {
  bool center = true;
  bool canonicalize = false;
};

/// Reads a pose corpus, remaps joints, optionally centres and canonicalises.
/// Records that fail canonicalisation keep their pose and carry the error
/// name in `flag`.
std::vector<PoseRecord> loadExternalCorpus(const std::filesystem::path& path, const ExternalLoadOptions& opt = {});

} // namespace posecanon
