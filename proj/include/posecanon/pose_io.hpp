#pragma once

#include "posecanon/skeleton.hpp"

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace posecanon {

inline constexpr int kPoseFormatVersion = 1;

/// One line of a pose corpus file. `flag` is "ok" unless an upstream stage
/// failed on this record, in which case it carries the error code name.
struct PoseRecord {
  std::string id;
  std::optional<std::string> subject;
  std::optional<double> frameTime;
  std::string flag = "ok";
  Pose pose;
};

// Text container:
//   #posecanon-poses 1
//   #joints <17 names in the column order of the coordinate triples>
//   #fields id subject frame_time_s flag x0 y0 z0 ... x16 y16 z16
//   <id> <subject|-> <time|-> <flag> <51 numbers>
// Numbers use the shortest decimal form that round-trips bit-exactly.
void writePoseCorpus(std::ostream& os, const std::vector<PoseRecord>& records,
                     const JointLayout& layout = JointLayout::human36m());
void writePoseCorpus(const std::filesystem::path& path, const std::vector<PoseRecord>& records,
                     const JointLayout& layout = JointLayout::human36m());

/// Joint columns are remapped from the header order to `layout`. Throws
/// ParseError (with line number), UnknownJointName or VersionMismatch.
std::vector<PoseRecord> readPoseCorpus(std::istream& is,
                                       const JointLayout& layout = JointLayout::human36m());
std::vector<PoseRecord> readPoseCorpus(const std::filesystem::path& path,
                                       const JointLayout& layout = JointLayout::human36m());

} // namespace posecanon
