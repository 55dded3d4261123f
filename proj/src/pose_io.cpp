#include "posecanon/pose_io.hpp"

#include "posecanon/error.hpp"
#include "posecanon/text_format.hpp"

#include <fstream>
#include <istream>
#include <ostream>
#include <set>

namespace posecanon {

namespace {

constexpr std::string_view kMagic = "#posecanon-poses";

std::string lineError(size_t lineNo, const std::string& what) {
  return "line " + std::to_string(lineNo) + ": " + what;
}

} // namespace

void writePoseCorpus(std::ostream& os, const std::vector<PoseRecord>& records, const JointLayout& layout) {
  os << kMagic << ' ' << kPoseFormatVersion << '\n';
  os << "#joints";
  for (const auto& n : layout.names()) {
    os << ' ' << n;
  }
  os << "\n#fields id subject frame_time_s flag";
  for (int j = 0; j < kNumJoints; ++j) {
    os << " x" << j << " y" << j << " z" << j;
  }
  os << '\n';
  for (const auto& r : records) {
    if (r.id.empty() || r.id.find_first_of(" \t\n") != std::string::npos) {
      throw Error(ErrorCode::InvalidConfig, "record id must be a non-empty token");
    }
    os << r.id << ' ' << r.subject.value_or("-") << ' '
       << (r.frameTime ? text::formatDouble(*r.frameTime) : std::string("-")) << ' ' << r.flag;
    for (int j = 0; j < kNumJoints; ++j) {
      for (int c = 0; c < 3; ++c) {
        os << ' ' << text::formatDouble(r.pose.joints(j, c));
      }
    }
    os << '\n';
  }
}

void writePoseCorpus(const std::filesystem::path& path, const std::vector<PoseRecord>& records,
                     const JointLayout& layout) {
  std::ofstream os(path, std::ios::binary);
  if (!os) {
    throw Error(ErrorCode::IoError, "cannot open " + path.string() + " for writing");
  }
  writePoseCorpus(os, records, layout);
}

std::vector<PoseRecord> readPoseCorpus(std::istream& is, const JointLayout& layout) {
  std::string line;
  size_t lineNo = 0;
  std::vector<int> columnToJoint;
  bool sawMagic = false;
  std::vector<PoseRecord> out;

  while (std::getline(is, line)) {
    ++lineNo;
    if (line.empty()) {
      continue;
    }
    const auto tokens = text::splitWhitespace(line);
    if (tokens.empty()) {
      continue;
    }
    if (tokens[0] == kMagic) {
      if (tokens.size() != 2 || tokens[1] != std::to_string(kPoseFormatVersion)) {
        throw Error(ErrorCode::VersionMismatch, lineError(lineNo, "unsupported pose format version"));
      }
      sawMagic = true;
      continue;
    }
    if (tokens[0] == "#joints") {
      if (tokens.size() != kNumJoints + 1) {
        throw Error(ErrorCode::ParseError, lineError(lineNo, "joint header must list 17 names"));
      }
      columnToJoint.clear();
      std::set<int> seen;
      for (size_t k = 1; k < tokens.size(); ++k) {
        const auto idx = layout.indexOf(std::string(tokens[k]));
        if (!idx) {
          throw Error(ErrorCode::UnknownJointName, lineError(lineNo, "unknown joint '" + std::string(tokens[k]) + "'"));
        }
        if (!seen.insert(*idx).second) {
          throw Error(ErrorCode::ParseError, lineError(lineNo, "duplicate joint '" + std::string(tokens[k]) + "'"));
        }
        columnToJoint.push_back(*idx);
      }
      continue;
    }
    if (tokens[0].front() == '#') {
      continue;
    }
    if (!sawMagic) {
      throw Error(ErrorCode::ParseError, lineError(lineNo, "missing format header"));
    }
    if (columnToJoint.empty()) {
      throw Error(ErrorCode::ParseError, lineError(lineNo, "record before joint header"));
    }
    constexpr size_t kExpected = 4 + 3 * kNumJoints;
    if (tokens.size() != kExpected) {
      throw Error(
          ErrorCode::ParseError,
          lineError(lineNo, "expected " + std::to_string(kExpected) + " fields, got " + std::to_string(tokens.size())));
    }
    PoseRecord rec;
    rec.id = std::string(tokens[0]);
    if (tokens[1] != "-") {
      rec.subject = std::string(tokens[1]);
    }
    if (tokens[2] != "-") {
      double t = 0.0;
      if (!text::parseDouble(tokens[2], t)) {
        throw Error(ErrorCode::ParseError, lineError(lineNo, "bad frame time"));
      }
      rec.frameTime = t;
    }
    rec.flag = std::string(tokens[3]);
    for (int col = 0; col < kNumJoints; ++col) {
      for (int c = 0; c < 3; ++c) {
        double v = 0.0;
        if (!text::parseDouble(tokens[4 + 3 * col + c], v)) {
          throw Error(ErrorCode::ParseError, lineError(lineNo, "bad coordinate '" + std::string(tokens[4 + 3 * col + c]) + "'"));
        }
        rec.pose.joints(columnToJoint[col], c) = v;
      }
    }
    out.push_back(std::move(rec));
  }
  if (!sawMagic) {
    throw Error(ErrorCode::ParseError, "missing format header");
  }
  return out;
}

std::vector<PoseRecord> readPoseCorpus(const std::filesystem::path& path, const JointLayout& layout) {
  std::ifstream is(path, std::ios::binary);
  if (!is) {
    throw Error(ErrorCode::IoError, "cannot open " + path.string());
  }
  return readPoseCorpus(is, layout);
}

} // namespace posecanon
