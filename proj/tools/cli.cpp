#include "cli.hpp"

#include "posecanon/datagen.hpp"
#include "posecanon/error.hpp"
#include "posecanon/geocanon.hpp"
#include "posecanon/kinematics.hpp"
#include "posecanon/metrics.hpp"
#include "posecanon/pose_io.hpp"
#include "posecanon/text_format.hpp"
#include "posecanon/trainer.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <fstream>
#include <functional>
#include <iomanip>
#include <optional>
#include <ostream>

namespace posecanon::cli {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

constexpr const char* kProgramVersion = "0.1.0";

// Bad flag values detected by the CLI itself; the message names the flag.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

int exitCodeFor(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidRange:
    case ErrorCode::InvalidSplit:
    case ErrorCode::InvalidConfig:
    case ErrorCode::ConfigMismatch:
      return kExitUsage;
    case ErrorCode::ParseError:
    case ErrorCode::UnknownJointName:
    case ErrorCode::VersionMismatch:
    case ErrorCode::IoError:
      return kExitIo;
    default:
      return kExitNumerical;
  }
}

json readJsonFile(const fs::path& path) {
  std::ifstream is(path);
  if (!is) {
    throw Error(ErrorCode::IoError, "cannot open " + path.string());
  }
  try {
    return json::parse(is);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::ParseError, path.string() + ": " + e.what());
  }
}

void writeJsonFile(const fs::path& path, const json& j) {
  std::ofstream os(path);
  if (!os) {
    throw Error(ErrorCode::IoError, "cannot write " + path.string());
  }
  os << j.dump(2) << '\n';
}

void ensureParent(const fs::path& file) {
  if (file.has_parent_path()) {
    fs::create_directories(file.parent_path());
  }
}

std::vector<double> parseList(const std::string& flag, const std::string& value, size_t expected) {
  std::vector<double> out;
  for (auto field : text::split(value, ',')) {
    double v = 0.0;
    if (!text::parseDouble(text::trim(field), v)) {
      throw UsageError(flag + ": '" + value + "' is not a comma-separated list of numbers");
    }
    out.push_back(v);
  }
  if (out.size() != expected) {
    throw UsageError(flag + ": expected " + std::to_string(expected) + " comma-separated values");
  }
  return out;
}

// Rethrows a library validation error with the flag that caused it.
template <typename Fn>
void withFlag(const std::string& flag, Fn&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    if (exitCodeFor(e.code()) == kExitUsage) {
      throw UsageError(flag + ": " + e.what());
    }
    throw;
  }
}

std::string fmt(double v, int digits = 3) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(digits) << v;
  return os.str();
}

Canonicalizer makeCanonicalizer(const std::string& method, const std::string& checkpoint) {
  if (method == "geometric") {
    return geometricCanonicalizer();
  }
  if (method == "model") {
    if (checkpoint.empty()) {
      throw UsageError("--checkpoint: required for the model method");
    }
    return modelCanonicalizer(loadModel(checkpoint));
  }
  throw UsageError("--method: unknown method '" + method + "'");
}

// ---------------------------------------------------------------- gen-data

struct GenDataArgs {
  std::optional<int> bases;
  std::optional<int> pairs;
  std::optional<std::uint64_t> seed;
  std::string ranges;
  std::string generator;
  std::string split;
  std::optional<double> jitter;
  std::string config;
  std::string out;
};

int genData(const GenDataArgs& a, std::ostream& out) {
  json merged = CorpusSpec{};
  if (!a.config.empty()) {
    merged.merge_patch(readJsonFile(a.config));
  }
  CorpusSpec spec;
  withFlag("--config", [&] { spec = merged.get<CorpusSpec>(); });
  const bool seedInConfig = !a.config.empty() && readJsonFile(a.config).contains("seed");
  if (!a.seed && !seedInConfig) {
    throw UsageError("--seed: required");
  }
  if (a.seed) {
    spec.seed = *a.seed;
  }
  if (a.bases) {
    spec.bases = *a.bases;
  }
  if (a.pairs) {
    spec.pairsPerBase = *a.pairs;
  }
  if (a.jitter) {
    spec.jitterMm = *a.jitter;
  }
  if (!a.split.empty()) {
    const auto f = parseList("--split", a.split, 3);
    spec.split = {f[0], f[1], f[2]};
    withFlag("--split", [&] { spec.split.validate(); });
  }
  if (!a.ranges.empty()) {
    withFlag("--ranges", [&] {
      spec.ranges = readJsonFile(a.ranges).get<EulerRanges>();
      spec.ranges.validate();
    });
  }
  if (!a.generator.empty()) {
    withFlag("--generator", [&] { spec.generator = loadBasePoseConfig(a.generator); });
  }
  if (spec.bases < 1) {
    throw UsageError("--bases: must be at least 1");
  }
  if (spec.pairsPerBase < 1) {
    throw UsageError("--pairs: must be at least 1");
  }
  withFlag("--split", [&] { spec.split.validate(); });
  if (spec.jitterMm < 0.0) {
    throw UsageError("--jitter: must be non-negative");
  }

  const Corpus corpus = buildCorpus(spec);
  writeCorpus(a.out, corpus, spec);
  const size_t total = corpus.train.size() + corpus.val.size() + corpus.test.size();
  out << "corpus: " << total << " samples from " << spec.bases << " bases x " << spec.pairsPerBase
      << " pairs, seed " << spec.seed << '\n';
  out << "split: train " << corpus.train.size() << ", val " << corpus.val.size() << ", test "
      << corpus.test.size() << '\n';
  out << "ranges: " << json(spec.ranges).dump() << '\n';
  out << "hash: " << text::toHex(corpusHash(a.out)) << '\n';
  out << "wrote " << a.out << '\n';
  return kExitOk;
}

// ------------------------------------------------------------------- train

struct TrainArgs {
  std::string data;
  std::string config;
  std::string out;
  bool toy = false;
  std::string resume;
  std::optional<int> epochs;
  std::optional<int> batch;
  std::optional<double> lr;
  std::optional<std::uint64_t> seed;
  std::optional<int> stopAfter;
  int threads = 0;
};

TrainConfig effectiveTrainConfig(const TrainArgs& a, const TrainConfig& base, bool& seedGiven) {
  json merged = base;
  seedGiven = false;
  if (!a.config.empty()) {
    const json file = readJsonFile(a.config);
    seedGiven = file.contains("seed");
    merged.merge_patch(file);
  }
  TrainConfig c;
  withFlag("--config", [&] { c = merged.get<TrainConfig>(); });
  if (a.epochs) {
    c.epochs = *a.epochs;
  }
  if (a.batch) {
    c.batchSize = *a.batch;
  }
  if (a.lr) {
    c.baseLr = *a.lr;
  }
  if (a.seed) {
    c.seed = *a.seed;
    seedGiven = true;
  }
  withFlag("--config", [&] { c.validate(); });
  return c;
}

void printEpoch(std::ostream& out, const EpochRecord& r) {
  out << "epoch " << r.epoch << " lr " << std::setprecision(4) << r.lr << " loss " << fmt(r.loss.total, 5)
      << " (pose " << fmt(r.loss.pose, 5) << ", rot " << fmt(r.loss.rotation, 5) << ", cyc "
      << fmt(r.loss.cycle, 5) << ", perc " << fmt(r.loss.perceptual, 5) << ", reg "
      << fmt(r.loss.regularization, 5) << ")";
  if (r.evaluated) {
    out << " | val rot " << fmt(r.valRotationErrorDeg, 2) << " deg, mpjpe " << fmt(r.valMpjpe, 1) << " mm";
  }
  out << std::endl;
}

int trainCommand(const TrainArgs& a, std::ostream& out) {
  const Corpus corpus = readCorpus(a.data);
  TrainRunOptions options;
  options.outDir = a.out;
  options.stopAfterEpoch = a.stopAfter;
  options.threads = a.threads;
  options.onEpoch = [&](const EpochRecord& r) { printEpoch(out, r); };

  TrainResult result;
  if (!a.resume.empty()) {
    const Checkpoint ckpt = loadCheckpoint(a.resume);
    std::optional<TrainConfig> expected;
    if (!a.config.empty() || a.toy || a.epochs || a.batch || a.lr || a.seed) {
      bool seedGiven = false;
      expected = effectiveTrainConfig(a, a.toy ? TrainConfig::toy() : ckpt.config, seedGiven);
    }
    if (options.outDir.empty()) {
      options.outDir = fs::path(a.resume).parent_path();
    }
    out << "resuming from epoch " << ckpt.epoch << '\n';
    result = resume(a.resume, corpus.train, corpus.val, options, expected);
  } else {
    if (a.out.empty()) {
      throw UsageError("--out: required");
    }
    bool seedGiven = false;
    const TrainConfig config = effectiveTrainConfig(a, a.toy ? TrainConfig::toy() : TrainConfig::fullScale(), seedGiven);
    if (!seedGiven) {
      throw UsageError("--seed: required (flag or config file)");
    }
    out << "training " << corpus.train.size() << " train / " << corpus.val.size() << " val samples, "
        << config.epochs << " epochs, batch " << config.batchSize << ", seed " << config.seed << '\n';
    result = train(config, corpus.train, corpus.val, options);
  }
  if (result.bestEpoch >= 0) {
    const auto& best = result.log[static_cast<size_t>(result.bestEpoch)];
    out << "best epoch " << result.bestEpoch << ": val rot " << fmt(best.valRotationErrorDeg, 2) << " deg\n";
  }
  out << "wrote " << options.outDir.string() << '\n';
  return kExitOk;
}

// -------------------------------------------------------------------- eval

struct EvalArgs {
  std::string data;
  std::string split = "test";
  std::string method = "geometric";
  std::string checkpoint;
  std::string report;
};

int evalCommand(const EvalArgs& a, std::ostream& out) {
  const std::string method = a.checkpoint.empty() ? a.method : "model";
  const Canonicalizer canon = makeCanonicalizer(method, a.checkpoint);
  const Corpus corpus = readCorpus(a.data);
  const std::vector<PosePairSample>* samples = nullptr;
  if (a.split == "train") {
    samples = &corpus.train;
  } else if (a.split == "val") {
    samples = &corpus.val;
  } else if (a.split == "test") {
    samples = &corpus.test;
  } else {
    throw UsageError("--split: expected train, val or test");
  }
  const CorpusReport report = evaluateCorpus(canon, *samples, method);
  out << "method " << method << " on " << a.split << " (" << report.count << " samples, " << report.flagged
      << " flagged)\n";
  out << "rotation error: mean " << fmt(report.meanRotationErrorDeg, 4) << " deg, median "
      << fmt(report.medianRotationErrorDeg, 4) << " deg\n";
  out << "MPJPE " << fmt(report.meanMpjpe, 4) << " mm, PA-MPJPE " << fmt(report.meanPaMpjpe, 4)
      << " mm, input MPJPE " << fmt(report.meanInputMpjpe, 4) << " mm\n";
  if (!a.report.empty()) {
    ensureParent(a.report);
    writeReport(a.report, report);
    out << "wrote " << a.report << '\n';
  }
  return kExitOk;
}

// ------------------------------------------------------------ canonicalize

struct CanonArgs {
  std::string in;
  std::string method = "geometric";
  std::string checkpoint;
  std::string out;
};

int canonicalizeCommand(const CanonArgs& a, std::ostream& out) {
  const Canonicalizer canon = makeCanonicalizer(a.method, a.checkpoint);
  std::vector<PoseRecord> records = readPoseCorpus(a.in);
  const SequenceCanonResult result = canonicalizeSequence(records, canon);
  size_t flagged = 0;
  for (size_t k = 0; k < records.size(); ++k) {
    records[k].pose = result.poses[k];
    records[k].flag = result.flags[k];
    flagged += result.flags[k] != "ok" ? 1 : 0;
  }
  ensureParent(a.out);
  writePoseCorpus(a.out, records);
  out << "canonicalized " << records.size() - flagged << " of " << records.size() << " records (" << a.method
      << "), " << flagged << " flagged\n";
  out << "wrote " << a.out << '\n';
  return kExitOk;
}

// ----------------------------------------------------------------- signals

struct SignalsArgs {
  std::string in;
  std::string joint = "r_wrist";
  std::string canon = "geometric";
  std::string checkpoint;
  bool accel = false;
  int smooth = 1;
  std::string normalize = "z";
  double fps = 30.0;
  int maxGap = 3;
  std::string out;
};

fs::path segmentPath(const fs::path& out, size_t index) {
  if (index == 0) {
    return out;
  }
  fs::path p = out;
  p.replace_extension(".seg" + std::to_string(index) + out.extension().string());
  return p;
}

int signalsCommand(const SignalsArgs& a, std::ostream& out) {
  const auto joint = JointLayout::human36m().indexOf(a.joint);
  if (!joint) {
    throw UsageError("--joint: unknown joint '" + a.joint + "'");
  }
  if (a.smooth < 1 || a.smooth % 2 == 0) {
    throw UsageError("--smooth: window must be a positive odd number");
  }
  if (a.maxGap < 0) {
    throw UsageError("--max-gap: must be non-negative");
  }
  std::optional<Normalization> norm;
  if (a.normalize == "z") {
    norm = Normalization::ZScore;
  } else if (a.normalize == "minmax") {
    norm = Normalization::MinMax;
  } else if (a.normalize != "none") {
    throw UsageError("--normalize: expected z, minmax or none");
  }
  if (!(a.fps > 0.0)) {
    throw UsageError("--fps: must be positive");
  }

  const std::vector<PoseRecord> records = readPoseCorpus(a.in);
  if (records.empty()) {
    throw Error(ErrorCode::EmptySequence, a.in + " has no frames");
  }
  std::vector<double> times;
  const bool haveTimes = std::all_of(records.begin(), records.end(), [](const PoseRecord& r) { return r.frameTime.has_value(); });
  if (haveTimes) {
    for (const auto& r : records) {
      times.push_back(*r.frameTime);
    }
  } else {
    times = uniformTimes(records.size(), a.fps);
  }

  SequenceCanonResult seq;
  if (a.canon == "none") {
    for (const auto& r : records) {
      seq.poses.push_back(r.pose);
      seq.flags.push_back(r.flag);
    }
  } else {
    seq = canonicalizeSequence(records, makeCanonicalizer(a.canon, a.checkpoint));
  }
  const auto segments = fillGaps(seq.poses, seq.flags, times, a.maxGap);
  if (segments.empty()) {
    throw Error(ErrorCode::EmptySequence, "no frame survived canonicalisation");
  }
  for (size_t k = 0; k < segments.size(); ++k) {
    const auto& seg = segments[k];
    SignalSeries s = extractTrajectory(seg.poses, seg.times, *joint);
    s = smoothSignal(s, a.smooth);
    if (a.accel) {
      s = finiteDiff(s, 2);
    }
    if (norm) {
      s = normalizeSignal(s, *norm);
    }
    s.meta["source"] = fs::path(a.in).filename().string();
    s.meta["canonicalizer"] = a.canon;
    s.meta["quantity"] = a.accel ? "acceleration" : "position";
    s.meta["first_frame"] = std::to_string(seg.firstFrame);
    const fs::path path = segmentPath(a.out, k);
    ensureParent(path);
    writeSignalCsv(path, s);
    out << "wrote " << path.string() << " (" << s.size() << " samples, " << s.units << ")\n";
  }
  if (segments.size() > 1) {
    out << "sequence split into " << segments.size() << " segments at gaps longer than " << a.maxGap
        << " frames\n";
  }
  return kExitOk;
}

// -------------------------------------------------------- plot and compare

struct PlotArgs {
  std::vector<std::string> csv;
  std::vector<std::string> labels;
  std::string title;
  std::string out;
};

int plotCommand(const PlotArgs& a, std::ostream& out) {
  if (!a.labels.empty() && a.labels.size() != a.csv.size()) {
    throw UsageError("--label: give one label per --csv file");
  }
  std::vector<PlotSeries> series;
  for (size_t k = 0; k < a.csv.size(); ++k) {
    const std::string label = a.labels.empty() ? fs::path(a.csv[k]).stem().string() : a.labels[k];
    series.push_back({label, readSignalCsv(a.csv[k])});
  }
  ensureParent(a.out);
  std::ofstream os(a.out);
  if (!os) {
    throw Error(ErrorCode::IoError, "cannot write " + a.out);
  }
  os << renderSvgPlot(series, a.title);
  out << "wrote " << a.out << '\n';
  return kExitOk;
}

struct CompareArgs {
  std::string a;
  std::string b;
  std::string report;
};

int compareCommand(const CompareArgs& a, std::ostream& out) {
  const SignalSeries sa = readSignalCsv(a.a);
  const SignalSeries sb = readSignalCsv(a.b);
  const SignalComparison cmp = compareSignals(sa, sb);
  out << "compared " << cmp.samples << " samples at dt " << cmp.dt << " s\n";
  for (const auto& c : cmp.channels) {
    out << c.channel << ": pearson " << fmt(c.pearson, 6) << ", rmse " << fmt(c.rmse, 6) << ", lag " << c.lag
        << " (" << c.lagSeconds << " s)\n";
  }
  if (!a.report.empty()) {
    json j = toJson(cmp);
    j["a"] = a.a;
    j["b"] = a.b;
    ensureParent(a.report);
    writeJsonFile(a.report, j);
    out << "wrote " << a.report << '\n';
  }
  return kExitOk;
}

// -------------------------------------------------------------- gen-motion

struct MotionArgs {
  int frames = 120;
  double fps = 30.0;
  std::optional<std::uint64_t> seed;
  double amplitude = 0.4;
  std::string generator;
  std::string rotate;
  std::string out;
};

int genMotionCommand(const MotionArgs& a, std::ostream& out) {
  if (!a.seed) {
    throw UsageError("--seed: required");
  }
  if (a.frames < 1) {
    throw UsageError("--frames: must be at least 1");
  }
  if (!(a.fps > 0.0)) {
    throw UsageError("--fps: must be positive");
  }
  if (!(a.amplitude >= 0.0 && a.amplitude <= 1.0)) {
    throw UsageError("--amplitude: must lie in [0, 1]");
  }
  BasePoseConfig config = BasePoseConfig::defaults();
  if (!a.generator.empty()) {
    withFlag("--generator", [&] { config = loadBasePoseConfig(a.generator); });
  }
  MotionSpec spec;
  spec.frames = a.frames;
  spec.fps = a.fps;
  spec.seed = *a.seed;
  spec.amplitude = a.amplitude;
  std::vector<PoseRecord> records = generateMotionSequence(spec, config);
  if (!a.rotate.empty()) {
    const auto ypr = parseList("--rotate", a.rotate, 3);
    const RotationMatrix r = eulerToMatrix({degToRad(ypr[0]), degToRad(ypr[1]), degToRad(ypr[2])});
    for (auto& rec : records) {
      rec.pose = applyRotation(r, rec.pose);
    }
  }
  ensureParent(a.out);
  writePoseCorpus(a.out, records);
  out << "wrote " << records.size() << " frames to " << a.out << '\n';
  return kExitOk;
}

std::string versionText() {
  std::ostringstream os;
  os << "posecanon " << kProgramVersion << '\n'
     << "pose corpus format " << kPoseFormatVersion << '\n'
     << "pair file format " << kPairFormatVersion << '\n'
     << "checkpoint format " << kCheckpointFormatVersion << '\n'
     << "signal csv format " << kSignalFormatVersion << '\n'
     << "base pose config format 1";
  return os.str();
}

} // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"3D pose canonicalization toolkit", "posecanon"};
  app.set_version_flag("--version", versionText());
  app.require_subcommand(1);
  std::function<int()> action;

  GenDataArgs gd;
  auto* genCmd = app.add_subcommand("gen-data", "Generate a synthetic input/target pair corpus");
  genCmd->add_option("--bases", gd.bases, "Number of base poses");
  genCmd->add_option("--pairs", gd.pairs, "Rotated pairs per base pose");
  genCmd->add_option("--seed", gd.seed, "Corpus seed");
  genCmd->add_option("--ranges", gd.ranges, "Camera rotation ranges (JSON)");
  genCmd->add_option("--generator", gd.generator, "Base pose generator config (JSON)");
  genCmd->add_option("--split", gd.split, "Train,val,test fractions, e.g. 0.8,0.1,0.1");
  genCmd->add_option("--jitter", gd.jitter, "Gaussian noise on inputs (mm)");
  genCmd->add_option("--config", gd.config, "Corpus spec (JSON); flags take precedence");
  genCmd->add_option("--out", gd.out, "Output directory")->required();
  genCmd->callback([&] { action = [&] { return genData(gd, out); }; });

  TrainArgs tr;
  auto* trainCmd = app.add_subcommand("train", "Train the canonicalization network");
  trainCmd->add_option("--data", tr.data, "Corpus directory")->required();
  trainCmd->add_option("--config", tr.config, "Training config (JSON); flags take precedence");
  trainCmd->add_option("--out", tr.out, "Output directory");
  trainCmd->add_flag("--toy", tr.toy, "Start from the small desk-scale preset");
  trainCmd->add_option("--resume", tr.resume, "Continue from a checkpoint");
  trainCmd->add_option("--epochs", tr.epochs, "Epochs");
  trainCmd->add_option("--batch", tr.batch, "Batch size");
  trainCmd->add_option("--lr", tr.lr, "Base learning rate");
  trainCmd->add_option("--seed", tr.seed, "Initialisation and shuffle seed");
  trainCmd->add_option("--stop-after", tr.stopAfter, "Stop after this many epochs, leaving a resumable checkpoint");
  trainCmd->add_option("--threads", tr.threads, "Worker threads (results do not depend on it)");
  trainCmd->callback([&] { action = [&] { return trainCommand(tr, out); }; });

  EvalArgs ev;
  auto* evalCmd = app.add_subcommand("eval", "Evaluate a canonicalizer on a corpus split");
  evalCmd->add_option("--data", ev.data, "Corpus directory")->required();
  evalCmd->add_option("--split", ev.split, "train, val or test");
  evalCmd->add_option("--method", ev.method, "geometric or model");
  evalCmd->add_option("--checkpoint", ev.checkpoint, "Model checkpoint");
  evalCmd->add_option("--report", ev.report, "Per-sample report (TSV, plus .json summary)");
  evalCmd->callback([&] { action = [&] { return evalCommand(ev, out); }; });

  CanonArgs ca;
  auto* canonCmd = app.add_subcommand("canonicalize", "Canonicalize every record of a pose corpus");
  canonCmd->add_option("--in", ca.in, "Pose corpus")->required();
  canonCmd->add_option("--method", ca.method, "geometric or model");
  canonCmd->add_option("--checkpoint", ca.checkpoint, "Model checkpoint");
  canonCmd->add_option("--out", ca.out, "Output pose corpus")->required();
  canonCmd->callback([&] {
    if (!ca.checkpoint.empty()) {
      ca.method = "model";
    }
    action = [&] { return canonicalizeCommand(ca, out); };
  });

  SignalsArgs sg;
  auto* sigCmd = app.add_subcommand("signals", "Extract a joint trajectory or acceleration signal");
  sigCmd->add_option("--in", sg.in, "Pose sequence")->required();
  sigCmd->add_option("--joint", sg.joint, "Joint name");
  sigCmd->add_option("--canon", sg.canon, "geometric, model or none");
  sigCmd->add_option("--checkpoint", sg.checkpoint, "Model checkpoint");
  sigCmd->add_flag("--accel", sg.accel, "Second derivative instead of position");
  sigCmd->add_option("--smooth", sg.smooth, "Odd moving-average window applied before differentiation");
  sigCmd->add_option("--normalize", sg.normalize, "z, minmax or none");
  sigCmd->add_option("--fps", sg.fps, "Frame rate when the sequence carries no frame times");
  sigCmd->add_option("--max-gap", sg.maxGap, "Longest run of failed frames to interpolate");
  sigCmd->add_option("--out", sg.out, "Output signal CSV")->required();
  sigCmd->callback([&] {
    if (!sg.checkpoint.empty() && sg.canon == "geometric") {
      sg.canon = "model";
    }
    action = [&] { return signalsCommand(sg, out); };
  });

  PlotArgs pl;
  auto* plotCmd = app.add_subcommand("plot", "Overlay signal CSVs in an SVG plot");
  plotCmd->add_option("--csv", pl.csv, "Signal CSV files")->required();
  plotCmd->add_option("--label", pl.labels, "Legend label per file");
  plotCmd->add_option("--title", pl.title, "Plot title");
  plotCmd->add_option("--out", pl.out, "Output SVG")->required();
  plotCmd->callback([&] { action = [&] { return plotCommand(pl, out); }; });

  CompareArgs cp;
  auto* cmpCmd = app.add_subcommand("compare", "Correlate two signal CSVs");
  cmpCmd->add_option("--a", cp.a, "First signal CSV")->required();
  cmpCmd->add_option("--b", cp.b, "Second signal CSV")->required();
  cmpCmd->add_option("--report", cp.report, "JSON report");
  cmpCmd->callback([&] { action = [&] { return compareCommand(cp, out); }; });

  MotionArgs mo;
  auto* motionCmd = app.add_subcommand("gen-motion", "Generate a synthetic motion sequence");
  motionCmd->add_option("--frames", mo.frames, "Number of frames");
  motionCmd->add_option("--fps", mo.fps, "Frame rate");
  motionCmd->add_option("--seed", mo.seed, "Motion seed");
  motionCmd->add_option("--amplitude", mo.amplitude, "Fraction of each angle range swept");
  motionCmd->add_option("--generator", mo.generator, "Base pose generator config (JSON)");
  motionCmd->add_option("--rotate", mo.rotate, "Fixed camera rotation yaw,pitch,roll in degrees");
  motionCmd->add_option("--out", mo.out, "Output pose corpus")->required();
  motionCmd->callback([&] { action = [&] { return genMotionCommand(mo, out); }; });

  std::vector<const char*> argv{"posecanon"};
  for (const auto& a : args) {
    argv.push_back(a.c_str());
  }
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    return action ? action() : kExitUsage;
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return exitCodeFor(e.code());
  } catch (const json::parse_error& e) {
    err << "error: " << e.what() << '\n';
    return kExitIo;
  } catch (const json::exception& e) {
    err << "error: invalid config: " << e.what() << '\n';
    return kExitUsage;
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
    return kExitIo;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitIo;
  }
}

} // namespace posecanon::cli
