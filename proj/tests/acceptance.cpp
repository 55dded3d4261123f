// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
// exits nonzero if any fails.

#include "helpers.hpp"

#include "cli.hpp"
#include "posecanon/datagen.hpp"
#include "posecanon/geocanon.hpp"
#include "posecanon/kinematics.hpp"
#include "posecanon/metrics.hpp"
#include "posecanon/trainer.hpp"

#include <chrono>
#include <cstdio>
#include <iostream>
#include <sstream>

using namespace posecanon;
using namespace testutil;
using ad::Matrix;
using ad::Var;

namespace {

using Clock = std::chrono::steady_clock;

double secondsSince(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

// ---- 1 ----------------------------------------------------------------------

Outcome rotationMath() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(1);
  std::normal_distribution<double> n(0.0, 1.0);
  double orth = 0.0;
  double det = 0.0;
  double roundTrip = 0.0;
  double invariance = 0.0;
  for (int k = 0; k < 100000; ++k) {
    const Rot6D g{Vec3(n(rng), n(rng), n(rng)), Vec3(n(rng), n(rng), n(rng))};
    const RotationMatrix r = rotFrom6d(g);
    orth = std::max(orth, r.orthogonalityError());
    det = std::max(det, r.determinantError());
    roundTrip = std::max(roundTrip, maxAbs(rotFrom6d(Rot6D::fromRotation(r)).matrix() - r.matrix()));
    const RotationMatrix a = randomRotation(rng);
    const RotationMatrix b = randomRotation(rng);
    const RotationMatrix c = randomRotation(rng);
    invariance = std::max(invariance, std::abs(geodesicAngle(a, b) - geodesicAngle(compose(c, a), compose(c, b))));
  }
  const double secs = secondsSince(t0);
  Outcome o;
  o.pass = orth < 1e-9 && det < 1e-9 && roundTrip < 1e-9 && invariance < 1e-9 && secs < 10.0;
  o.detail = fmt("1e5 samples: orth %.2e, det %.2e, round trip %.2e, left-invariance %.2e (< 1e-9); %.1f s (< 10 s)",
                 orth, det, roundTrip, invariance, secs);
  return o;
}

// ---- 2 ----------------------------------------------------------------------

Outcome geometricOracle() {
  const auto t0 = Clock::now();
  CorpusSpec spec;
  spec.bases = 50;
  spec.pairsPerBase = 40;
  spec.seed = 2024;
  spec.split = {1.0, 0.0, 0.0};
  const auto samples = buildCorpus(spec).train;
  const CorpusReport r = evaluateCorpus(geometricCanonicalizer(), samples, "geometric");
  double maxPa = 0.0;
  for (const auto& row : r.rows) {
    maxPa = std::max(maxPa, row.paMpjpe);
  }
  const double secs = secondsSince(t0);
  Outcome o;
  o.pass = r.flagged == 0 && r.count == 2000 && r.meanRotationErrorDeg < 1e-6 && r.meanMpjpe < 1e-6 && maxPa < 1e-9 &&
      secs < 30.0;
  o.detail = fmt("%zu samples, %zu flagged: rotation %.2e deg (< 1e-6), MPJPE %.2e mm (< 1e-6), max PA-MPJPE %.2e mm "
                 "(< 1e-9); %.1f s (< 30 s)",
                 r.count, r.flagged, r.meanRotationErrorDeg, r.meanMpjpe, maxPa, secs);
  return o;
}

// ---- 3 ----------------------------------------------------------------------

Outcome gradients() {
  const auto t0 = Clock::now();
  CorpusSpec spec;
  spec.bases = 20;
  spec.pairsPerBase = 1;
  spec.seed = 77;
  spec.split = {1.0, 0.0, 0.0};
  const auto samples = buildCorpus(spec).train;
  const double scale = torsoScale(samples);
  const LossWeights weights;

  const char* termNames[] = {"total", "pose", "rotation", "cycle", "perceptual", "regularization"};
  double worst[6] = {};
  size_t checked = 0;
  size_t skipped = 0;
  size_t clampSkips = 0;
  bool allPassed = true;

  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    ModelParams params = ModelParams::initialize(ModelConfig::toy(), 1000 + seed);
    params.inputScale = scale;
    std::vector<ad::NamedMatrix> named;
    for (const auto& prm : params.list()) {
      named.push_back({prm.name, prm.value});
    }
    const PosePairSample& sample = samples[static_cast<size_t>(seed)];
    for (int term = 0; term < 6; ++term) {
      const ad::ScalarFn f = [&](ad::Tape& t, std::span<const Var> vars) {
        const model::BoundParams bound(t, params, vars);
        const losses::LossTerms terms = sampleLoss(bound, sample, params.inputScale, weights);
        switch (term) {
          case 1:
            return terms.pose;
          case 2:
            return terms.rotation;
          case 3:
            return terms.cycle;
          case 4:
            return terms.perceptual;
          case 5:
            return terms.regularization;
          default:
            return terms.total;
        }
      };
      ad::GradCheckOptions opt;
      opt.step = 1e-4;
      opt.tol = 1e-4;
      opt.maxElementsPerParam = term == 0 ? 6 : 2;
      opt.sampleSeed = seed * 10 + static_cast<std::uint64_t>(term);
      const auto rep = ad::gradCheck(f, named, opt);
      if (rep.skippedNearClamp && rep.checked == 0) {
        ++clampSkips;
        continue;
      }
      allPassed = allPassed && rep.passed;
      worst[term] = std::max(worst[term], rep.maxRelError);
      checked += rep.checked;
      skipped += rep.skippedNonSmooth;
      if (!rep.passed) {
        for (const auto& e : rep.entries) {
          if (e.maxRelError > opt.tol) {
            std::cout << "  seed " << seed << " " << termNames[term] << " " << e.name << " rel err " << e.maxRelError << "\n";
          }
        }
      }
    }
  }
  const double secs = secondsSince(t0);
  // Kinks of relu inside a stencil are excluded; require they stay rare.
  const bool fewSkips = skipped * 20 <= checked;
  Outcome o;
  o.pass = allPassed && fewSkips && clampSkips == 0 && checked > 0 && secs < 300.0;
  std::ostringstream d;
  d << "20 seeds, " << checked << " elements checked, " << skipped << " relu-kink skips, " << clampSkips
    << " clamp skips; max rel err";
  for (int k = 0; k < 6; ++k) {
    d << ' ' << termNames[k] << ' ' << fmt("%.1e", worst[k]);
  }
  d << " (< 1e-4, step 1e-4); " << fmt("%.0f s (< 300 s)", secs);
  o.detail = d.str();
  return o;
}

// ---- 4 and 5 ------------------------------------------------------------------

struct LearningRun {
  Outcome learning;
  Outcome arithmetic;
};

LearningRun learning() {
  const auto t0 = Clock::now();
  CorpusSpec spec;
  spec.bases = 100;
  spec.pairsPerBase = 20;
  spec.seed = 7;
  const Corpus corpus = buildCorpus(spec);

  TrainConfig cfg = TrainConfig::toy();
  cfg.seed = 7;
  cfg.batchSize = 8;
  const TrainResult res = train(cfg, corpus.train, corpus.val);

  ModelParams untrained = ModelParams::initialize(cfg.model, cfg.seed);
  untrained.inputScale = torsoScale(corpus.train);
  const CorpusReport before = evaluateCorpus(modelCanonicalizer(untrained), corpus.test, "untrained");
  const CorpusReport after = evaluateCorpus(modelCanonicalizer(res.best), corpus.test, "trained");
  const double secs = secondsSince(t0);

  LearningRun out;
  const double ratio = before.meanRotationErrorDeg / after.meanRotationErrorDeg;
  out.learning.pass = corpus.train.size() == 1600 && corpus.val.size() == 200 && after.flagged == 0 &&
      after.meanRotationErrorDeg < 10.0 && ratio >= 5.0 && after.meanMpjpe < after.meanInputMpjpe && secs < 1200.0;
  out.learning.detail = fmt("%zu/%zu/%zu pairs, %d epochs, batch %d, best epoch %d: held-out rotation %.2f deg (< 10), "
                            "untrained %.2f deg, reduction %.1fx (>= 5), MPJPE %.1f mm vs input %.1f mm; %.0f s (< 1200 s)",
                            corpus.train.size(), corpus.val.size(), corpus.test.size(), cfg.epochs, cfg.batchSize,
                            res.bestEpoch, after.meanRotationErrorDeg, before.meanRotationErrorDeg, ratio,
                            after.meanMpjpe, after.meanInputMpjpe, secs);

  double worst = 0.0;
  const LossWeights& w = cfg.weights;
  for (const auto& rec : res.log) {
    const auto& l = rec.loss;
    const double recomputed =
        w.pose * l.pose + w.rotation * l.rotation + 0.25 * l.cycle + 0.15 * l.perceptual + w.regularization * l.regularization;
    worst = std::max(worst, std::abs(l.total - recomputed));
  }
  out.arithmetic.pass = w.cycle == 0.25 && w.perceptual == 0.15 && res.log.size() == 31 && worst <= 1e-12;
  out.arithmetic.detail = fmt("%zu logged epochs, max |total - weighted sum| %.2e (<= 1e-12), weights %g %g %g %g %g",
                              res.log.size(), worst, w.pose, w.rotation, w.cycle, w.perceptual, w.regularization);
  return out;
}

// ---- 6 ----------------------------------------------------------------------

Outcome metricOrdering() {
  std::mt19937_64 rng(6);
  std::normal_distribution<double> noise(0.0, 25.0);
  std::uniform_real_distribution<double> shift(-1000.0, 1000.0);
  const auto bases = generateBasePoses(50, 6);
  size_t violations = 0;
  double worstGap = -std::numeric_limits<double>::infinity();
  double worstInv = 0.0;
  auto rigid = [&](const Pose& p) {
    Pose out = applyRotation(randomRotation(rng), p);
    out.joints.rowwise() += Eigen::RowVector3d(shift(rng), shift(rng), shift(rng));
    return out;
  };
  for (int k = 0; k < 1000; ++k) {
    const Pose& gt = bases[static_cast<size_t>(k % 50)];
    Pose pred = applyRotation(randomRotation(rng), gt);
    for (Eigen::Index i = 0; i < pred.joints.size(); ++i) {
      pred.joints(i) += noise(rng);
    }
    const double pa = paMpjpe(pred, gt);
    const double m = mpjpe(pred, gt);
    worstGap = std::max(worstGap, pa - m);
    if (pa > m) {
      ++violations;
    }
    worstInv = std::max(worstInv, std::abs(paMpjpe(rigid(pred), gt) - pa));
    worstInv = std::max(worstInv, std::abs(paMpjpe(pred, rigid(gt)) - pa));
  }
  Outcome o;
  o.pass = violations == 0 && worstInv < 1e-9;
  o.detail = fmt("1e3 pairs: %zu cases with PA-MPJPE > MPJPE (max PA - MPJPE %.1f mm), rigid invariance %.2e mm (< 1e-9)",
                 violations, worstGap, worstInv);
  return o;
}

// ---- 7 ----------------------------------------------------------------------

SignalSeries makeSeries(const std::vector<double>& t, const std::function<double(double)>& f) {
  SignalSeries s;
  s.t = t;
  s.v.resize(static_cast<Eigen::Index>(t.size()), 1);
  for (size_t k = 0; k < t.size(); ++k) {
    s.v(static_cast<Eigen::Index>(k), 0) = f(t[k]);
  }
  s.channels = {"v"};
  s.units = "mm";
  return s;
}

Outcome kinematicsExactness() {
  // Quadratic trajectories.
  double quadErr = 0.0;
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-5.0, 5.0);
  for (int k = 0; k < 100; ++k) {
    const double a = u(rng);
    const double b = u(rng);
    const double c = u(rng);
    const auto times = uniformTimes(50 + static_cast<size_t>(k), 10.0 + k, u(rng));
    const SignalSeries s = makeSeries(times, [&](double t) { return 0.5 * a * t * t + b * t + c; });
    const SignalSeries acc = finiteDiff(s, 2);
    for (Eigen::Index i = 1; i + 1 < acc.v.rows(); ++i) {
      quadErr = std::max(quadErr, std::abs(acc.v(i, 0) - a) / std::abs(a));
    }
  }
  // z-score idempotence.
  const SignalSeries raw = makeSeries(uniformTimes(300, 60.0), [](double t) { return std::exp(0.3 * t) * std::sin(5.0 * t); });
  const SignalSeries z = normalizeSignal(raw);
  const double idem = maxAbs(normalizeSignal(z).v - z.v);
  // Gravity cancellation.
  ImuSample still;
  still.aLocal = Vec3(0.0, 0.0, 9.81);
  const double gravity = imuToWorld({still}).v.cwiseAbs().maxCoeff();
  // Comparison.
  const auto t = uniformTimes(400, 100.0);
  auto f = [](double x) { return std::sin(3.1 * x) + 0.4 * std::sin(11.3 * x + 0.5); };
  const SignalSeries a = makeSeries(t, f);
  const auto same = compareSignals(a, a).channels[0];
  bool lagsOk = true;
  for (int k : {-9, -3, 1, 5, 17}) {
    const SignalSeries b = makeSeries(t, [&](double x) { return f(x - k * 0.01); });
    lagsOk = lagsOk && compareSignals(a, b).channels[0].lag == k;
  }
  Outcome o;
  o.pass = quadErr <= 1e-9 && idem <= 1e-12 && gravity == 0.0 && std::abs(same.pearson - 1.0) < 1e-12 && same.lag == 0 &&
      lagsOk;
  o.detail = fmt("quadratic acc rel err %.2e (<= 1e-9), z-score idempotence %.2e (<= 1e-12), gravity residual %.1e, "
                 "identical: r = %.15f lag %d, shifted lags %s",
                 quadErr, idem, gravity, same.pearson, same.lag, lagsOk ? "recovered" : "WRONG");
  return o;
}

// ---- 8 ----------------------------------------------------------------------

Outcome viewInvariance() {
  const auto t0 = Clock::now();
  MotionSpec m;
  m.frames = 150;
  m.fps = 30.0;
  m.seed = 8;
  const auto seq = generateMotionSequence(m);
  const EulerYPR views[] = {{0.0, 0.0, 0.0}, {degToRad(90.0), 0.0, 0.0}, {degToRad(-135.0), degToRad(20.0), degToRad(-10.0)},
                            {degToRad(45.0), degToRad(-30.0), degToRad(15.0)}, {degToRad(180.0), degToRad(10.0), degToRad(25.0)}};
  const int wrist = *JointLayout::human36m().indexOf("r_wrist");
  const auto times = uniformTimes(seq.size(), m.fps);
  std::vector<SignalSeries> signals;
  for (const auto& v : views) {
    auto frames = seq;
    const RotationMatrix r = eulerToMatrix(v);
    for (auto& f : frames) {
      f.pose = applyRotation(r, f.pose);
    }
    const SequenceCanonResult canon = canonicalizeSequence(frames, geometricCanonicalizer());
    signals.push_back(normalizeSignal(finiteDiff(extractTrajectory(canon.poses, times, wrist), 2)));
  }
  double worst = 1.0;
  for (size_t i = 0; i < signals.size(); ++i) {
    for (size_t j = i + 1; j < signals.size(); ++j) {
      for (const auto& c : compareSignals(signals[i], signals[j]).channels) {
        worst = std::min(worst, c.pearson);
      }
    }
  }
  const double secs = secondsSince(t0);
  Outcome o;
  o.pass = worst > 0.999 && secs < 60.0;
  o.detail = fmt("5 views x %d frames, normalized r_wrist acceleration: min pairwise Pearson %.12f (> 0.999); %.1f s (< 60 s)",
                 m.frames, worst, secs);
  return o;
}

// ---- 9 ----------------------------------------------------------------------

int cliRun(const std::vector<std::string>& args) {
  std::ostringstream out;
  std::ostringstream err;
  const int code = posecanon::cli::run(args, out, err);
  if (code != 0) {
    std::cout << "  command failed (" << code << "): " << err.str();
  }
  return code;
}

Outcome determinism() {
  TempDir dir("acceptance9");
  const auto d = [&](const std::string& s) { return (dir / s).string(); };
  bool ok = true;
  std::vector<std::string> mismatches;
  auto same = [&](const std::filesystem::path& a, const std::filesystem::path& b) {
    if (!std::filesystem::exists(a) || slurp(a) != slurp(b)) {
      ok = false;
      mismatches.push_back(b.filename().string());
    }
  };
  for (const char* out : {"data_a", "data_b"}) {
    ok = ok && cliRun({"gen-data", "--bases", "20", "--pairs", "5", "--seed", "99", "--out", d(out)}) == 0;
  }
  for (const char* f : {"train.txt", "val.txt", "test.txt", "corpus.json"}) {
    same(dir / "data_a" / f, dir / "data_b" / f);
  }
  const std::vector<std::string> trainArgs{"train", "--data", d("data_a"), "--toy", "--epochs", "4", "--batch", "8", "--seed", "5"};
  for (const char* out : {"run_a", "run_b"}) {
    auto args = trainArgs;
    args.insert(args.end(), {"--out", d(out)});
    ok = ok && cliRun(args) == 0;
  }
  auto split = trainArgs;
  split.insert(split.end(), {"--out", d("run_split"), "--stop-after", "2"});
  ok = ok && cliRun(split) == 0;
  ok = ok && cliRun({"train", "--data", d("data_a"), "--resume", d("run_split/last.ckpt.json")}) == 0;
  for (const char* f : {"train_log.jsonl", "last.ckpt.json", "best.ckpt.json", "config.json"}) {
    same(dir / "run_a" / f, dir / "run_b" / f);
    same(dir / "run_a" / f, dir / "run_split" / f);
  }
  Outcome o;
  o.pass = ok;
  o.detail = ok ? "gen-data x2, train x2 and stop-after-2 + resume: dataset files, logs and checkpoints byte-identical"
                : "mismatch in:";
  for (const auto& m : mismatches) {
    o.detail += " " + m;
  }
  return o;
}

} // namespace

int main() {
  int failures = 0;
  auto report = [&](int id, const char* name, const Outcome& o) {
    std::cout << "criterion " << id << " " << (o.pass ? "PASS" : "FAIL") << " " << name << ": " << o.detail << std::endl;
    failures += o.pass ? 0 : 1;
  };
  auto guarded = [](auto fn) {
    try {
      return fn();
    } catch (const std::exception& e) {
      Outcome o;
      o.detail = std::string("exception: ") + e.what();
      return o;
    }
  };
  report(1, "rotation math", guarded(rotationMath));
  report(2, "geometric oracle", guarded(geometricOracle));
  report(3, "gradient correctness", guarded(gradients));
  LearningRun run;
  try {
    run = learning();
  } catch (const std::exception& e) {
    run.learning.detail = run.arithmetic.detail = std::string("exception: ") + e.what();
  }
  report(4, "desk-scale learning", run.learning);
  report(5, "loss-weight arithmetic", run.arithmetic);
  report(6, "metric ordering", guarded(metricOrdering));
  report(7, "kinematics exactness", guarded(kinematicsExactness));
  report(8, "view invariance", guarded(viewInvariance));
  report(9, "determinism and persistence", guarded(determinism));
  std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed") << std::endl;
  return failures == 0 ? 0 : 1;
}
