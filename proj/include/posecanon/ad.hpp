#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

// Minimal tape-based reverse-mode differentiation over dense 2-D arrays.
// Every value is a rows x cols matrix of doubles; scalars are 1 x 1. Batches
// are formed by recording several samples on the same tape.
namespace posecanon::ad {

using Matrix = Eigen::MatrixXd;

class Tape;

/// Handle to a node on a tape. Cheap to copy; valid while the tape lives.
class Var {
 public:
  Var() = default;

  [[nodiscard]] const Matrix& value() const;
  [[nodiscard]] const Matrix& grad() const;
  [[nodiscard]] Eigen::Index rows() const {
    return value().rows();
  }
  [[nodiscard]] Eigen::Index cols() const {
    return value().cols();
  }
  [[nodiscard]] double scalar() const;
  [[nodiscard]] int id() const {
    return id_;
  }
  [[nodiscard]] Tape* tape() const {
    return tape_;
  }
  [[nodiscard]] bool valid() const {
    return tape_ != nullptr;
  }

 private:
  friend class Tape;
  Var(Tape* tape, int id) : tape_(tape), id_(id) {}
  Tape* tape_ = nullptr;
  int id_ = -1;
};

class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, const Matrix& outGrad)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Differentiable input (parameter or data that needs a gradient).
  Var leaf(Matrix value);
  /// Input that never receives a gradient.
  Var constant(Matrix value);

  /// Records an op output. Throws NonFinite if `value` has NaN/Inf. `backward`
  /// may be empty for ops whose inputs need no gradient.
  Var record(Matrix value, std::span<const Var> inputs, BackwardFn backward, const char* op);
  Var record(Matrix value, std::initializer_list<Var> inputs, BackwardFn backward, const char* op) {
    return record(std::move(value), std::span<const Var>(inputs.begin(), inputs.size()), std::move(backward), op);
  }

  /// Reverse sweep from a 1 x 1 node. Gradients of every node are reset first;
  /// nodes not on a path to `loss` keep zero gradient. Throws NonFinite.
  void backward(const Var& loss);

  [[nodiscard]] const Matrix& value(int id) const {
    return nodes_[id].value;
  }
  [[nodiscard]] const Matrix& grad(int id) const;
  [[nodiscard]] bool requiresGrad(int id) const {
    return nodes_[id].requiresGrad;
  }
  void accumulate(int id, const Matrix& g);

  /// Set when a clamped op was evaluated close enough to its clamp boundary
  /// that finite differences are unreliable.
  void markNearNonSmooth() {
    nearNonSmooth_ = true;
  }
  [[nodiscard]] bool nearNonSmooth() const {
    return nearNonSmooth_;
  }

  [[nodiscard]] size_t size() const {
    return nodes_.size();
  }

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    BackwardFn backward;
    const char* op = "";
    bool requiresGrad = false;
  };
  std::vector<Node> nodes_;
  bool nearNonSmooth_ = false;
  bool gradsReady_ = false;
};

// ---- forward ops ----------------------------------------------------------

Var matmul(const Var& a, const Var& b);
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
/// a (n x m) + row (1 x m) broadcast over rows.
Var addRow(const Var& a, const Var& row);
/// a (n x m) * row (1 x m) elementwise, broadcast over rows.
Var mulRow(const Var& a, const Var& row);
Var mul(const Var& a, const Var& b);
Var scale(const Var& a, double s);
Var addScalar(const Var& a, double s);
/// a * s where s is a 1 x 1 node.
Var scaleBy(const Var& a, const Var& s);
/// a / s where s is a 1 x 1 node.
Var divBy(const Var& a, const Var& s);

Var softmaxRows(const Var& a);
Var relu(const Var& a);
/// tanh approximation: 0.5 x (1 + tanh(sqrt(2/pi) (x + 0.044715 x^3))).
Var gelu(const Var& a);
Var sigmoid(const Var& a);
Var sqrt(const Var& a);
/// Elementwise x^p for strictly positive x.
Var powElem(const Var& a, double p);
/// Zero-mean unit-variance per row (population variance + eps), no affine.
Var layerNormRows(const Var& a, double eps = 1e-5);

Var concatCols(std::span<const Var> parts);
Var concatCols(std::initializer_list<Var> parts);
Var concatRows(std::span<const Var> parts);
Var sliceCols(const Var& a, Eigen::Index start, Eigen::Index count);
Var sliceRows(const Var& a, Eigen::Index start, Eigen::Index count);
Var transpose(const Var& a);
/// Row-major reshape (element k of the flattened input is (k / cols, k % cols)).
Var reshape(const Var& a, Eigen::Index rows, Eigen::Index cols);

Var sum(const Var& a);
Var mean(const Var& a);
/// 1 x cols mean over rows.
Var meanRows(const Var& a);
Var sqnorm(const Var& a);
/// Rowwise dot products of two n x m arrays: n x 1.
Var dotRows(const Var& a, const Var& b);
/// arccos with the argument clamped to [-1 + eps, 1 - eps]; zero gradient
/// outside. Marks the tape when |x| > 1 - kNearClampMargin.
Var arccosClamped(const Var& a, double eps);
/// Rowwise cross product of n x 3 arrays.
Var cross3(const Var& a, const Var& b);

inline constexpr double kNearClampMargin = 1e-5;

// ---- gradient checking ----------------------------------------------------

struct NamedMatrix {
  std::string name;
  Matrix value;
};

struct GradCheckOptions {
  double step = 1e-4;
  double tol = 1e-4;
  /// Denominator floor for the relative error |a - n| / max(|a|, |n|, floor).
  double absFloor = 1e-6;
  /// 0 checks every element; otherwise a seeded random subset per parameter.
  size_t maxElementsPerParam = 0;
  std::uint64_t sampleSeed = 0;
};

struct GradCheckEntry {
  std::string name;
  double maxRelError = 0.0;
  size_t checked = 0;
  /// Elements where central differences at step and step/2 disagree, i.e. a
  /// kink (relu) lies within the stencil; the numeric oracle is undefined there.
  size_t skippedNonSmooth = 0;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> entries;
  bool skippedNearClamp = false;
  bool passed = false;
  double maxRelError = 0.0;
  size_t checked = 0;
  size_t skippedNonSmooth = 0;
};

using ScalarFn = std::function<Var(Tape&, std::span<const Var>)>;

/// Compares reverse-mode gradients of `f` at `params` with central
/// differences. `f` must be deterministic and return a 1 x 1 node.
GradCheckReport gradCheck(const ScalarFn& f, const std::vector<NamedMatrix>& params, const GradCheckOptions& opt = {});

} // namespace posecanon::ad
