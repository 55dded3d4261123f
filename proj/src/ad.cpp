#include "posecanon/ad.hpp"

#include "posecanon/error.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>

namespace posecanon::ad {

namespace {

std::string shapeStr(const Matrix& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

void requireSameShape(const Var& a, const Var& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw Error(ErrorCode::ShapeMismatch,
                std::string(op) + ": " + shapeStr(a.value()) + " vs " + shapeStr(b.value()));
  }
}

void requireScalar(const Var& s, const char* op) {
  if (s.rows() != 1 || s.cols() != 1) {
    throw Error(ErrorCode::ShapeMismatch, std::string(op) + ": expected 1x1, got " + shapeStr(s.value()));
  }
}

Tape& tapeOf(const Var& a) {
  if (!a.valid()) {
    throw Error(ErrorCode::ShapeMismatch, "use of an unbound variable");
  }
  return *a.tape();
}

Matrix scalarMatrix(double v) {
  Matrix m(1, 1);
  m(0, 0) = v;
  return m;
}

constexpr double kGeluC = 0.7978845608028654; // sqrt(2/pi)
constexpr double kGeluA = 0.044715;

} // namespace

const Matrix& Var::value() const {
  return tape_->value(id_);
}

const Matrix& Var::grad() const {
  return tape_->grad(id_);
}

double Var::scalar() const {
  const Matrix& v = value();
  if (v.size() != 1) {
    throw Error(ErrorCode::ShapeMismatch, "scalar() on " + shapeStr(v));
  }
  return v(0, 0);
}

Var Tape::leaf(Matrix value) {
  if (!value.allFinite()) {
    throw Error(ErrorCode::NonFinite, "leaf value");
  }
  nodes_.push_back(Node{std::move(value), {}, {}, "leaf", true});
  gradsReady_ = false;
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

Var Tape::constant(Matrix value) {
  if (!value.allFinite()) {
    throw Error(ErrorCode::NonFinite, "constant value");
  }
  nodes_.push_back(Node{std::move(value), {}, {}, "constant", false});
  gradsReady_ = false;
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

Var Tape::record(Matrix value, std::span<const Var> inputs, BackwardFn backward, const char* op) {
  if (!value.allFinite()) {
    throw Error(ErrorCode::NonFinite, std::string("forward op ") + op);
  }
  bool needs = false;
  for (const Var& v : inputs) {
    needs = needs || nodes_[v.id()].requiresGrad;
  }
  nodes_.push_back(Node{std::move(value), {}, needs ? std::move(backward) : BackwardFn{}, op, needs});
  gradsReady_ = false;
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

const Matrix& Tape::grad(int id) const {
  if (!gradsReady_) {
    throw Error(ErrorCode::ShapeMismatch, "gradient requested before backward()");
  }
  return nodes_[id].grad;
}

void Tape::accumulate(int id, const Matrix& g) {
  Node& n = nodes_[id];
  if (!n.requiresGrad) {
    return;
  }
  n.grad += g;
}

void Tape::backward(const Var& loss) {
  if (loss.tape() != this) {
    throw Error(ErrorCode::ShapeMismatch, "loss belongs to another tape");
  }
  requireScalar(loss, "backward");
  for (Node& n : nodes_) {
    n.grad = Matrix::Zero(n.value.rows(), n.value.cols());
  }
  gradsReady_ = true;
  nodes_[loss.id()].grad(0, 0) = 1.0;
  for (int id = loss.id(); id >= 0; --id) {
    Node& n = nodes_[id];
    if (!n.backward || !n.requiresGrad) {
      continue;
    }
    if (!n.grad.allFinite()) {
      throw Error(ErrorCode::NonFinite, std::string("gradient at op ") + n.op);
    }
    if (n.grad.isZero(0.0)) {
      continue;
    }
    // Backward callbacks only write to lower ids, so n.grad stays intact.
    n.backward(*this, n.grad);
  }
  for (const Node& n : nodes_) {
    if (!n.grad.allFinite()) {
      throw Error(ErrorCode::NonFinite, std::string("gradient at op ") + n.op);
    }
  }
}

// ---- ops ------------------------------------------------------------------

Var matmul(const Var& a, const Var& b) {
  if (a.cols() != b.rows()) {
    throw Error(ErrorCode::ShapeMismatch, "matmul: " + shapeStr(a.value()) + " * " + shapeStr(b.value()));
  }
  Tape& t = tapeOf(a);
  const int ia = a.id();
  const int ib = b.id();
  return t.record(
      a.value() * b.value(),
      {a, b},
      [ia, ib](Tape& tp, const Matrix& g) {
        if (tp.requiresGrad(ia)) {
          tp.accumulate(ia, g * tp.value(ib).transpose());
        }
        if (tp.requiresGrad(ib)) {
          tp.accumulate(ib, tp.value(ia).transpose() * g);
        }
      },
      "matmul");
}

Var add(const Var& a, const Var& b) {
  requireSameShape(a, b, "add");
  const int ia = a.id();
  const int ib = b.id();
  return tapeOf(a).record(
      a.value() + b.value(),
      {a, b},
      [ia, ib](Tape& tp, const Matrix& g) {
        tp.accumulate(ia, g);
        tp.accumulate(ib, g);
      },
      "add");
}

Var sub(const Var& a, const Var& b) {
  requireSameShape(a, b, "sub");
  const int ia = a.id();
  const int ib = b.id();
  return tapeOf(a).record(
      a.value() - b.value(),
      {a, b},
      [ia, ib](Tape& tp, const Matrix& g) {
        tp.accumulate(ia, g);
        tp.accumulate(ib, -g);
      },
      "sub");
}

Var addRow(const Var& a, const Var& row) {
  if (row.rows() != 1 || row.cols() != a.cols()) {
    throw Error(ErrorCode::ShapeMismatch, "addRow: " + shapeStr(a.value()) + " + " + shapeStr(row.value()));
  }
  const int ia = a.id();
  const int ir = row.id();
  Matrix out = a.value().rowwise() + row.value().row(0);
  return tapeOf(a).record(
      std::move(out),
      {a, row},
      [ia, ir](Tape& tp, const Matrix& g) {
        tp.accumulate(ia, g);
        tp.accumulate(ir, g.colwise().sum());
      },
      "addRow");
}

Var mulRow(const Var& a, const Var& row) {
  if (row.rows() != 1 || row.cols() != a.cols()) {
    throw Error(ErrorCode::ShapeMismatch, "mulRow: " + shapeStr(a.value()) + " * " + shapeStr(row.value()));
  }
  const int ia = a.id();
  const int ir = row.id();
  Matrix out = a.value().array().rowwise() * row.value().row(0).array();
  return tapeOf(a).record(
      std::move(out),
      {a, row},
      [ia, ir](Tape& tp, const Matrix& g) {
        if (tp.requiresGrad(ia)) {
          tp.accumulate(ia, (g.array().rowwise() * tp.value(ir).row(0).array()).matrix());
        }
        if (tp.requiresGrad(ir)) {
          tp.accumulate(ir, g.cwiseProduct(tp.value(ia)).colwise().sum());
        }
      },
      "mulRow");
}

Var mul(const Var& a, const Var& b) {
  requireSameShape(a, b, "mul");
  const int ia = a.id();
  const int ib = b.id();
  return tapeOf(a).record(
      a.value().cwiseProduct(b.value()),
      {a, b},
      [ia, ib](Tape& tp, const Matrix& g) {
        if (tp.requiresGrad(ia)) {
          tp.accumulate(ia, g.cwiseProduct(tp.value(ib)));
        }
        if (tp.requiresGrad(ib)) {
          tp.accumulate(ib, g.cwiseProduct(tp.value(ia)));
        }
      },
      "mul");
}

Var scale(const Var& a, double s) {
  const int ia = a.id();
  return tapeOf(a).record(
      a.value() * s, {a}, [ia, s](Tape& tp, const Matrix& g) { tp.accumulate(ia, g * s); }, "scale");
}

Var addScalar(const Var& a, double s) {
  const int ia = a.id();
  return tapeOf(a).record(
      (a.value().array() + s).matrix(), {a}, [ia](Tape& tp, const Matrix& g) { tp.accumulate(ia, g); }, "addScalar");
}

Var scaleBy(const Var& a, const Var& s) {
  requireScalar(s, "scaleBy");
  const int ia = a.id();
  const int is = s.id();
  return tapeOf(a).record(
      a.value() * s.scalar(),
      {a, s},
      [ia, is](Tape& tp, const Matrix& g) {
        const double sv = tp.value(is)(0, 0);
        if (tp.requiresGrad(ia)) {
          tp.accumulate(ia, g * sv);
        }
        if (tp.requiresGrad(is)) {
          tp.accumulate(is, scalarMatrix(g.cwiseProduct(tp.value(ia)).sum()));
        }
      },
      "scaleBy");
}

Var divBy(const Var& a, const Var& s) {
  requireScalar(s, "divBy");
  const int ia = a.id();
  const int is = s.id();
  return tapeOf(a).record(
      a.value() / s.scalar(),
      {a, s},
      [ia, is](Tape& tp, const Matrix& g) {
        const double sv = tp.value(is)(0, 0);
        if (tp.requiresGrad(ia)) {
          tp.accumulate(ia, g / sv);
        }
        if (tp.requiresGrad(is)) {
          tp.accumulate(is, scalarMatrix(-g.cwiseProduct(tp.value(ia)).sum() / (sv * sv)));
        }
      },
      "divBy");
}

Var softmaxRows(const Var& a) {
  Matrix y = a.value();
  for (Eigen::Index r = 0; r < y.rows(); ++r) {
    const double mx = y.row(r).maxCoeff();
    y.row(r) = (y.row(r).array() - mx).exp().matrix();
    y.row(r) /= y.row(r).sum();
  }
  const int ia = a.id();
  Tape& t = tapeOf(a);
  const int out = static_cast<int>(t.size());
  return t.record(
      std::move(y),
      {a},
      [ia, out](Tape& tp, const Matrix& g) {
        const Matrix& yv = tp.value(out);
        const Eigen::VectorXd dots = g.cwiseProduct(yv).rowwise().sum();
        tp.accumulate(ia, yv.cwiseProduct((g.colwise() - dots)));
      },
      "softmaxRows");
}

Var relu(const Var& a) {
  const int ia = a.id();
  return tapeOf(a).record(
      a.value().cwiseMax(0.0),
      {a},
      [ia](Tape& tp, const Matrix& g) {
        tp.accumulate(ia, (tp.value(ia).array() > 0.0).select(g, 0.0).matrix());
      },
      "relu");
}

Var gelu(const Var& a) {
  const Matrix& x = a.value();
  const Matrix u = (kGeluC * (x.array() + kGeluA * x.array().cube())).matrix();
  Matrix y = (0.5 * x.array() * (1.0 + u.array().tanh())).matrix();
  const int ia = a.id();
  return tapeOf(a).record(
      std::move(y),
      {a},
      [ia](Tape& tp, const Matrix& g) {
        const auto xv = tp.value(ia).array();
        const Eigen::ArrayXXd th = (kGeluC * (xv + kGeluA * xv.cube())).tanh();
        const Eigen::ArrayXXd d =
            0.5 * (1.0 + th) + 0.5 * xv * (1.0 - th.square()) * kGeluC * (1.0 + 3.0 * kGeluA * xv.square());
        tp.accumulate(ia, (g.array() * d).matrix());
      },
      "gelu");
}

Var sigmoid(const Var& a) {
  Matrix y = (1.0 / (1.0 + (-a.value().array()).exp())).matrix();
  const int ia = a.id();
  Tape& t = tapeOf(a);
  const int out = static_cast<int>(t.size());
  return t.record(
      std::move(y),
      {a},
      [ia, out](Tape& tp, const Matrix& g) {
        const auto yv = tp.value(out).array();
        tp.accumulate(ia, (g.array() * yv * (1.0 - yv)).matrix());
      },
      "sigmoid");
}

Var sqrt(const Var& a) {
  if ((a.value().array() < 0.0).any()) {
    throw Error(ErrorCode::NonFinite, "sqrt of negative value");
  }
  const int ia = a.id();
  Tape& t = tapeOf(a);
  const int out = static_cast<int>(t.size());
  return t.record(
      a.value().cwiseSqrt(),
      {a},
      [ia, out](Tape& tp, const Matrix& g) {
        tp.accumulate(ia, (0.5 * g.array() / tp.value(out).array()).matrix());
      },
      "sqrt");
}

Var powElem(const Var& a, double p) {
  if ((a.value().array() <= 0.0).any()) {
    throw Error(ErrorCode::NonFinite, "powElem of non-positive value");
  }
  const int ia = a.id();
  return tapeOf(a).record(
      a.value().array().pow(p).matrix(),
      {a},
      [ia, p](Tape& tp, const Matrix& g) {
        tp.accumulate(ia, (g.array() * p * tp.value(ia).array().pow(p - 1.0)).matrix());
      },
      "powElem");
}

Var layerNormRows(const Var& a, double eps) {
  const Matrix& x = a.value();
  const Eigen::Index n = x.cols();
  Matrix xhat(x.rows(), n);
  Eigen::VectorXd invStd(x.rows());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const double mu = x.row(r).mean();
    const double var = (x.row(r).array() - mu).square().mean();
    invStd(r) = 1.0 / std::sqrt(var + eps);
    xhat.row(r) = (x.row(r).array() - mu) * invStd(r);
  }
  const int ia = a.id();
  Tape& t = tapeOf(a);
  const int out = static_cast<int>(t.size());
  return t.record(
      std::move(xhat),
      {a},
      [ia, out, invStd](Tape& tp, const Matrix& g) {
        const Matrix& xh = tp.value(out);
        Matrix dx(g.rows(), g.cols());
        for (Eigen::Index r = 0; r < g.rows(); ++r) {
          const double gMean = g.row(r).mean();
          const double gxMean = g.row(r).cwiseProduct(xh.row(r)).mean();
          dx.row(r) = invStd(r) * (g.row(r).array() - gMean - xh.row(r).array() * gxMean);
        }
        tp.accumulate(ia, dx);
      },
      "layerNormRows");
}

Var concatCols(std::span<const Var> parts) {
  if (parts.empty()) {
    throw Error(ErrorCode::ShapeMismatch, "concatCols of nothing");
  }
  const Eigen::Index rows = parts[0].rows();
  Eigen::Index cols = 0;
  for (const Var& p : parts) {
    if (p.rows() != rows) {
      throw Error(ErrorCode::ShapeMismatch, "concatCols: row counts differ");
    }
    cols += p.cols();
  }
  Matrix out(rows, cols);
  std::vector<std::pair<int, Eigen::Index>> spans;
  Eigen::Index c = 0;
  for (const Var& p : parts) {
    out.middleCols(c, p.cols()) = p.value();
    spans.emplace_back(p.id(), c);
    c += p.cols();
  }
  Tape& t = tapeOf(parts[0]);
  return t.record(
      std::move(out),
      parts,
      [spans](Tape& tp, const Matrix& g) {
        for (const auto& [id, start] : spans) {
          tp.accumulate(id, g.middleCols(start, tp.value(id).cols()));
        }
      },
      "concatCols");
}

Var concatCols(std::initializer_list<Var> parts) {
  return concatCols(std::span<const Var>(parts.begin(), parts.size()));
}

Var concatRows(std::span<const Var> parts) {
  if (parts.empty()) {
    throw Error(ErrorCode::ShapeMismatch, "concatRows of nothing");
  }
  const Eigen::Index cols = parts[0].cols();
  Eigen::Index rows = 0;
  for (const Var& p : parts) {
    if (p.cols() != cols) {
      throw Error(ErrorCode::ShapeMismatch, "concatRows: column counts differ");
    }
    rows += p.rows();
  }
  Matrix out(rows, cols);
  std::vector<std::pair<int, Eigen::Index>> spans;
  Eigen::Index r = 0;
  for (const Var& p : parts) {
    out.middleRows(r, p.rows()) = p.value();
    spans.emplace_back(p.id(), r);
    r += p.rows();
  }
  return tapeOf(parts[0]).record(
      std::move(out),
      parts,
      [spans](Tape& tp, const Matrix& g) {
        for (const auto& [id, start] : spans) {
          tp.accumulate(id, g.middleRows(start, tp.value(id).rows()));
        }
      },
      "concatRows");
}

Var sliceCols(const Var& a, Eigen::Index start, Eigen::Index count) {
  if (start < 0 || count < 0 || start + count > a.cols()) {
    throw Error(ErrorCode::ShapeMismatch, "sliceCols out of range");
  }
  const int ia = a.id();
  return tapeOf(a).record(
      a.value().middleCols(start, count),
      {a},
      [ia, start, count](Tape& tp, const Matrix& g) {
        Matrix full = Matrix::Zero(tp.value(ia).rows(), tp.value(ia).cols());
        full.middleCols(start, count) = g;
        tp.accumulate(ia, full);
      },
      "sliceCols");
}

Var sliceRows(const Var& a, Eigen::Index start, Eigen::Index count) {
  if (start < 0 || count < 0 || start + count > a.rows()) {
    throw Error(ErrorCode::ShapeMismatch, "sliceRows out of range");
  }
  const int ia = a.id();
  return tapeOf(a).record(
      a.value().middleRows(start, count),
      {a},
      [ia, start, count](Tape& tp, const Matrix& g) {
        Matrix full = Matrix::Zero(tp.value(ia).rows(), tp.value(ia).cols());
        full.middleRows(start, count) = g;
        tp.accumulate(ia, full);
      },
      "sliceRows");
}

Var transpose(const Var& a) {
  const int ia = a.id();
  return tapeOf(a).record(
      a.value().transpose(), {a}, [ia](Tape& tp, const Matrix& g) { tp.accumulate(ia, g.transpose()); }, "transpose");
}

Var reshape(const Var& a, Eigen::Index rows, Eigen::Index cols) {
  if (rows * cols != a.value().size()) {
    throw Error(ErrorCode::ShapeMismatch, "reshape changes element count");
  }
  const Eigen::Index inCols = a.cols();
  Matrix out(rows, cols);
  const Matrix& x = a.value();
  for (Eigen::Index k = 0; k < x.size(); ++k) {
    out(k / cols, k % cols) = x(k / inCols, k % inCols);
  }
  const int ia = a.id();
  return tapeOf(a).record(
      std::move(out),
      {a},
      [ia, cols, inCols](Tape& tp, const Matrix& g) {
        const Matrix& xv = tp.value(ia);
        Matrix back(xv.rows(), xv.cols());
        for (Eigen::Index k = 0; k < g.size(); ++k) {
          back(k / inCols, k % inCols) = g(k / cols, k % cols);
        }
        tp.accumulate(ia, back);
      },
      "reshape");
}

Var sum(const Var& a) {
  const int ia = a.id();
  return tapeOf(a).record(
      scalarMatrix(a.value().sum()),
      {a},
      [ia](Tape& tp, const Matrix& g) {
        const Matrix& xv = tp.value(ia);
        tp.accumulate(ia, Matrix::Constant(xv.rows(), xv.cols(), g(0, 0)));
      },
      "sum");
}

Var mean(const Var& a) {
  const int ia = a.id();
  const double n = static_cast<double>(a.value().size());
  return tapeOf(a).record(
      scalarMatrix(a.value().sum() / n),
      {a},
      [ia, n](Tape& tp, const Matrix& g) {
        const Matrix& xv = tp.value(ia);
        tp.accumulate(ia, Matrix::Constant(xv.rows(), xv.cols(), g(0, 0) / n));
      },
      "mean");
}

Var meanRows(const Var& a) {
  const int ia = a.id();
  const double n = static_cast<double>(a.rows());
  return tapeOf(a).record(
      a.value().colwise().mean(),
      {a},
      [ia, n](Tape& tp, const Matrix& g) {
        const Matrix& xv = tp.value(ia);
        tp.accumulate(ia, g.replicate(xv.rows(), 1) / n);
      },
      "meanRows");
}

Var sqnorm(const Var& a) {
  const int ia = a.id();
  return tapeOf(a).record(
      scalarMatrix(a.value().squaredNorm()),
      {a},
      [ia](Tape& tp, const Matrix& g) { tp.accumulate(ia, 2.0 * g(0, 0) * tp.value(ia)); },
      "sqnorm");
}

Var dotRows(const Var& a, const Var& b) {
  requireSameShape(a, b, "dotRows");
  const int ia = a.id();
  const int ib = b.id();
  return tapeOf(a).record(
      a.value().cwiseProduct(b.value()).rowwise().sum(),
      {a, b},
      [ia, ib](Tape& tp, const Matrix& g) {
        if (tp.requiresGrad(ia)) {
          tp.accumulate(ia, (tp.value(ib).array().colwise() * g.col(0).array()).matrix());
        }
        if (tp.requiresGrad(ib)) {
          tp.accumulate(ib, (tp.value(ia).array().colwise() * g.col(0).array()).matrix());
        }
      },
      "dotRows");
}

Var arccosClamped(const Var& a, double eps) {
  const Matrix& x = a.value();
  const double lo = -1.0 + eps;
  const double hi = 1.0 - eps;
  Tape& t = tapeOf(a);
  if ((x.array().abs() > 1.0 - kNearClampMargin).any()) {
    t.markNearNonSmooth();
  }
  Matrix y = x.unaryExpr([lo, hi](double v) { return std::acos(std::clamp(v, lo, hi)); });
  const int ia = a.id();
  return t.record(
      std::move(y),
      {a},
      [ia, lo, hi](Tape& tp, const Matrix& g) {
        const Matrix& xv = tp.value(ia);
        Matrix d(xv.rows(), xv.cols());
        for (Eigen::Index k = 0; k < xv.size(); ++k) {
          const double v = xv(k);
          d(k) = (v <= lo || v >= hi) ? 0.0 : -g(k) / std::sqrt(1.0 - v * v);
        }
        tp.accumulate(ia, d);
      },
      "arccosClamped");
}

Var cross3(const Var& a, const Var& b) {
  requireSameShape(a, b, "cross3");
  if (a.cols() != 3) {
    throw Error(ErrorCode::ShapeMismatch, "cross3 needs n x 3 inputs");
  }
  auto rowCross = [](const Matrix& u, const Matrix& v) {
    Matrix out(u.rows(), 3);
    for (Eigen::Index r = 0; r < u.rows(); ++r) {
      out(r, 0) = u(r, 1) * v(r, 2) - u(r, 2) * v(r, 1);
      out(r, 1) = u(r, 2) * v(r, 0) - u(r, 0) * v(r, 2);
      out(r, 2) = u(r, 0) * v(r, 1) - u(r, 1) * v(r, 0);
    }
    return out;
  };
  const int ia = a.id();
  const int ib = b.id();
  return tapeOf(a).record(
      rowCross(a.value(), b.value()),
      {a, b},
      [ia, ib, rowCross](Tape& tp, const Matrix& g) {
        // d/da <g, a x b> = b x g ; d/db <g, a x b> = g x a
        if (tp.requiresGrad(ia)) {
          tp.accumulate(ia, rowCross(tp.value(ib), g));
        }
        if (tp.requiresGrad(ib)) {
          tp.accumulate(ib, rowCross(g, tp.value(ia)));
        }
      },
      "cross3");
}

// ---- gradient check ---------------------------------------------------------

namespace {

struct Evaluation {
  double value = 0.0;
  bool nearNonSmooth = false;
};

Evaluation evaluate(const ScalarFn& f, const std::vector<NamedMatrix>& params) {
  Tape tape;
  std::vector<Var> leaves;
  leaves.reserve(params.size());
  for (const auto& p : params) {
    leaves.push_back(tape.constant(p.value));
  }
  const Var out = f(tape, leaves);
  return {out.scalar(), tape.nearNonSmooth()};
}

double relError(double a, double n, double floor) {
  return std::abs(a - n) / std::max({std::abs(a), std::abs(n), floor});
}

} // namespace

GradCheckReport gradCheck(const ScalarFn& f, const std::vector<NamedMatrix>& params, const GradCheckOptions& opt) {
  GradCheckReport report;

  Tape tape;
  std::vector<Var> leaves;
  leaves.reserve(params.size());
  for (const auto& p : params) {
    leaves.push_back(tape.leaf(p.value));
  }
  const Var loss = f(tape, leaves);
  if (tape.nearNonSmooth()) {
    report.skippedNearClamp = true;
    report.passed = true;
    return report;
  }
  tape.backward(loss);

  std::mt19937_64 rng(opt.sampleSeed);
  std::vector<NamedMatrix> work = params;
  for (size_t p = 0; p < params.size(); ++p) {
    GradCheckEntry entry;
    entry.name = params[p].name;
    const Matrix analytic = leaves[p].grad();
    const Eigen::Index n = params[p].value.size();

    std::vector<Eigen::Index> indices(static_cast<size_t>(n));
    std::iota(indices.begin(), indices.end(), 0);
    if (opt.maxElementsPerParam > 0 && indices.size() > opt.maxElementsPerParam) {
      std::shuffle(indices.begin(), indices.end(), rng);
      indices.resize(opt.maxElementsPerParam);
      std::sort(indices.begin(), indices.end());
    }

    for (const Eigen::Index k : indices) {
      const double x0 = params[p].value(k);
      auto centralDiff = [&](double h) {
        work[p].value(k) = x0 + h;
        const Evaluation fp = evaluate(f, work);
        work[p].value(k) = x0 - h;
        const Evaluation fm = evaluate(f, work);
        work[p].value(k) = x0;
        return std::pair{(fp.value - fm.value) / (2.0 * h), fp.nearNonSmooth || fm.nearNonSmooth};
      };
      const auto [numeric, nearClamp] = centralDiff(opt.step);
      if (nearClamp) {
        report.skippedNearClamp = true;
        continue;
      }
      const double a = analytic(k);
      double err = relError(a, numeric, opt.absFloor);
      if (err > opt.tol) {
        // A smooth function gives agreeing stencils at h and h/2 (to O(h^2));
        // a kink inside the stencil does not.
        const auto [half, nearClampHalf] = centralDiff(0.5 * opt.step);
        if (nearClampHalf || relError(numeric, half, opt.absFloor) > opt.tol) {
          ++entry.skippedNonSmooth;
          continue;
        }
      }
      entry.maxRelError = std::max(entry.maxRelError, err);
      ++entry.checked;
    }
    report.maxRelError = std::max(report.maxRelError, entry.maxRelError);
    report.checked += entry.checked;
    report.skippedNonSmooth += entry.skippedNonSmooth;
    report.entries.push_back(std::move(entry));
  }
  report.passed = report.maxRelError <= opt.tol;
  return report;
}

} // namespace posecanon::ad
