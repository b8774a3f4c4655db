#include "memoir/autodiff.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "memoir/params.hpp"

namespace memoir::tensor {
namespace {

std::string shape(const Matrix& m) {
  std::ostringstream out;
  out << m.rows() << "x" << m.cols();
  return out.str();
}

void require_same_shape(const char* op, Var a, Var b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape(a.value()) + " vs " + shape(b.value()));
  }
}

void require_scalar(const char* op, Var s) {
  if (s.rows() != 1 || s.cols() != 1) throw ShapeError(std::string(op) + ": expected 1x1 operand");
}

void require_bias(const char* op, Var a, const Matrix* bias) {
  if (bias != nullptr && (bias->rows() != a.rows() || bias->cols() != a.cols())) {
    throw ShapeError(std::string(op) + ": bias shape " + shape(*bias) + " vs " + shape(a.value()));
  }
}

Matrix shifted(const Matrix& a, const Matrix* bias) { return bias != nullptr ? Matrix(a + *bias) : a; }

// Row max ignoring -inf; throws when every entry of a row is -inf. NaN and
// +inf rows yield NaN so that the loss check reports them.
Eigen::VectorXd row_max(const char* op, const Matrix& a) {
  constexpr double kNegInf = -std::numeric_limits<double>::infinity();
  Eigen::VectorXd out(a.rows());
  for (Eigen::Index r = 0; r < a.rows(); ++r) {
    double best = kNegInf;
    bool masked = true;
    for (Eigen::Index c = 0; c < a.cols(); ++c) {
      const double v = a(r, c);
      if (v != kNegInf) masked = false;
      if (std::isnan(v)) best = v;
      if (!std::isnan(best)) best = std::max(best, v);
    }
    if (masked) throw ShapeError(std::string(op) + ": row " + std::to_string(r) + " is fully masked");
    out[r] = std::isfinite(best) ? best : std::numeric_limits<double>::quiet_NaN();
  }
  return out;
}

Matrix softmax_value(const char* op, const Matrix& z) {
  const Eigen::VectorXd m = row_max(op, z);
  Matrix e = (z.colwise() - m).array().exp().matrix();
  const Eigen::VectorXd s = e.rowwise().sum();
  return e.array().colwise() / s.array();
}

}  // namespace

const Matrix& Var::value() const { return graph_->value(id_); }

double Var::scalar() const {
  const Matrix& v = value();
  if (v.size() != 1) throw ShapeError("scalar(): value is " + shape(v));
  return v(0, 0);
}

Var Graph::push(Matrix value, const char* op, std::initializer_list<Var> inputs, Backward backward) {
  Node node;
  node.value = std::move(value);
  node.op = op;
  node.trainable = false;
  for (const Var& in : inputs) {
    if (&in.graph() != this) throw ShapeError(std::string(op) + ": operands from different graphs");
    node.trainable = node.trainable || trainable(in.id());
  }
  if (node.trainable) node.backward = std::move(backward);
  nodes_.push_back(std::move(node));
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

Var Graph::constant(Matrix value) {
  Node node;
  node.value = std::move(value);
  node.op = "constant";
  node.trainable = false;
  nodes_.push_back(std::move(node));
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

Var Graph::scalar(double value) { return constant(Matrix::Constant(1, 1, value)); }

Var Graph::param(const std::string& name) {
  if (auto it = param_ids_.find(name); it != param_ids_.end()) return Var(this, it->second);
  if (params_ == nullptr) throw std::logic_error("Graph::param without a ParamStore");
  Node node;
  node.value = params_->value(name);
  node.op = "param";
  node.param = name;
  node.trainable = true;
  nodes_.push_back(std::move(node));
  const int id = static_cast<int>(nodes_.size()) - 1;
  param_ids_.emplace(name, id);
  return Var(this, id);
}

Gradients Graph::backward(Var loss) {
  if (&loss.graph() != this) throw std::logic_error("backward: loss from another graph");
  const Matrix& lv = loss.value();
  if (lv.size() != 1) throw ShapeError("backward: loss must be 1x1, got " + shape(lv));
  if (!std::isfinite(lv(0, 0))) {
    for (std::size_t i = 0; i <= static_cast<std::size_t>(loss.id()); ++i) {
      const Node& n = nodes_[i];
      if (n.op == std::string_view("constant")) continue;
      if (!n.value.allFinite()) {
        throw NonFiniteError(n.op, std::string("non-finite loss; first non-finite value produced by op '") +
                                       n.op + "' (node " + std::to_string(i) + ")");
      }
    }
    throw NonFiniteError("loss", "non-finite loss");
  }

  for (auto& n : nodes_) {
    n.has_grad = false;
    n.grad.resize(0, 0);
  }
  accumulate(loss.id(), Matrix::Ones(1, 1));
  for (int id = loss.id(); id >= 0; --id) {
    Node& n = nodes_[static_cast<std::size_t>(id)];
    if (n.has_grad && n.backward) n.backward(*this, id);
  }

  Gradients out;
  for (const auto& [name, id] : param_ids_) {
    const Node& n = nodes_[static_cast<std::size_t>(id)];
    out.emplace(name, n.has_grad ? n.grad : Matrix::Zero(n.value.rows(), n.value.cols()));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Elementwise

Var add(Var a, Var b) {
  require_same_shape("add", a, b);
  const int ia = a.id(), ib = b.id();
  return a.graph().push(a.value() + b.value(), "add", {a, b}, [ia, ib](Graph& g, int self) {
    g.accumulate(ia, g.grad(self));
    g.accumulate(ib, g.grad(self));
  });
}

Var sub(Var a, Var b) {
  require_same_shape("sub", a, b);
  const int ia = a.id(), ib = b.id();
  return a.graph().push(a.value() - b.value(), "sub", {a, b}, [ia, ib](Graph& g, int self) {
    g.accumulate(ia, g.grad(self));
    g.accumulate(ib, -g.grad(self));
  });
}

Var mul(Var a, Var b) {
  require_same_shape("mul", a, b);
  const int ia = a.id(), ib = b.id();
  return a.graph().push(a.value().cwiseProduct(b.value()), "mul", {a, b}, [ia, ib](Graph& g, int self) {
    g.accumulate(ia, g.grad(self).cwiseProduct(g.value(ib)));
    g.accumulate(ib, g.grad(self).cwiseProduct(g.value(ia)));
  });
}

Var scale(Var a, double factor) {
  const int ia = a.id();
  return a.graph().push(a.value() * factor, "scale", {a},
                        [ia, factor](Graph& g, int self) { g.accumulate(ia, g.grad(self) * factor); });
}

Var add_scalar(Var a, double offset) {
  const int ia = a.id();
  return a.graph().push(a.value().array() + offset, "add_scalar", {a},
                        [ia](Graph& g, int self) { g.accumulate(ia, g.grad(self)); });
}

Var neg(Var a) { return scale(a, -1.0); }

Var add_row(Var a, Var row) {
  if (row.rows() != 1 || row.cols() != a.cols()) throw ShapeError("add_row: row must be 1x" + std::to_string(a.cols()));
  const int ia = a.id(), ir = row.id();
  Matrix v = a.value().rowwise() + row.value().row(0);
  return a.graph().push(std::move(v), "add_row", {a, row}, [ia, ir](Graph& g, int self) {
    g.accumulate(ia, g.grad(self));
    g.accumulate(ir, g.grad(self).colwise().sum());
  });
}

Var mul_row(Var a, Var row) {
  if (row.rows() != 1 || row.cols() != a.cols()) throw ShapeError("mul_row: row must be 1x" + std::to_string(a.cols()));
  const int ia = a.id(), ir = row.id();
  Matrix v = a.value().array().rowwise() * row.value().row(0).array();
  return a.graph().push(std::move(v), "mul_row", {a, row}, [ia, ir](Graph& g, int self) {
    const Matrix& up = g.grad(self);
    g.accumulate(ia, Matrix(up.array().rowwise() * g.value(ir).row(0).array()));
    g.accumulate(ir, up.cwiseProduct(g.value(ia)).colwise().sum());
  });
}

Var mul_col(Var a, Var col) {
  if (col.cols() != 1 || col.rows() != a.rows()) throw ShapeError("mul_col: col must be " + std::to_string(a.rows()) + "x1");
  const int ia = a.id(), ic = col.id();
  Matrix v = a.value().array().colwise() * col.value().col(0).array();
  return a.graph().push(std::move(v), "mul_col", {a, col}, [ia, ic](Graph& g, int self) {
    const Matrix& up = g.grad(self);
    g.accumulate(ia, Matrix(up.array().colwise() * g.value(ic).col(0).array()));
    g.accumulate(ic, up.cwiseProduct(g.value(ia)).rowwise().sum());
  });
}

Var mul_scalar(Var a, Var s) {
  require_scalar("mul_scalar", s);
  const int ia = a.id(), is = s.id();
  return a.graph().push(a.value() * s.scalar(), "mul_scalar", {a, s}, [ia, is](Graph& g, int self) {
    const Matrix& up = g.grad(self);
    g.accumulate(ia, up * g.value(is)(0, 0));
    g.accumulate(is, Matrix::Constant(1, 1, up.cwiseProduct(g.value(ia)).sum()));
  });
}

Var add_scalar(Var a, Var s) {
  require_scalar("add_scalar", s);
  const int ia = a.id(), is = s.id();
  return a.graph().push(a.value().array() + s.scalar(), "add_scalar_var", {a, s}, [ia, is](Graph& g, int self) {
    const Matrix& up = g.grad(self);
    g.accumulate(ia, up);
    g.accumulate(is, Matrix::Constant(1, 1, up.sum()));
  });
}

Var repeat_rows(Var row, Eigen::Index n) {
  if (row.rows() != 1) throw ShapeError("repeat_rows: expected a row vector");
  const int ir = row.id();
  return row.graph().push(row.value().replicate(n, 1), "repeat_rows", {row},
                          [ir](Graph& g, int self) { g.accumulate(ir, g.grad(self).colwise().sum()); });
}

Var tanh(Var a) {
  const int ia = a.id();
  return a.graph().push(a.value().array().tanh().matrix(), "tanh", {a}, [ia](Graph& g, int self) {
    const Matrix& y = g.value(self);
    g.accumulate(ia, Matrix(g.grad(self).array() * (1.0 - y.array().square())));
  });
}

Var sigmoid(Var a) {
  const int ia = a.id();
  Matrix v = (1.0 + (-a.value().array()).exp()).inverse().matrix();
  return a.graph().push(std::move(v), "sigmoid", {a}, [ia](Graph& g, int self) {
    const Matrix& y = g.value(self);
    g.accumulate(ia, Matrix(g.grad(self).array() * y.array() * (1.0 - y.array())));
  });
}

Var exp(Var a) {
  const int ia = a.id();
  return a.graph().push(a.value().array().exp().matrix(), "exp", {a}, [ia](Graph& g, int self) {
    g.accumulate(ia, g.grad(self).cwiseProduct(g.value(self)));
  });
}

Var log(Var a) {
  const int ia = a.id();
  return a.graph().push(a.value().array().log().matrix(), "log", {a}, [ia](Graph& g, int self) {
    g.accumulate(ia, Matrix(g.grad(self).array() / g.value(ia).array()));
  });
}

Var square(Var a) {
  const int ia = a.id();
  return a.graph().push(a.value().array().square().matrix(), "square", {a}, [ia](Graph& g, int self) {
    g.accumulate(ia, Matrix(2.0 * g.grad(self).array() * g.value(ia).array()));
  });
}

Var clamp(Var a, double lo, double hi) {
  const int ia = a.id();
  Matrix v = a.value().cwiseMax(lo).cwiseMin(hi);
  return a.graph().push(std::move(v), "clamp", {a}, [ia, lo, hi](Graph& g, int self) {
    const Matrix& x = g.value(ia);
    const Matrix pass = ((x.array() >= lo) && (x.array() <= hi)).cast<double>().matrix();
    g.accumulate(ia, g.grad(self).cwiseProduct(pass));
  });
}

// ---------------------------------------------------------------------------
// Linear algebra

Var matmul(Var a, Var b) {
  if (a.cols() != b.rows()) throw ShapeError("matmul: " + shape(a.value()) + " * " + shape(b.value()));
  const int ia = a.id(), ib = b.id();
  return a.graph().push(a.value() * b.value(), "matmul", {a, b}, [ia, ib](Graph& g, int self) {
    const Matrix& up = g.grad(self);
    if (g.trainable(ia)) g.accumulate(ia, up * g.value(ib).transpose());
    if (g.trainable(ib)) g.accumulate(ib, g.value(ia).transpose() * up);
  });
}

Var matmul_nt(Var a, Var b) {
  if (a.cols() != b.cols()) throw ShapeError("matmul_nt: " + shape(a.value()) + " * (" + shape(b.value()) + ")^T");
  const int ia = a.id(), ib = b.id();
  return a.graph().push(a.value() * b.value().transpose(), "matmul_nt", {a, b}, [ia, ib](Graph& g, int self) {
    const Matrix& up = g.grad(self);
    if (g.trainable(ia)) g.accumulate(ia, up * g.value(ib));
    if (g.trainable(ib)) g.accumulate(ib, up.transpose() * g.value(ia));
  });
}

Var transpose(Var a) {
  const int ia = a.id();
  return a.graph().push(a.value().transpose(), "transpose", {a},
                        [ia](Graph& g, int self) { g.accumulate(ia, g.grad(self).transpose()); });
}

Var concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw ShapeError("concat_cols: no operands");
  Graph& graph = parts.front().graph();
  const Eigen::Index rows = parts.front().rows();
  Eigen::Index cols = 0;
  for (const Var& p : parts) {
    if (p.rows() != rows) throw ShapeError("concat_cols: row count mismatch");
    cols += p.cols();
  }
  Matrix v(rows, cols);
  std::vector<std::pair<int, Eigen::Index>> pieces;
  Eigen::Index offset = 0;
  bool trainable = false;
  for (const Var& p : parts) {
    v.middleCols(offset, p.cols()) = p.value();
    pieces.emplace_back(p.id(), offset);
    offset += p.cols();
    trainable = trainable || graph.trainable(p.id());
  }
  // Feed trainability through a representative operand.
  Var witness = parts.front();
  for (const Var& p : parts) {
    if (graph.trainable(p.id())) witness = p;
  }
  return graph.push(std::move(v), "concat_cols", {witness}, [pieces](Graph& g, int self) {
    const Matrix& up = g.grad(self);
    for (const auto& [id, off] : pieces) g.accumulate(id, up.middleCols(off, g.value(id).cols()));
  });
}

Var concat_rows(std::span<const Var> parts) {
  if (parts.empty()) throw ShapeError("concat_rows: no operands");
  Graph& graph = parts.front().graph();
  const Eigen::Index cols = parts.front().cols();
  Eigen::Index rows = 0;
  for (const Var& p : parts) {
    if (p.cols() != cols) throw ShapeError("concat_rows: column count mismatch");
    rows += p.rows();
  }
  Matrix v(rows, cols);
  std::vector<std::pair<int, Eigen::Index>> pieces;
  Eigen::Index offset = 0;
  Var witness = parts.front();
  for (const Var& p : parts) {
    v.middleRows(offset, p.rows()) = p.value();
    pieces.emplace_back(p.id(), offset);
    offset += p.rows();
    if (graph.trainable(p.id())) witness = p;
  }
  return graph.push(std::move(v), "concat_rows", {witness}, [pieces](Graph& g, int self) {
    const Matrix& up = g.grad(self);
    for (const auto& [id, off] : pieces) g.accumulate(id, up.middleRows(off, g.value(id).rows()));
  });
}

Var slice_cols(Var a, Eigen::Index start, Eigen::Index count) {
  if (start < 0 || count < 0 || start + count > a.cols()) throw ShapeError("slice_cols: out of range");
  const int ia = a.id();
  return a.graph().push(a.value().middleCols(start, count), "slice_cols", {a}, [ia, start, count](Graph& g, int self) {
    Matrix full = Matrix::Zero(g.value(ia).rows(), g.value(ia).cols());
    full.middleCols(start, count) = g.grad(self);
    g.accumulate(ia, full);
  });
}

Var slice_rows(Var a, Eigen::Index start, Eigen::Index count) {
  if (start < 0 || count < 0 || start + count > a.rows()) throw ShapeError("slice_rows: out of range");
  const int ia = a.id();
  return a.graph().push(a.value().middleRows(start, count), "slice_rows", {a}, [ia, start, count](Graph& g, int self) {
    Matrix full = Matrix::Zero(g.value(ia).rows(), g.value(ia).cols());
    full.middleRows(start, count) = g.grad(self);
    g.accumulate(ia, full);
  });
}

Var pick(Var a, std::span<const int> index) {
  if (static_cast<Eigen::Index>(index.size()) != a.rows()) throw ShapeError("pick: one index per row required");
  Matrix v(a.rows(), 1);
  for (Eigen::Index r = 0; r < a.rows(); ++r) {
    const int c = index[static_cast<std::size_t>(r)];
    if (c < 0 || c >= a.cols()) throw ShapeError("pick: column index out of range");
    v(r, 0) = a.value()(r, c);
  }
  const int ia = a.id();
  std::vector<int> idx(index.begin(), index.end());
  return a.graph().push(std::move(v), "pick", {a}, [ia, idx](Graph& g, int self) {
    Matrix full = Matrix::Zero(g.value(ia).rows(), g.value(ia).cols());
    for (std::size_t r = 0; r < idx.size(); ++r) full(static_cast<Eigen::Index>(r), idx[r]) = g.grad(self)(static_cast<Eigen::Index>(r), 0);
    g.accumulate(ia, full);
  });
}

// ---------------------------------------------------------------------------
// Reductions

Var sum(Var a) {
  const int ia = a.id();
  return a.graph().push(Matrix::Constant(1, 1, a.value().sum()), "sum", {a}, [ia](Graph& g, int self) {
    g.accumulate(ia, Matrix::Constant(g.value(ia).rows(), g.value(ia).cols(), g.grad(self)(0, 0)));
  });
}

Var mean(Var a) {
  if (a.value().size() == 0) throw ShapeError("mean: empty operand");
  return scale(sum(a), 1.0 / static_cast<double>(a.value().size()));
}

Var sum_rows(Var a) {
  const int ia = a.id();
  return a.graph().push(a.value().rowwise().sum(), "sum_rows", {a}, [ia](Graph& g, int self) {
    g.accumulate(ia, g.grad(self).replicate(1, g.value(ia).cols()));
  });
}

Var mean_rows(Var a) {
  if (a.rows() == 0) throw ShapeError("mean_rows: empty operand");
  const int ia = a.id();
  return a.graph().push(a.value().colwise().mean(), "mean_rows", {a}, [ia](Graph& g, int self) {
    const auto n = static_cast<double>(g.value(ia).rows());
    g.accumulate(ia, (g.grad(self) / n).replicate(g.value(ia).rows(), 1));
  });
}

Var softmax_rows(Var a, const Matrix* fixed_bias) {
  require_bias("softmax_rows", a, fixed_bias);
  const int ia = a.id();
  Matrix y = softmax_value("softmax_rows", shifted(a.value(), fixed_bias));
  return a.graph().push(std::move(y), "softmax_rows", {a}, [ia](Graph& g, int self) {
    const Matrix& y = g.value(self);
    const Matrix& up = g.grad(self);
    const Eigen::VectorXd dot = up.cwiseProduct(y).rowwise().sum();
    g.accumulate(ia, Matrix(y.array() * (up.colwise() - dot).array()));
  });
}

Var log_softmax_rows(Var a, const Matrix* fixed_bias) {
  require_bias("log_softmax_rows", a, fixed_bias);
  const int ia = a.id();
  const Matrix z = shifted(a.value(), fixed_bias);
  const Eigen::VectorXd m = row_max("log_softmax_rows", z);
  const Eigen::VectorXd lse =
      m.array() + (z.colwise() - m).array().exp().rowwise().sum().log();
  Matrix y = z.colwise() - lse;
  return a.graph().push(std::move(y), "log_softmax_rows", {a}, [ia](Graph& g, int self) {
    const Matrix& y = g.value(self);
    Matrix up = g.grad(self);
    // Masked entries carry y = -inf and contribute nothing.
    const Matrix p = y.array().exp().matrix();
    for (Eigen::Index i = 0; i < up.size(); ++i) {
      if (!std::isfinite(y(i))) up(i) = 0.0;
    }
    const Eigen::VectorXd total = up.rowwise().sum();
    g.accumulate(ia, Matrix(up - (p.array().colwise() * total.array()).matrix()));
  });
}

Var logsumexp_rows(Var a, const Matrix* fixed_bias) {
  require_bias("logsumexp_rows", a, fixed_bias);
  const int ia = a.id();
  const Matrix z = shifted(a.value(), fixed_bias);
  const Eigen::VectorXd m = row_max("logsumexp_rows", z);
  Matrix p = (z.colwise() - m).array().exp().matrix();
  const Eigen::VectorXd s = p.rowwise().sum();
  Matrix v = (m.array() + s.array().log()).matrix();
  p = p.array().colwise() / s.array();
  return a.graph().push(std::move(v), "logsumexp_rows", {a}, [ia, p](Graph& g, int self) {
    g.accumulate(ia, Matrix(p.array().colwise() * g.grad(self).col(0).array()));
  });
}

Var normalize_rows(Var a) {
  const int ia = a.id();
  const Eigen::VectorXd norms = a.value().rowwise().norm();
  for (Eigen::Index r = 0; r < norms.size(); ++r) {
    if (norms[r] == 0.0) throw ShapeError("normalize_rows: zero vector in row " + std::to_string(r));
  }
  Matrix y = a.value().array().colwise() / norms.array();
  return a.graph().push(std::move(y), "normalize_rows", {a}, [ia, norms](Graph& g, int self) {
    const Matrix& y = g.value(self);
    const Matrix& up = g.grad(self);
    const Eigen::VectorXd dot = up.cwiseProduct(y).rowwise().sum();
    Matrix gx = (up - (y.array().colwise() * dot.array()).matrix());
    gx = gx.array().colwise() / norms.array();
    g.accumulate(ia, gx);
  });
}

Var gaussian_kl_rows(Var mean_q, Var log_std_q, Var mean_p, Var log_std_p) {
  require_same_shape("gaussian_kl_rows", mean_q, log_std_q);
  require_same_shape("gaussian_kl_rows", mean_q, mean_p);
  require_same_shape("gaussian_kl_rows", mean_q, log_std_p);
  const int imq = mean_q.id(), ilq = log_std_q.id(), imp = mean_p.id(), ilp = log_std_p.id();
  const auto mq = mean_q.value().array();
  const auto lq = log_std_q.value().array();
  const auto mp = mean_p.value().array();
  const auto lp = log_std_p.value().array();
  const Eigen::ArrayXXd var_q = (2.0 * lq).exp();
  const Eigen::ArrayXXd var_p = (2.0 * lp).exp();
  const Eigen::ArrayXXd diff = mq - mp;
  const Eigen::ArrayXXd per = lp - lq + (var_q + diff.square()) / (2.0 * var_p) - 0.5;
  Matrix v = per.matrix().rowwise().sum();
  Graph& graph = mean_q.graph();
  // Route trainability through every operand.
  Var witness = mean_q;
  for (Var x : {log_std_q, mean_p, log_std_p}) {
    if (graph.trainable(x.id())) witness = x;
  }
  if (graph.trainable(mean_q.id())) witness = mean_q;
  return graph.push(std::move(v), "gaussian_kl_rows", {witness},
                    [imq, ilq, imp, ilp, var_q, var_p, diff](Graph& g, int self) {
                      const Eigen::ArrayXXd up = g.grad(self).col(0).replicate(1, var_q.cols()).array();
                      const Eigen::ArrayXXd d_mq = diff / var_p;
                      g.accumulate(imq, Matrix((up * d_mq).matrix()));
                      g.accumulate(imp, Matrix((-up * d_mq).matrix()));
                      g.accumulate(ilq, Matrix((up * (var_q / var_p - 1.0)).matrix()));
                      g.accumulate(ilp, Matrix((up * (1.0 - (var_q + diff.square()) / var_p)).matrix()));
                    });
}

Var attention(Var queries, Var keys, Var values, std::optional<Var> learned_bias, const Matrix* fixed_bias) {
  if (queries.cols() != keys.cols()) throw ShapeError("attention: query/key width mismatch");
  if (keys.rows() != values.rows()) throw ShapeError("attention: key/value count mismatch");
  Var scores = scale(matmul_nt(queries, keys), 1.0 / std::sqrt(static_cast<double>(queries.cols())));
  if (learned_bias) {
    if (learned_bias->rows() != scores.rows() || learned_bias->cols() != scores.cols()) {
      throw ShapeError("attention: bias must be n_q x n_k");
    }
    scores = add(scores, *learned_bias);
  }
  if (fixed_bias != nullptr && (fixed_bias->rows() != scores.rows() || fixed_bias->cols() != scores.cols())) {
    throw ShapeError("attention: bias must be n_q x n_k");
  }
  return matmul(softmax_rows(scores, fixed_bias), values);
}

}  // namespace memoir::tensor
