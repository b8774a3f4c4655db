#pragma once

#include <functional>
#include <initializer_list>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace memoir::tensor {

using Matrix = Eigen::MatrixXd;
using Gradients = std::map<std::string, Matrix>;

class Graph;
class ParamStore;

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised when a loss is NaN/Inf; `op()` names the first operation whose
/// output went non-finite.
class NonFiniteError : public std::runtime_error {
 public:
  NonFiniteError(std::string op, const std::string& what)
      : std::runtime_error(what), op_(std::move(op)) {}
  const std::string& op() const { return op_; }

 private:
  std::string op_;
};

/// Handle to a node of a Graph. Cheap to copy; valid while the graph lives.
class Var {
 public:
  Var() = default;

  const Matrix& value() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  double scalar() const;
  Graph& graph() const { return *graph_; }
  int id() const { return id_; }
  bool valid() const { return graph_ != nullptr; }

 private:
  friend class Graph;
  Var(Graph* graph, int id) : graph_(graph), id_(id) {}

  Graph* graph_ = nullptr;
  int id_ = -1;
};

/// Tape for reverse-mode differentiation over a bounded set of dense ops.
///
/// Every op pushes one node holding its forward value and a closure that
/// propagates the node's gradient to its inputs. Parameters are leaves bound
/// to a ParamStore by name; each parameter appears at most once per graph.
class Graph {
 public:
  using Backward = std::function<void(Graph&, int)>;

  explicit Graph(const ParamStore* params = nullptr) : params_(params) {}
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  Var constant(Matrix value);
  Var scalar(double value);
  Var param(const std::string& name);
  bool has_params() const { return params_ != nullptr; }

  const Matrix& value(int id) const { return nodes_[static_cast<std::size_t>(id)].value; }
  std::string_view op_name(int id) const { return nodes_[static_cast<std::size_t>(id)].op; }
  std::size_t size() const { return nodes_.size(); }

  /// Reverse pass from a 1x1 loss. Returns a gradient (possibly zero) for
  /// every parameter leaf created in this graph.
  Gradients backward(Var loss);

  // Op plumbing.
  Var push(Matrix value, const char* op, std::initializer_list<Var> inputs, Backward backward);
  bool trainable(int id) const { return nodes_[static_cast<std::size_t>(id)].trainable; }
  const Matrix& grad(int id) const { return nodes_[static_cast<std::size_t>(id)].grad; }
  bool has_grad(int id) const { return nodes_[static_cast<std::size_t>(id)].has_grad; }
  template <typename Expr>
  void accumulate(int id, const Expr& g) {
    auto& node = nodes_[static_cast<std::size_t>(id)];
    if (!node.trainable) return;
    if (node.has_grad) {
      node.grad += g;
    } else {
      node.grad = g;
      node.has_grad = true;
    }
  }

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    const char* op = "";
    Backward backward;
    std::string param;
    bool has_grad = false;
    bool trainable = true;
  };

  const ParamStore* params_;
  std::vector<Node> nodes_;
  std::map<std::string, int, std::less<>> param_ids_;
};

// Elementwise and broadcasting ops.
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double factor);
Var add_scalar(Var a, double offset);
Var neg(Var a);
/// a (n x m) + row (1 x m) broadcast over rows.
Var add_row(Var a, Var row);
/// a (n x m) * row (1 x m) broadcast over rows.
Var mul_row(Var a, Var row);
/// a (n x m) * col (n x 1) broadcast over columns.
Var mul_col(Var a, Var col);
/// a * s for a 1x1 variable s.
Var mul_scalar(Var a, Var s);
/// a + s for a 1x1 variable s.
Var add_scalar(Var a, Var s);
/// 1 x m row repeated n times.
Var repeat_rows(Var row, Eigen::Index n);

Var tanh(Var a);
Var sigmoid(Var a);
Var exp(Var a);
Var log(Var a);
Var square(Var a);
/// Clamp with zero gradient outside [lo, hi].
Var clamp(Var a, double lo, double hi);

// Linear algebra and reshaping.
Var matmul(Var a, Var b);
/// a * b^T.
Var matmul_nt(Var a, Var b);
Var transpose(Var a);
Var concat_cols(std::span<const Var> parts);
Var concat_rows(std::span<const Var> parts);
Var slice_cols(Var a, Eigen::Index start, Eigen::Index count);
Var slice_rows(Var a, Eigen::Index start, Eigen::Index count);
/// out(i) = a(i, index[i]); n x 1.
Var pick(Var a, std::span<const int> index);

// Reductions.
Var sum(Var a);
Var mean(Var a);
/// n x 1 row sums.
Var sum_rows(Var a);
/// 1 x m column means.
Var mean_rows(Var a);

/// Row-wise softmax of a + fixed_bias. The fixed bias may hold -inf entries
/// (structural masking); every row needs at least one finite entry.
Var softmax_rows(Var a, const Matrix* fixed_bias = nullptr);
Var log_softmax_rows(Var a, const Matrix* fixed_bias = nullptr);
/// n x 1 log-sum-exp of each row of a + fixed_bias.
Var logsumexp_rows(Var a, const Matrix* fixed_bias = nullptr);
/// Each row scaled to unit Euclidean norm. Zero rows throw ShapeError.
Var normalize_rows(Var a);
/// n x 1 closed-form KL[q || p] between diagonal Gaussians given per-row
/// means and log standard deviations.
Var gaussian_kl_rows(Var mean_q, Var log_std_q, Var mean_p, Var log_std_p);

/// Softmax(q k^T / sqrt(d) + learned_bias + fixed_bias) v.
Var attention(Var queries, Var keys, Var values, std::optional<Var> learned_bias = std::nullopt,
              const Matrix* fixed_bias = nullptr);

}  // namespace memoir::tensor
