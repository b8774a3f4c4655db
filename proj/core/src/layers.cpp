#include "memoir/layers.hpp"

#include <cmath>

namespace memoir::tensor {

double gaussian_kl(const DiagGaussian& q, const DiagGaussian& p) {
  if (q.mean.size() != p.mean.size() || q.log_std.size() != q.mean.size() || p.log_std.size() != p.mean.size()) {
    throw ShapeError("gaussian_kl: dimension mismatch");
  }
  const Eigen::ArrayXd lq = q.log_std.array().max(kMinLogStd).min(kMaxLogStd);
  const Eigen::ArrayXd lp = p.log_std.array().max(kMinLogStd).min(kMaxLogStd);
  const Eigen::ArrayXd var_q = (2.0 * lq).exp();
  const Eigen::ArrayXd var_p = (2.0 * lp).exp();
  const Eigen::ArrayXd diff = q.mean.array() - p.mean.array();
  return (lp - lq + (var_q + diff.square()) / (2.0 * var_p) - 0.5).sum();
}

double cosine_sim(const Vector& a, const Vector& b) {
  if (a.size() != b.size()) throw ShapeError("cosine_sim: length mismatch");
  const double na = a.norm();
  const double nb = b.norm();
  if (!(na > 0.0) || !(nb > 0.0)) throw ShapeError("cosine_sim: zero vector");
  return std::clamp(a.dot(b) / (na * nb), -1.0, 1.0);
}

void Linear::init(ParamStore& store, Rng& rng, double gain) const {
  store.add(weight(), glorot(rng, in, out, gain));
  if (bias) store.add(offset(), Matrix::Zero(1, out));
}

Var Linear::operator()(Graph& g, Var x) const {
  if (x.cols() != in) throw ShapeError(name + ": expected input width " + std::to_string(in));
  Var y = matmul(x, g.param(weight()));
  return bias ? add_row(y, g.param(offset())) : y;
}

void FeedForward::init(ParamStore& store, Rng& rng) const {
  first().init(store, rng);
  second().init(store, rng);
}

Var FeedForward::operator()(Graph& g, Var x) const { return second()(g, tanh(first()(g, x))); }

void GRUCell::init(ParamStore& store, Rng& rng) const {
  store.add(name + ".Wx", glorot(rng, in, 3 * hidden));
  store.add(name + ".Wh", glorot(rng, hidden, 3 * hidden));
  store.add(name + ".b", Matrix::Zero(1, 3 * hidden));
}

Var GRUCell::operator()(Graph& g, Var x, Var h, std::optional<Var> extra) const {
  if (h.cols() != hidden) throw ShapeError(name + ": hidden width mismatch");
  Var gx = add_row(matmul(x, g.param(name + ".Wx")), g.param(name + ".b"));
  if (extra) gx = add(gx, *extra);
  Var gh = matmul(h, g.param(name + ".Wh"));
  const Eigen::Index n = hidden;
  Var reset = sigmoid(add(slice_cols(gx, 0, n), slice_cols(gh, 0, n)));
  Var update = sigmoid(add(slice_cols(gx, n, n), slice_cols(gh, n, n)));
  Var candidate = tanh(add(slice_cols(gx, 2 * n, n), mul(reset, slice_cols(gh, 2 * n, n))));
  return add(candidate, mul(update, sub(h, candidate)));
}

}  // namespace memoir::tensor
