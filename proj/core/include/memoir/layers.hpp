#pragma once

#include <string>

#include "memoir/autodiff.hpp"
#include "memoir/params.hpp"
#include "memoir/rng.hpp"

namespace memoir::tensor {

using Vector = Eigen::VectorXd;

inline constexpr double kMinLogStd = -7.0;
inline constexpr double kMaxLogStd = 7.0;

/// Diagonal Gaussian; log_std is clamped to [kMinLogStd, kMaxLogStd].
struct DiagGaussian {
  Vector mean;
  Vector log_std;

  Vector stddev() const { return log_std.array().exp(); }
  /// mean + std * noise.
  Vector sample(const Vector& noise) const { return mean + stddev().cwiseProduct(noise); }
};

/// Closed-form KL[q || p]. Throws ShapeError on dimension mismatch.
double gaussian_kl(const DiagGaussian& q, const DiagGaussian& p);

/// a.b / (|a| |b|). Throws ShapeError for zero vectors or length mismatch.
double cosine_sim(const Vector& a, const Vector& b);

/// y = x W + b with x as n x in rows.
struct Linear {
  std::string name;
  int in = 0;
  int out = 0;
  bool bias = true;

  void init(ParamStore& store, Rng& rng, double gain = 1.0) const;
  Var operator()(Graph& g, Var x) const;
  std::string weight() const { return name + ".W"; }
  std::string offset() const { return name + ".b"; }
};

/// Two-layer tanh MLP.
struct FeedForward {
  std::string name;
  int in = 0;
  int hidden = 0;
  int out = 0;

  Linear first() const { return {name + ".0", in, hidden}; }
  Linear second() const { return {name + ".1", hidden, out}; }
  void init(ParamStore& store, Rng& rng) const;
  Var operator()(Graph& g, Var x) const;
};

/// Gated recurrent unit with an optional second additive input projection.
struct GRUCell {
  std::string name;
  int in = 0;
  int hidden = 0;

  void init(ParamStore& store, Rng& rng) const;
  /// h' = (1 - u) * n + u * h for gate pre-activations built from `x`
  /// (n x in) plus `extra` (n x 3H, already projected) when given.
  Var operator()(Graph& g, Var x, Var h, std::optional<Var> extra = std::nullopt) const;
};

}  // namespace memoir::tensor
