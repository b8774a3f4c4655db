#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "memoir/autodiff.hpp"
#include "memoir/layers.hpp"
#include "memoir/params.hpp"
#include "memoir/scene.hpp"

namespace memoir::world {

using tensor::DiagGaussian;
using tensor::Graph;
using tensor::ParamStore;
using tensor::Var;

struct WorldModelConfig {
  int feat_dim = 32;
  int instr_dim = 64;
  int hidden_dim = 16;
  int stoch_dim = 16;
  int embed_dim = 16;
  int mlp_dim = 32;
  /// D: overshooting distance and maximum imagination horizon.
  int max_horizon = 5;
  /// Imagination stops once the predicted goal distance drops below this (meters).
  double epsilon = 3.0;
  /// Compatibility temperature.
  double zeta = 0.1;

  int state_dim() const { return hidden_dim + stoch_dim; }
  /// Throws std::invalid_argument naming the offending field.
  void validate() const;
};

/// RSSM belief: deterministic recurrent part plus a diagonal Gaussian over
/// the stochastic part and a sample (or the mean in deterministic mode).
struct LatentState {
  Vector h;
  DiagGaussian dist;
  Vector z;

  /// [h; z], the vector consumed by the embedding and reward heads and by
  /// the navigation history branch.
  Vector full() const;
};

struct ImaginedTrajectory {
  std::vector<LatentState> states;
  std::vector<double> predicted_rewards;

  int horizon() const { return static_cast<int>(states.size()); }
};

/// Row-batched state inside a graph.
struct StateVars {
  Var h;
  Var mean;
  Var log_std;
  Var z;
};

class WorldModel {
 public:
  explicit WorldModel(WorldModelConfig config);

  const WorldModelConfig& config() const { return config_; }
  void init(ParamStore& store, Rng& rng) const;
  ParamStore init_params(std::uint64_t seed) const;
  /// True for parameters owned by the world model.
  static bool owns(const std::string& param_name);

  // Graph-level, row-batched. `noise` (batch x Z) selects reparameterised
  // sampling; nullptr uses the mean.
  StateVars initial(Graph& g, Eigen::Index batch) const;
  StateVars infer(Graph& g, const StateVars& prev, Var x, Var instr, const Matrix* noise) const;
  StateVars transition(Graph& g, const StateVars& prev, const Matrix* noise) const;
  Var full_state(const StateVars& s) const;
  /// psi_s over full states (n x (H+Z)) -> n x E.
  Var state_embedding(Graph& g, Var full) const;
  /// psi_o over pooled features (n x F) -> n x E.
  Var obs_embedding(Graph& g, Var x) const;
  /// f = cos(psi_s(state_i), psi_o(x_j)) / zeta for every pair: n x m.
  Var compatibility(Graph& g, Var full, Var x) const;
  /// Predicted goal distance per row: n x 1.
  Var reward(Graph& g, Var full) const;

  // Single-state API (deterministic evaluation unless noise is given).
  LatentState initial_state() const;
  LatentState infer(const ParamStore& p, const LatentState& prev, const Vector& x, const Vector& instr,
                    const Vector* noise = nullptr) const;
  LatentState transition(const ParamStore& p, const LatentState& prev, const Vector* noise = nullptr) const;
  double compatibility(const ParamStore& p, const LatentState& state, const Vector& x) const;
  double predict_reward(const ParamStore& p, const LatentState& state) const;
  Vector state_embedding(const ParamStore& p, const LatentState& state) const;
  Vector obs_embedding(const ParamStore& p, const Vector& x) const;
  ImaginedTrajectory imagine(const ParamStore& p, const LatentState& start) const;

 private:
  StateVars head(Graph& g, Var h, Var mean_logstd, const Matrix* noise) const;
  LatentState read(const StateVars& s) const;
  StateVars constant_state(Graph& g, const LatentState& s) const;

  WorldModelConfig config_;
};

/// Recursive rollout: apply `step`, predict its reward, stop at the first
/// prediction below `epsilon` or after `max_horizon` states.
ImaginedTrajectory imagine(const LatentState& start, int max_horizon, double epsilon,
                           const std::function<LatentState(const LatentState&)>& step,
                           const std::function<double(const LatentState&)>& reward);

// ---------------------------------------------------------------------------
// Training objective

/// One expert trajectory: pooled observations x_1..x_T and the goal distance
/// gamma_t at each step, under one instruction.
struct TrajectorySample {
  Vector instruction;
  std::vector<Vector> observations;
  std::vector<double> gammas;
};

/// Reparameterisation noise for one minibatch, fixed up front so that the
/// objective is a deterministic function of the parameters.
struct ElboNoise {
  /// posterior[t-1]: batch x Z noise for the posterior at step t.
  std::vector<Matrix> posterior;
  /// transition[s][k-1]: noise for the k-th open-loop step from posterior s.
  std::vector<std::vector<Matrix>> transition;

  static ElboNoise sample(Rng& rng, Eigen::Index batch, int steps, int overshoot, int stoch_dim);
  static ElboNoise zeros(Eigen::Index batch, int steps, int overshoot, int stoch_dim);
};

/// Objective components, already averaged over trajectories and weighted as
/// in the final loss: total = reward + nce + kl.
struct ElboTerms {
  double total = 0.0;
  /// -(reward log-likelihood), unit-variance Gaussian without the constant.
  double reward = 0.0;
  /// -(NCE lower bound).
  double nce = 0.0;
  double kl = 0.0;
};

struct ElboResult {
  Var loss;
  ElboTerms terms;
};

class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised when training produces a non-finite loss.
class DivergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Negative latent-overshooting objective:
///   -[J(1) + 1/(D-1) * sum_{d=2..D} J(d)],
/// where J(d) scores rewards and contrast on (d-1)-step open-loop priors
/// launched from filtered posteriors and the KL on d-step priors. D = 1
/// reduces to the single-step bound. The contrastive negative pool is every
/// observation of every trajectory in the batch.
ElboResult elbo_overshoot_loss(Graph& g, const WorldModel& model, std::span<const TrajectorySample> batch,
                               int overshoot, const ElboNoise& noise);

/// Single-step bound only (no overshooting machinery); equals
/// elbo_overshoot_loss with overshoot = 1.
ElboResult single_step_elbo_loss(Graph& g, const WorldModel& model, std::span<const TrajectorySample> batch,
                                 const ElboNoise& noise);

/// Mean log-softmax of compatibility between each state row and its positive
/// among `pool` (n_pool x F). `positive[i]` indexes the pool.
Var nce_term(Graph& g, const WorldModel& model, Var states_full, Var pool, std::span<const int> positive);

struct PretrainOptions {
  int iterations = 300;
  int batch_size = 8;
  double lr = 3e-3;
  std::uint64_t seed = 0;
  /// Record the curve every `log_every` iterations (always the first and last).
  int log_every = 1;
};

struct CurvePoint {
  int iteration = 0;
  ElboTerms terms;
};

struct PretrainResult {
  ParamStore params;
  std::vector<CurvePoint> curve;
};

/// Minimises elbo_overshoot_loss with Adam on random minibatches.
/// Deterministic in (params, dataset, options). Throws DivergenceError.
PretrainResult pretrain(const WorldModel& model, ParamStore params, std::span<const TrajectorySample> dataset,
                        const PretrainOptions& options);

/// One Adam step on a minibatch; returns the terms before the update.
ElboTerms train_step(const WorldModel& model, ParamStore& params, std::span<const TrajectorySample> batch,
                     const tensor::AdamConfig& adam, Rng& noise_rng);

/// Expert rollouts over every episode of a tour (`per_episode` sampled
/// shortest paths each).
std::vector<TrajectorySample> expert_trajectories(const Tour& tour, Rng& rng, int per_episode = 1);

std::string curve_csv(const std::vector<CurvePoint>& curve);

}  // namespace memoir::world
