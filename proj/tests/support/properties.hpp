#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "memoir/navigator.hpp"

namespace memoir::prop {

struct Outcome {
  std::string name;
  int cases = 0;
  int failures = 0;
  std::string first_failure;
  /// Largest observed error, for the numeric checks.
  double worst = 0.0;

  bool ok() const { return failures == 0 && cases > 0; }
  void fail(const std::string& what);
  void expect(bool condition, const std::string& what) {
    if (!condition) fail(what);
  }
  std::string summary() const;
};

// env-sim
Outcome scene_invariants(std::uint64_t seed, int cases = 40);
Outcome geodesic_matches_bellman_ford(std::uint64_t seed, int cases = 30);
Outcome expert_reaches_goal_optimally(std::uint64_t seed, int cases = 100);
Outcome triangle_inequality(std::uint64_t seed, int cases = 30);
Outcome generators_deterministic(std::uint64_t seed, int cases = 10);
Outcome scene_json_round_trip(std::uint64_t seed, int cases = 10);

// tensor-core
Outcome softmax_rows_stochastic(std::uint64_t seed, int cases = 100);
Outcome kl_nonnegative_and_self_zero(std::uint64_t seed, int cases = 100);
/// One configuration per case and layer type.
Outcome layer_gradients(std::uint64_t seed, int cases = 50);
Outcome param_snapshot_round_trip(std::uint64_t seed, int cases = 20);

// world-model
Outcome horizon_bound(std::uint64_t seed, int cases = 100);
Outcome elbo_terms_finite(std::uint64_t seed, int cases = 30);
/// elbo_overshoot_loss(D = 1) against a per-trajectory evaluation of the
/// single-step bound through the single-state API.
Outcome elbo_reduction(std::uint64_t seed, int cases = 20);
Outcome world_model_gradients(std::uint64_t seed, int cases = 50);

// hvm-memory
Outcome score_range(std::uint64_t seed, int cases = 200);
Outcome threshold_monotone(std::uint64_t seed, int cases = 100);
Outcome retrieval_matches_brute_force(std::uint64_t seed, int cases = 200);
Outcome retrieval_soundness(std::uint64_t seed, int cases = 100);
Outcome memory_snapshot_round_trip(std::uint64_t seed, int cases = 30);

// nav-model
Outcome fusion_simplex_and_decomposition(std::uint64_t seed, int cases = 20);
Outcome coarse_permutation_equivariance(std::uint64_t seed, int cases = 30);
Outcome nav_model_gradients(std::uint64_t seed, int cases = 50);
Outcome trace_legality_and_bank_monotonicity(std::uint64_t seed, int cases = 20);

// metrics-eval
Outcome metrics_match_reference(std::uint64_t seed, int cases = 100);
Outcome metric_bounds(std::uint64_t seed, int cases = 100);
Outcome trace_jsonl_round_trip(std::uint64_t seed, int cases = 30);

/// Every property above with its default case count.
std::vector<std::function<Outcome()>> invariant_suite(std::uint64_t seed);

/// Runs a decision callback at every step of every episode of `tour`,
/// following the lifted expert.
std::vector<EpisodeTrace> follow_expert(const Tour& tour, const Agent& agent, const tensor::ParamStore& params,
                                        MemoryMode mode, std::uint64_t seed,
                                        const std::function<void(const DecisionContext&, int episode)>& visit);

}  // namespace memoir::prop
