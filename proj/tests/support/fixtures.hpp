#pragma once

#include <memory>
#include <vector>

#include "memoir/experiment_config.hpp"
#include "memoir/memory.hpp"
#include "memoir/navigator.hpp"
#include "memoir/scene.hpp"

namespace memoir::fixture {

/// Fixed random linear maps standing in for psi_s and psi_o.
class LinearEmbedder final : public Embedder {
 public:
  LinearEmbedder(Rng& rng, int state_dim, int feat_dim, int embed_dim);
  Vector state(const LatentState& s) const override { return a_ * s.full(); }
  Vector observation(const Vector& x) const override { return b_ * x; }

 private:
  Matrix a_;
  Matrix b_;
};

Vector random_vector(Rng& rng, int n);
Vector random_unit(Rng& rng, int n);
LatentState random_state(Rng& rng, int hidden, int stoch);

/// Persistent graph, banks, imagined trajectory and config for one
/// retrieval query. Integer edge lengths and a small feature palette make
/// ties common.
struct RetrievalInstance {
  int hidden = 3;
  int stoch = 2;
  int feat = 4;
  RetrievalConfig cfg;
  PersistentGraph graph;
  HybridMemory memory;
  ViewpointId current = 0;
  std::vector<LatentState> imagined;
  std::shared_ptr<LinearEmbedder> embedder;
};

/// Graphs of at most `max_nodes` viewpoints, horizons up to `max_horizon`,
/// at most `max_records` history records.
RetrievalInstance random_retrieval_instance(Rng& rng, int max_nodes = 30, int max_horizon = 5,
                                            int max_records = 100);

/// Small agent dims suitable for finite differences and fast rollouts.
AgentConfig tiny_agent(int feat_dim, Rng& rng);

/// A scene plus one tour, sized for unit tests.
Tour small_tour(std::uint64_t seed, int viewpoints = 12, int episodes = 4, int feat_dim = 6);

/// Random legal trace on `scene` with random retrieval logs.
EpisodeTrace random_trace(const SceneGraph& scene, const Episode& episode, Rng& rng, int max_steps = 6);

/// Episode between two random distinct viewpoints with a sampled shortest
/// teacher path.
Episode random_episode(const SceneGraph& scene, Rng& rng);

}  // namespace memoir::fixture
