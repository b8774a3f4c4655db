#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "memoir/episodic_graph.hpp"
#include "memoir/scene.hpp"
#include "memoir/world_model.hpp"

namespace memoir {

using world::ImaginedTrajectory;
using world::LatentState;

class MemoryError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct RetrievalConfig {
  /// W: survivors kept per imagination step.
  int max_width = 12;
  /// rho_o: base filter rate of the observation rings.
  double rho_o = 0.2;
  /// gamma_o: per-step decay of the filter rate.
  double gamma_o = 0.8;
  /// theta_h: base matching threshold of history patterns.
  double theta_h = 0.2;
  /// gamma_h: per-step decay of the matching threshold.
  double gamma_h = 0.8;
  /// P: patterns kept.
  int max_patterns = 10;
  /// Merge the persistent-graph neighbors of every retrieved viewpoint.
  bool neighbor_completion = true;

  void validate() const;
};

/// Union of every viewpoint and edge observed so far in a tour, with the
/// averaged directional glimpse of each viewpoint.
class PersistentGraph {
 public:
  struct Link {
    ViewpointId to = 0;
    double length = 0.0;
  };

  /// Adds `v`, its neighbors, the connecting edges and the glimpse of each
  /// neighbor as seen from `v`.
  void observe(const SceneGraph& scene, ViewpointId v);
  void add_viewpoint(ViewpointId v);
  void add_edge(ViewpointId a, ViewpointId b, double length);
  void add_glimpse(ViewpointId v, const Vector& glimpse);

  bool contains(ViewpointId v) const { return adjacency_.count(v) != 0; }
  std::size_t size() const { return adjacency_.size(); }
  std::size_t edge_count() const;
  /// Sorted by neighbor id.
  const std::vector<Link>& neighbors(ViewpointId v) const;
  std::vector<ViewpointId> viewpoints() const;
  /// Mean of the glimpses recorded for `v`, or nullptr.
  const Vector* glimpse(ViewpointId v) const;
  int glimpse_count(ViewpointId v) const;

  /// Unweighted BFS distances from `source` to every reachable viewpoint.
  std::map<ViewpointId, int> hop_distances(ViewpointId source) const;
  /// Shortest weighted path; ties go to the lexicographically smallest
  /// sequence. Empty when unreachable.
  std::vector<ViewpointId> shortest_path(ViewpointId from, ViewpointId to) const;

  bool operator==(const PersistentGraph& other) const;

 private:
  friend struct MemorySnapshotAccess;
  std::map<ViewpointId, std::vector<Link>> adjacency_;
  std::map<ViewpointId, std::pair<Vector, int>> glimpses_;
  std::map<ViewpointId, Vector> glimpse_means_;
};

/// M_o: pooled feature per visited viewpoint, averaged over visits.
class ObservationBank {
 public:
  void add(ViewpointId v, const Vector& x);
  bool contains(ViewpointId v) const { return entries_.count(v) != 0; }
  const Vector& feature(ViewpointId v) const;
  const Vector* find(ViewpointId v) const;
  int visits(ViewpointId v) const;
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  std::vector<ViewpointId> viewpoints() const;

  bool operator==(const ObservationBank& other) const;

 private:
  friend struct MemorySnapshotAccess;
  struct Entry {
    Vector sum;
    Vector mean;
    int visits = 0;
  };
  std::map<ViewpointId, Entry> entries_;
};

struct HistoryRecord {
  LatentState state;
  ImaginedTrajectory trajectory;
  int episode = 0;
  /// Position of the anchor viewpoint in the episode's visit log.
  int step = 0;

  bool operator==(const HistoryRecord& other) const;
};

/// M_h: per-viewpoint lists of (state, imagined trajectory) records plus the
/// ordered log of viewpoints each episode physically passed through.
class HistoryBank {
 public:
  void add(ViewpointId v, HistoryRecord record);
  /// Appends `v` to the visit log of `episode`; returns its index.
  int log_visit(int episode, ViewpointId v);

  std::span<const HistoryRecord> records(ViewpointId v) const;
  std::size_t record_count() const { return total_; }
  std::vector<ViewpointId> viewpoints() const;
  const std::vector<ViewpointId>& visit_log(int episode) const;
  const std::map<int, std::vector<ViewpointId>>& visit_logs() const { return logs_; }

  bool operator==(const HistoryBank& other) const;

 private:
  friend struct MemorySnapshotAccess;
  std::map<ViewpointId, std::vector<HistoryRecord>> records_;
  std::map<int, std::vector<ViewpointId>> logs_;
  std::size_t total_ = 0;
};

/// Persistent graph and both banks for one tour.
struct HybridMemory {
  PersistentGraph graph;
  ObservationBank observations;
  HistoryBank histories;

  /// Throws MemoryError when `v` is not in the persistent graph.
  void add_observation(ViewpointId v, const Vector& x);
  void add_history(ViewpointId v, const LatentState& z, const ImaginedTrajectory& tau, int episode, int step);

  bool operator==(const HybridMemory& other) const = default;
};

/// Embedding heads used by the scoring functions.
class Embedder {
 public:
  virtual ~Embedder() = default;
  virtual Vector state(const LatentState& s) const = 0;
  virtual Vector observation(const Vector& x) const = 0;
};

/// psi_s and psi_o of a world model under fixed parameters.
class WorldModelEmbedder final : public Embedder {
 public:
  WorldModelEmbedder(const world::WorldModel& model, const tensor::ParamStore& params)
      : model_(model), params_(params) {}
  Vector state(const LatentState& s) const override { return model_.state_embedding(params_, s); }
  Vector observation(const Vector& x) const override { return model_.obs_embedding(params_, x); }

 private:
  const world::WorldModel& model_;
  const tensor::ParamStore& params_;
};

/// (cos(a, b) + 1) / 2 on embeddings; throws on zero vectors.
double unit_score(const Vector& a, const Vector& b);
double score_obs(const Embedder& e, const LatentState& state, const Vector& x);
double score_hist(const Embedder& e, const LatentState& a, const LatentState& b);

/// Ring retention count: max(1, ceil(fraction * ring)), with fraction
/// 1 - rho_o * gamma_o^(step-1) clamped to [0, 1].
int retained_count(const RetrievalConfig& cfg, int step, int ring_size);
/// theta_h * gamma_h^(step-1).
double match_threshold(const RetrievalConfig& cfg, int step);

struct ObservationSelection {
  /// Retrieved viewpoints R in ascending order, never containing v_t.
  std::vector<ViewpointId> retrieved;
  /// Per imagination step: ring members scored and the survivors kept.
  std::vector<std::vector<ViewpointId>> rings;
  std::vector<std::vector<ViewpointId>> survivors;
  std::vector<std::vector<double>> ring_scores;
};

struct PatternMatch {
  ViewpointId anchor = 0;
  int episode = 0;
  int step = 0;
  /// Index within the anchor's record list.
  int record = 0;
  std::vector<double> scores;
  double min_score = 0.0;
  /// Viewpoints visited after the record, at most |scores| of them.
  std::vector<ViewpointId> traced;
};

struct HistorySelection {
  /// Kept patterns in rank order.
  std::vector<PatternMatch> patterns;
  /// Patterns with a nonzero match length before truncation to P.
  int matched = 0;
};

struct MergeStats {
  std::vector<ViewpointId> added;
  /// Viewpoints skipped because M_o had no feature for them.
  int missing_features = 0;
};

/// Ring filtering over imagination steps (selection part of observation
/// retrieval). Throws MemoryError when v_t is not in the persistent graph.
ObservationSelection select_observations(const RetrievalConfig& cfg, const PersistentGraph& graph,
                                         ViewpointId current, std::span<const LatentState> imagined,
                                         const ObservationBank& bank, const Embedder& embedder);

/// Pattern matching and ranking over the records anchored at v_t.
HistorySelection select_histories(const RetrievalConfig& cfg, const PersistentGraph& graph, ViewpointId current,
                                  std::span<const LatentState> imagined, const HistoryBank& bank,
                                  const Embedder& embedder);

/// Merges viewpoints with their M_o feature as retrieved nodes, plus their
/// persistent-graph edges to nodes already in G_t and (when enabled) their
/// neighbors as completion nodes.
MergeStats merge_viewpoints(EpisodicGraph& g, std::span<const ViewpointId> viewpoints, const RetrievalConfig& cfg,
                            const PersistentGraph& graph, const ObservationBank& bank);

struct ObservationRetrieval {
  ObservationSelection selection;
  MergeStats merge;
};

struct HistoryRetrieval {
  HistorySelection selection;
  MergeStats merge;
};

ObservationRetrieval retrieve_observations(const RetrievalConfig& cfg, const PersistentGraph& graph,
                                           ViewpointId current, std::span<const LatentState> imagined,
                                           const ObservationBank& bank, const Embedder& embedder, EpisodicGraph& g);

/// Also attaches (z'_i, c_i) of each kept pattern to its i-th traced node.
HistoryRetrieval retrieve_histories(const RetrievalConfig& cfg, const PersistentGraph& graph, ViewpointId current,
                                    std::span<const LatentState> imagined, const HistoryBank& histories,
                                    const ObservationBank& bank, const Embedder& embedder, EpisodicGraph& g);

inline constexpr int kMemorySnapshotVersion = 1;

/// Versioned binary container; lossless.
std::string snapshot(const HybridMemory& memory);
/// Throws ContainerError on version mismatch or corrupt payload.
HybridMemory restore(std::string_view bytes);

}  // namespace memoir
