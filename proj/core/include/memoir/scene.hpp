#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "memoir/rng.hpp"

namespace memoir {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Dense viewpoint index into a SceneGraph, 0-based.
using ViewpointId = std::int32_t;

/// A navigation action: a target viewpoint, or STOP when empty.
using Action = std::optional<ViewpointId>;
inline constexpr std::nullopt_t kStop = std::nullopt;

/// Meters under which an episode counts as a success.
inline constexpr double kSuccessRadius = 3.0;

class IllegalMove : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class SceneError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct Edge {
  ViewpointId to = 0;
  double length = 0.0;
  /// View index at the source viewpoint oriented toward `to`.
  int direction = 0;
};

struct SceneParams {
  int num_viewpoints = 30;
  double avg_degree = 3.0;
  int feat_dim = 32;
  int view_count = 8;
  /// 0 means min(view_count, 5).
  int max_degree = 0;
  /// Noise on views that face a neighbor (relative to the neighbor's base).
  double direction_noise = 0.35;
  /// Noise on views that face no neighbor (relative to the own base).
  double ambient_noise = 0.6;
};

/// Weighted undirected viewpoint graph with K unit-norm views per viewpoint.
///
/// Immutable after construction. All-pairs geodesic and hop distances are
/// computed once in the constructor (desk-scale graphs only).
class SceneGraph {
 public:
  /// Validates every invariant; throws SceneError on violation.
  SceneGraph(std::uint64_t seed, std::vector<std::vector<Edge>> adjacency,
             std::vector<Matrix> views, int max_degree);

  std::uint64_t seed() const { return seed_; }
  int size() const { return static_cast<int>(adjacency_.size()); }
  int feat_dim() const { return static_cast<int>(views_.front().cols()); }
  int view_count() const { return static_cast<int>(views_.front().rows()); }
  int max_degree() const { return max_degree_; }
  bool contains(ViewpointId v) const { return v >= 0 && v < size(); }

  /// Neighbors sorted by id.
  std::span<const Edge> neighbors(ViewpointId v) const;
  const Edge* find_edge(ViewpointId from, ViewpointId to) const;
  bool adjacent(ViewpointId a, ViewpointId b) const { return find_edge(a, b) != nullptr; }
  double edge_length(ViewpointId a, ViewpointId b) const;
  std::size_t edge_count() const;

  /// K x F matrix, one unit-norm view per row.
  const Matrix& views(ViewpointId v) const { return views_.at(static_cast<std::size_t>(v)); }
  /// Arithmetic mean of the views.
  Vector pooled(ViewpointId v) const;

  double distance(ViewpointId a, ViewpointId b) const { return dist_(a, b); }
  int hops(ViewpointId a, ViewpointId b) const { return hops_(a, b); }

 private:
  void check(ViewpointId v) const;

  std::uint64_t seed_;
  int max_degree_;
  std::vector<std::vector<Edge>> adjacency_;
  std::vector<Matrix> views_;
  Matrix dist_;
  Eigen::MatrixXi hops_;
};

struct Episode {
  Vector instruction;
  ViewpointId start = 0;
  ViewpointId goal = 0;
  std::vector<ViewpointId> teacher_path;
};

struct Tour {
  std::shared_ptr<const SceneGraph> scene;
  std::vector<Episode> episodes;
  int id = 0;
};

struct TourParams {
  int episodes = 20;
  double instruction_noise = 0.1;
  int min_path_edges = 2;
  int max_path_edges = 6;
};

/// K directional views (o_t), their mean (x_t) and the view index facing
/// each neighbor.
struct Observation {
  Matrix views;
  Vector pooled;
  std::vector<std::pair<ViewpointId, int>> neighbor_directions;
};

struct StepResult {
  Observation observation;
  ViewpointId position = 0;
  /// Geodesic distance from `position` to the goal, in meters.
  double gamma = 0.0;
};

struct Geodesic {
  double distance = 0.0;
  std::vector<ViewpointId> path;
};

/// Procedural scene: spatially local topology, uniform [1, 10] m edge lengths.
/// Deterministic in (seed, params).
SceneGraph generate_scene(std::uint64_t seed, const SceneParams& params);
SceneGraph generate_scene(std::uint64_t seed, int n, double avg_degree, int feat_dim,
                          int view_count);

/// Episodes with distinct (start, goal) pairs, ordered by generation index.
Tour generate_tour(std::shared_ptr<const SceneGraph> scene, const TourParams& params,
                   std::uint64_t seed, int tour_id = 0);

Observation observe(const SceneGraph& scene, ViewpointId v);

/// Moves along an edge (or stays on STOP) and reports the new distance to goal.
StepResult env_step(const SceneGraph& scene, ViewpointId current, Action action,
                    ViewpointId goal);

/// Shortest path by edge length; ties go to the lexicographically smallest
/// viewpoint sequence.
Geodesic geodesic(const SceneGraph& scene, ViewpointId a, ViewpointId b);

/// STOP at the goal, otherwise a uniformly sampled neighbor lying on some
/// shortest path to the goal.
Action expert_action(const SceneGraph& scene, ViewpointId current, ViewpointId goal, Rng& rng);

/// Neighbors of `current` that lie on at least one shortest path to `goal`.
std::vector<ViewpointId> optimal_next_hops(const SceneGraph& scene, ViewpointId current,
                                           ViewpointId goal);

/// Walks expert_action from `start` until the goal; the result is one sampled
/// shortest path.
std::vector<ViewpointId> sample_expert_path(const SceneGraph& scene, ViewpointId start,
                                            ViewpointId goal, Rng& rng);

double path_length(const SceneGraph& scene, std::span<const ViewpointId> path);

/// Tolerance used when comparing sums of edge lengths.
inline bool same_length(double a, double b) {
  const double scale = std::max({1.0, std::abs(a), std::abs(b)});
  return std::abs(a - b) <= 1e-9 * scale;
}

}  // namespace memoir
