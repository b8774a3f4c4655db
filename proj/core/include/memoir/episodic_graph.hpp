#pragma once

#include <map>
#include <set>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "memoir/scene.hpp"

namespace memoir {

enum class NodeCategory { Current, Visited, Frontier, Retrieved };

const char* to_string(NodeCategory c);

/// Per-episode topological map G_t.
///
/// Node categories follow a precedence order: current > visited > observed
/// frontier > retrieved > completion (a neighbor of a retrieved node, shown
/// as a frontier). Merging never downgrades a node.
class EpisodicGraph {
 public:
  struct Node {
    NodeCategory category = NodeCategory::Frontier;
    Vector feature;
    /// History attachments (Z_j, C_j) from pattern retrieval at this step.
    std::vector<Vector> states;
    std::vector<double> scores;
    /// Added only through neighbor completion.
    bool completion = false;
    /// Feature came from the memory banks rather than the current episode.
    bool from_memory = false;
  };

  /// Moves the agent to `v`: the previous current node becomes visited,
  /// `v` becomes current with feature `pooled`, and every `(neighbor,
  /// glimpse)` pair is added as an observed frontier node and edge.
  void arrive(ViewpointId v, const Vector& pooled, const std::vector<std::pair<ViewpointId, Vector>>& neighbors);

  /// Adds or upgrades a node recovered from memory. Returns true if the
  /// node was not present before.
  bool merge_retrieved(ViewpointId v, const Vector& feature);
  /// Adds a completion node; existing nodes are left untouched.
  bool merge_completion(ViewpointId v, const Vector& feature);
  void add_edge(ViewpointId a, ViewpointId b);

  void attach(ViewpointId v, const Vector& state, double score);
  void clear_attachments();

  bool contains(ViewpointId v) const { return nodes_.count(v) != 0; }
  const Node& node(ViewpointId v) const;
  std::size_t size() const { return nodes_.size(); }
  bool empty() const { return nodes_.empty(); }
  /// Node ids in ascending order.
  std::vector<ViewpointId> ids() const;
  std::vector<ViewpointId> ids(NodeCategory c) const;
  const std::set<std::pair<ViewpointId, ViewpointId>>& edges() const { return edges_; }
  bool has_edge(ViewpointId a, ViewpointId b) const;
  std::vector<ViewpointId> neighbors(ViewpointId v) const;
  /// -1 before the first arrive().
  ViewpointId current() const { return current_; }

  /// Hop distances between `order` nodes in G_t; unreachable pairs get
  /// `order.size()`.
  Eigen::MatrixXd hop_matrix(const std::vector<ViewpointId>& order) const;

 private:
  static int rank(const Node& n);

  std::map<ViewpointId, Node> nodes_;
  std::set<std::pair<ViewpointId, ViewpointId>> edges_;
  std::map<ViewpointId, std::pair<Vector, int>> glimpses_;
  ViewpointId current_ = -1;
};

}  // namespace memoir
