#include "memoir/episodic_graph.hpp"

#include <algorithm>
#include <deque>
#include <stdexcept>

namespace memoir {

const char* to_string(NodeCategory c) {
  switch (c) {
    case NodeCategory::Current: return "current";
    case NodeCategory::Visited: return "visited";
    case NodeCategory::Frontier: return "frontier";
    case NodeCategory::Retrieved: return "retrieved";
  }
  return "unknown";
}

int EpisodicGraph::rank(const Node& n) {
  switch (n.category) {
    case NodeCategory::Current: return 4;
    case NodeCategory::Visited: return 3;
    case NodeCategory::Frontier: return n.completion ? 0 : 2;
    case NodeCategory::Retrieved: return 1;
  }
  return 0;
}

void EpisodicGraph::arrive(ViewpointId v, const Vector& pooled,
                           const std::vector<std::pair<ViewpointId, Vector>>& neighbors) {
  if (current_ >= 0 && current_ != v) nodes_[current_].category = NodeCategory::Visited;
  Node& here = nodes_[v];
  here.category = NodeCategory::Current;
  here.completion = false;
  here.feature = pooled;
  here.from_memory = false;
  current_ = v;

  for (const auto& [u, glimpse] : neighbors) {
    auto& [sum, count] = glimpses_[u];
    if (count == 0) sum = Vector::Zero(glimpse.size());
    sum += glimpse;
    ++count;
    auto it = nodes_.find(u);
    if (it == nodes_.end()) {
      Node n;
      n.category = NodeCategory::Frontier;
      n.feature = sum / count;
      nodes_.emplace(u, std::move(n));
    } else if (rank(it->second) < 2) {
      // Retrieved or completion node now observed directly: it keeps its
      // memory feature but ranks as an observed frontier.
      it->second.category = NodeCategory::Frontier;
      it->second.completion = false;
    } else if (it->second.category == NodeCategory::Frontier && !it->second.from_memory) {
      it->second.feature = sum / count;
    }
    add_edge(v, u);
  }
}

bool EpisodicGraph::merge_retrieved(ViewpointId v, const Vector& feature) {
  auto it = nodes_.find(v);
  if (it == nodes_.end()) {
    Node n;
    n.category = NodeCategory::Retrieved;
    n.feature = feature;
    n.from_memory = true;
    nodes_.emplace(v, std::move(n));
    return true;
  }
  Node& n = it->second;
  if (rank(n) < 1) {
    n.category = NodeCategory::Retrieved;
    n.completion = false;
    n.feature = feature;
    n.from_memory = true;
  }
  return false;
}

bool EpisodicGraph::merge_completion(ViewpointId v, const Vector& feature) {
  if (nodes_.count(v) != 0) return false;
  Node n;
  n.category = NodeCategory::Frontier;
  n.completion = true;
  n.from_memory = true;
  n.feature = feature;
  nodes_.emplace(v, std::move(n));
  return true;
}

void EpisodicGraph::add_edge(ViewpointId a, ViewpointId b) {
  if (a == b) throw std::invalid_argument("episodic graph: self-loop");
  if (!contains(a) || !contains(b)) throw std::out_of_range("episodic graph: unknown edge endpoint");
  edges_.emplace(std::min(a, b), std::max(a, b));
}

bool EpisodicGraph::has_edge(ViewpointId a, ViewpointId b) const {
  return edges_.count({std::min(a, b), std::max(a, b)}) != 0;
}

void EpisodicGraph::attach(ViewpointId v, const Vector& state, double score) {
  auto it = nodes_.find(v);
  if (it == nodes_.end()) throw std::out_of_range("episodic graph: attachment to unknown node");
  it->second.states.push_back(state);
  it->second.scores.push_back(score);
}

void EpisodicGraph::clear_attachments() {
  for (auto& [id, n] : nodes_) {
    n.states.clear();
    n.scores.clear();
  }
}

const EpisodicGraph::Node& EpisodicGraph::node(ViewpointId v) const {
  auto it = nodes_.find(v);
  if (it == nodes_.end()) throw std::out_of_range("episodic graph: unknown node " + std::to_string(v));
  return it->second;
}

std::vector<ViewpointId> EpisodicGraph::ids() const {
  std::vector<ViewpointId> out;
  out.reserve(nodes_.size());
  for (const auto& [id, n] : nodes_) out.push_back(id);
  return out;
}

std::vector<ViewpointId> EpisodicGraph::ids(NodeCategory c) const {
  std::vector<ViewpointId> out;
  for (const auto& [id, n] : nodes_) {
    if (n.category == c) out.push_back(id);
  }
  return out;
}

std::vector<ViewpointId> EpisodicGraph::neighbors(ViewpointId v) const {
  std::vector<ViewpointId> out;
  for (const auto& [a, b] : edges_) {
    if (a == v) out.push_back(b);
    if (b == v) out.push_back(a);
  }
  std::sort(out.begin(), out.end());
  return out;
}

Eigen::MatrixXd EpisodicGraph::hop_matrix(const std::vector<ViewpointId>& order) const {
  const auto n = static_cast<Eigen::Index>(order.size());
  std::map<ViewpointId, Eigen::Index> index;
  for (Eigen::Index i = 0; i < n; ++i) index[order[static_cast<std::size_t>(i)]] = i;
  std::vector<std::vector<Eigen::Index>> adj(static_cast<std::size_t>(n));
  for (const auto& [a, b] : edges_) {
    auto ia = index.find(a);
    auto ib = index.find(b);
    if (ia == index.end() || ib == index.end()) continue;
    adj[static_cast<std::size_t>(ia->second)].push_back(ib->second);
    adj[static_cast<std::size_t>(ib->second)].push_back(ia->second);
  }
  Eigen::MatrixXd e = Eigen::MatrixXd::Constant(n, n, static_cast<double>(n));
  for (Eigen::Index s = 0; s < n; ++s) {
    e(s, s) = 0.0;
    std::deque<Eigen::Index> queue{s};
    while (!queue.empty()) {
      const Eigen::Index u = queue.front();
      queue.pop_front();
      for (Eigen::Index w : adj[static_cast<std::size_t>(u)]) {
        if (e(s, w) > e(s, u) + 1.0) {
          e(s, w) = e(s, u) + 1.0;
          queue.push_back(w);
        }
      }
    }
  }
  return e;
}

}  // namespace memoir
