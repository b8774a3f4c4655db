#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>

#include "memoir/layers.hpp"
#include "memoir/memory.hpp"

namespace memoir {

void RetrievalConfig::validate() const {
  auto fail = [](const char* field, const char* rule) {
    throw std::invalid_argument(std::string("retrieval.") + field + " must be " + rule);
  };
  if (max_width < 1) fail("max_width", "at least 1");
  if (max_patterns < 1) fail("max_patterns", "at least 1");
  if (!(rho_o >= 0.0 && rho_o <= 1.0)) fail("rho_o", "in [0, 1]");
  if (!(theta_h >= 0.0 && theta_h <= 1.0)) fail("theta_h", "in [0, 1]");
  if (!(gamma_o > 0.0 && gamma_o <= 1.0)) fail("gamma_o", "in (0, 1]");
  if (!(gamma_h > 0.0 && gamma_h <= 1.0)) fail("gamma_h", "in (0, 1]");
}

// ---------------------------------------------------------------------------
// PersistentGraph

void PersistentGraph::observe(const SceneGraph& scene, ViewpointId v) {
  add_viewpoint(v);
  const Matrix& views = scene.views(v);
  for (const Edge& e : scene.neighbors(v)) {
    add_viewpoint(e.to);
    add_edge(v, e.to, e.length);
    add_glimpse(e.to, views.row(e.direction).transpose());
  }
}

void PersistentGraph::add_viewpoint(ViewpointId v) {
  if (v < 0) throw MemoryError("persistent graph: negative viewpoint id");
  adjacency_.try_emplace(v);
}

void PersistentGraph::add_edge(ViewpointId a, ViewpointId b, double length) {
  if (a == b) throw MemoryError("persistent graph: self-loop");
  if (!contains(a) || !contains(b)) throw MemoryError("persistent graph: edge endpoint not added");
  auto insert = [&](ViewpointId from, ViewpointId to) {
    auto& links = adjacency_[from];
    auto it = std::lower_bound(links.begin(), links.end(), to,
                               [](const Link& l, ViewpointId id) { return l.to < id; });
    if (it != links.end() && it->to == to) return;
    links.insert(it, Link{to, length});
  };
  insert(a, b);
  insert(b, a);
}

void PersistentGraph::add_glimpse(ViewpointId v, const Vector& glimpse) {
  if (!contains(v)) throw MemoryError("persistent graph: glimpse for unknown viewpoint");
  auto& [sum, count] = glimpses_[v];
  if (count == 0) sum = Vector::Zero(glimpse.size());
  sum += glimpse;
  ++count;
  glimpse_means_[v] = sum / static_cast<double>(count);
}

std::size_t PersistentGraph::edge_count() const {
  std::size_t total = 0;
  for (const auto& [v, links] : adjacency_) total += links.size();
  return total / 2;
}

const std::vector<PersistentGraph::Link>& PersistentGraph::neighbors(ViewpointId v) const {
  auto it = adjacency_.find(v);
  if (it == adjacency_.end()) throw MemoryError("persistent graph: unknown viewpoint " + std::to_string(v));
  return it->second;
}

std::vector<ViewpointId> PersistentGraph::viewpoints() const {
  std::vector<ViewpointId> out;
  out.reserve(adjacency_.size());
  for (const auto& [v, links] : adjacency_) out.push_back(v);
  return out;
}

const Vector* PersistentGraph::glimpse(ViewpointId v) const {
  auto it = glimpse_means_.find(v);
  return it == glimpse_means_.end() ? nullptr : &it->second;
}

int PersistentGraph::glimpse_count(ViewpointId v) const {
  auto it = glimpses_.find(v);
  return it == glimpses_.end() ? 0 : it->second.second;
}

std::map<ViewpointId, int> PersistentGraph::hop_distances(ViewpointId source) const {
  std::map<ViewpointId, int> dist;
  if (!contains(source)) return dist;
  dist[source] = 0;
  std::queue<ViewpointId> queue;
  queue.push(source);
  while (!queue.empty()) {
    const ViewpointId u = queue.front();
    queue.pop();
    for (const Link& l : neighbors(u)) {
      if (dist.try_emplace(l.to, dist[u] + 1).second) queue.push(l.to);
    }
  }
  return dist;
}

std::vector<ViewpointId> PersistentGraph::shortest_path(ViewpointId from, ViewpointId to) const {
  if (!contains(from) || !contains(to)) return {};
  constexpr double inf = std::numeric_limits<double>::infinity();
  std::map<ViewpointId, double> dist;
  for (const auto& [v, links] : adjacency_) dist[v] = inf;
  using Item = std::pair<double, ViewpointId>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> heap;
  dist[to] = 0.0;
  heap.emplace(0.0, to);
  while (!heap.empty()) {
    const auto [d, u] = heap.top();
    heap.pop();
    if (d > dist[u]) continue;
    for (const Link& l : neighbors(u)) {
      if (d + l.length < dist[l.to]) {
        dist[l.to] = d + l.length;
        heap.emplace(dist[l.to], l.to);
      }
    }
  }
  if (dist[from] == inf) return {};
  std::vector<ViewpointId> path{from};
  ViewpointId v = from;
  while (v != to) {
    const double remaining = dist[v];
    for (const Link& l : neighbors(v)) {
      if (same_length(l.length + dist[l.to], remaining) && dist[l.to] < remaining) {
        v = l.to;
        break;
      }
    }
    path.push_back(v);
  }
  return path;
}

bool PersistentGraph::operator==(const PersistentGraph& other) const {
  if (adjacency_.size() != other.adjacency_.size() || glimpses_.size() != other.glimpses_.size()) return false;
  for (const auto& [v, links] : adjacency_) {
    auto it = other.adjacency_.find(v);
    if (it == other.adjacency_.end() || it->second.size() != links.size()) return false;
    for (std::size_t i = 0; i < links.size(); ++i) {
      if (links[i].to != it->second[i].to || links[i].length != it->second[i].length) return false;
    }
  }
  for (const auto& [v, g] : glimpses_) {
    auto it = other.glimpses_.find(v);
    if (it == other.glimpses_.end() || it->second.second != g.second || it->second.first != g.first) return false;
  }
  return true;
}

// ---------------------------------------------------------------------------
// Banks

void ObservationBank::add(ViewpointId v, const Vector& x) {
  if (!x.allFinite()) throw MemoryError("observation bank: non-finite feature");
  Entry& e = entries_[v];
  if (e.visits == 0) {
    e.sum = x;
  } else {
    if (e.sum.size() != x.size()) throw MemoryError("observation bank: feature dimension mismatch");
    e.sum += x;
  }
  ++e.visits;
  e.mean = e.sum / static_cast<double>(e.visits);
}

const Vector& ObservationBank::feature(ViewpointId v) const {
  const Vector* x = find(v);
  if (!x) throw MemoryError("observation bank: no feature for viewpoint " + std::to_string(v));
  return *x;
}

const Vector* ObservationBank::find(ViewpointId v) const {
  auto it = entries_.find(v);
  return it == entries_.end() ? nullptr : &it->second.mean;
}

int ObservationBank::visits(ViewpointId v) const {
  auto it = entries_.find(v);
  return it == entries_.end() ? 0 : it->second.visits;
}

std::vector<ViewpointId> ObservationBank::viewpoints() const {
  std::vector<ViewpointId> out;
  for (const auto& [v, e] : entries_) out.push_back(v);
  return out;
}

bool ObservationBank::operator==(const ObservationBank& other) const {
  if (entries_.size() != other.entries_.size()) return false;
  for (const auto& [v, e] : entries_) {
    auto it = other.entries_.find(v);
    if (it == other.entries_.end() || it->second.visits != e.visits || it->second.sum != e.sum) return false;
  }
  return true;
}

namespace {

bool same_state(const LatentState& a, const LatentState& b) {
  return a.h == b.h && a.z == b.z && a.dist.mean == b.dist.mean && a.dist.log_std == b.dist.log_std;
}

}  // namespace

bool HistoryRecord::operator==(const HistoryRecord& other) const {
  if (episode != other.episode || step != other.step || !same_state(state, other.state)) return false;
  if (trajectory.states.size() != other.trajectory.states.size() ||
      trajectory.predicted_rewards != other.trajectory.predicted_rewards) {
    return false;
  }
  for (std::size_t i = 0; i < trajectory.states.size(); ++i) {
    if (!same_state(trajectory.states[i], other.trajectory.states[i])) return false;
  }
  return true;
}

void HistoryBank::add(ViewpointId v, HistoryRecord record) {
  records_[v].push_back(std::move(record));
  ++total_;
}

int HistoryBank::log_visit(int episode, ViewpointId v) {
  auto& log = logs_[episode];
  log.push_back(v);
  return static_cast<int>(log.size()) - 1;
}

std::span<const HistoryRecord> HistoryBank::records(ViewpointId v) const {
  auto it = records_.find(v);
  if (it == records_.end()) return {};
  return it->second;
}

std::vector<ViewpointId> HistoryBank::viewpoints() const {
  std::vector<ViewpointId> out;
  for (const auto& [v, r] : records_) out.push_back(v);
  return out;
}

const std::vector<ViewpointId>& HistoryBank::visit_log(int episode) const {
  static const std::vector<ViewpointId> empty;
  auto it = logs_.find(episode);
  return it == logs_.end() ? empty : it->second;
}

bool HistoryBank::operator==(const HistoryBank& other) const {
  return total_ == other.total_ && records_ == other.records_ && logs_ == other.logs_;
}

void HybridMemory::add_observation(ViewpointId v, const Vector& x) {
  if (!graph.contains(v)) throw MemoryError("add_observation: unknown viewpoint " + std::to_string(v));
  observations.add(v, x);
}

void HybridMemory::add_history(ViewpointId v, const LatentState& z, const ImaginedTrajectory& tau, int episode,
                               int step) {
  if (!graph.contains(v)) throw MemoryError("add_history: unknown viewpoint " + std::to_string(v));
  histories.add(v, HistoryRecord{z, tau, episode, step});
}

// ---------------------------------------------------------------------------
// Scoring

double unit_score(const Vector& a, const Vector& b) { return 0.5 * (tensor::cosine_sim(a, b) + 1.0); }

double score_obs(const Embedder& e, const LatentState& state, const Vector& x) {
  return unit_score(e.state(state), e.observation(x));
}

double score_hist(const Embedder& e, const LatentState& a, const LatentState& b) {
  return unit_score(e.state(a), e.state(b));
}

int retained_count(const RetrievalConfig& cfg, int step, int ring_size) {
  if (ring_size <= 0) return 0;
  const double fraction = std::clamp(1.0 - cfg.rho_o * std::pow(cfg.gamma_o, step - 1), 0.0, 1.0);
  const auto keep = static_cast<int>(std::ceil(fraction * ring_size - 1e-9));
  return std::clamp(keep, 1, ring_size);
}

double match_threshold(const RetrievalConfig& cfg, int step) { return cfg.theta_h * std::pow(cfg.gamma_h, step - 1); }

}  // namespace memoir
