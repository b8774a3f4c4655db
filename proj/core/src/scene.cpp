#include "memoir/scene.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <queue>
#include <set>

namespace memoir {
namespace {

constexpr double kMinEdgeLength = 1.0;
constexpr double kMaxEdgeLength = 10.0;

Vector random_unit(Rng& rng, int dim) {
  Vector v(dim);
  for (int i = 0; i < dim; ++i) v[i] = rng.normal();
  return v / v.norm();
}

Vector noisy_unit(const Vector& base, double noise, Rng& rng) {
  Vector v = base;
  const double scale = noise / std::sqrt(static_cast<double>(base.size()));
  for (Eigen::Index i = 0; i < v.size(); ++i) v[i] += scale * rng.normal();
  return v / v.norm();
}

Matrix all_pairs_dijkstra(const std::vector<std::vector<Edge>>& adjacency) {
  const int n = static_cast<int>(adjacency.size());
  Matrix dist = Matrix::Constant(n, n, std::numeric_limits<double>::infinity());
  using Item = std::pair<double, ViewpointId>;
  for (int source = 0; source < n; ++source) {
    std::priority_queue<Item, std::vector<Item>, std::greater<>> queue;
    dist(source, source) = 0.0;
    queue.emplace(0.0, source);
    while (!queue.empty()) {
      const auto [d, v] = queue.top();
      queue.pop();
      if (d > dist(source, v)) continue;
      for (const Edge& e : adjacency[static_cast<std::size_t>(v)]) {
        const double nd = d + e.length;
        if (nd < dist(source, e.to)) {
          dist(source, e.to) = nd;
          queue.emplace(nd, e.to);
        }
      }
    }
  }
  return dist;
}

Eigen::MatrixXi all_pairs_hops(const std::vector<std::vector<Edge>>& adjacency) {
  const int n = static_cast<int>(adjacency.size());
  Eigen::MatrixXi hops = Eigen::MatrixXi::Constant(n, n, -1);
  for (int source = 0; source < n; ++source) {
    std::queue<ViewpointId> queue;
    hops(source, source) = 0;
    queue.push(source);
    while (!queue.empty()) {
      const ViewpointId v = queue.front();
      queue.pop();
      for (const Edge& e : adjacency[static_cast<std::size_t>(v)]) {
        if (hops(source, e.to) < 0) {
          hops(source, e.to) = hops(source, v) + 1;
          queue.push(e.to);
        }
      }
    }
  }
  return hops;
}

}  // namespace

SceneGraph::SceneGraph(std::uint64_t seed, std::vector<std::vector<Edge>> adjacency,
                       std::vector<Matrix> views, int max_degree)
    : seed_(seed), max_degree_(max_degree), adjacency_(std::move(adjacency)),
      views_(std::move(views)) {
  const int n = size();
  if (n < 2) throw SceneError("scene needs at least 2 viewpoints");
  if (static_cast<int>(views_.size()) != n) throw SceneError("one view matrix per viewpoint required");
  const auto k = views_.front().rows();
  const auto f = views_.front().cols();
  if (k < 1 || f < 1) throw SceneError("empty view matrix");

  for (int v = 0; v < n; ++v) {
    auto& list = adjacency_[static_cast<std::size_t>(v)];
    std::sort(list.begin(), list.end(), [](const Edge& a, const Edge& b) { return a.to < b.to; });
    if (list.empty() || static_cast<int>(list.size()) > max_degree_) {
      throw SceneError("viewpoint " + std::to_string(v) + " violates degree bounds");
    }
    std::set<int> directions;
    for (std::size_t i = 0; i < list.size(); ++i) {
      const Edge& e = list[i];
      if (e.to == v) throw SceneError("self-loop at viewpoint " + std::to_string(v));
      if (!contains(e.to)) throw SceneError("edge to unknown viewpoint");
      if (i > 0 && list[i - 1].to == e.to) throw SceneError("duplicate edge");
      if (!(e.length > 0.0) || !std::isfinite(e.length)) throw SceneError("edge length must be positive");
      if (e.direction < 0 || e.direction >= k || !directions.insert(e.direction).second) {
        throw SceneError("invalid direction index at viewpoint " + std::to_string(v));
      }
    }
    const Matrix& m = views_[static_cast<std::size_t>(v)];
    if (m.rows() != k || m.cols() != f) throw SceneError("inconsistent view shapes");
    for (Eigen::Index r = 0; r < k; ++r) {
      if (std::abs(m.row(r).norm() - 1.0) > 1e-6) throw SceneError("view features must be unit norm");
    }
  }
  for (int v = 0; v < n; ++v) {
    for (const Edge& e : adjacency_[static_cast<std::size_t>(v)]) {
      const Edge* back = find_edge(e.to, v);
      if (back == nullptr || back->length != e.length) throw SceneError("edges must be symmetric");
    }
  }

  hops_ = all_pairs_hops(adjacency_);
  if ((hops_.array() < 0).any()) throw SceneError("scene graph is not connected");
  dist_ = all_pairs_dijkstra(adjacency_);
}

void SceneGraph::check(ViewpointId v) const {
  if (!contains(v)) throw SceneError("unknown viewpoint " + std::to_string(v));
}

std::span<const Edge> SceneGraph::neighbors(ViewpointId v) const {
  check(v);
  return adjacency_[static_cast<std::size_t>(v)];
}

const Edge* SceneGraph::find_edge(ViewpointId from, ViewpointId to) const {
  check(from);
  const auto& list = adjacency_[static_cast<std::size_t>(from)];
  auto it = std::lower_bound(list.begin(), list.end(), to,
                             [](const Edge& e, ViewpointId id) { return e.to < id; });
  return (it != list.end() && it->to == to) ? &*it : nullptr;
}

double SceneGraph::edge_length(ViewpointId a, ViewpointId b) const {
  const Edge* e = find_edge(a, b);
  if (e == nullptr) throw IllegalMove("no edge between " + std::to_string(a) + " and " + std::to_string(b));
  return e->length;
}

std::size_t SceneGraph::edge_count() const {
  std::size_t total = 0;
  for (const auto& list : adjacency_) total += list.size();
  return total / 2;
}

Vector SceneGraph::pooled(ViewpointId v) const {
  check(v);
  return views_[static_cast<std::size_t>(v)].colwise().mean().transpose();
}

SceneGraph generate_scene(std::uint64_t seed, int n, double avg_degree, int feat_dim,
                          int view_count) {
  SceneParams params;
  params.num_viewpoints = n;
  params.avg_degree = avg_degree;
  params.feat_dim = feat_dim;
  params.view_count = view_count;
  return generate_scene(seed, params);
}

SceneGraph generate_scene(std::uint64_t seed, const SceneParams& params) {
  const int n = params.num_viewpoints;
  if (n < 4) throw SceneError("generate_scene: need at least 4 viewpoints, got " + std::to_string(n));
  if (params.avg_degree < 2.0) throw SceneError("generate_scene: avg_degree must be >= 2");
  if (params.feat_dim < 4) throw SceneError("generate_scene: feat_dim must be >= 4");
  const int max_degree = params.max_degree > 0 ? params.max_degree : std::min(params.view_count, 5);
  if (max_degree < 2 || max_degree > params.view_count) {
    throw SceneError("generate_scene: max_degree must lie in [2, view_count]");
  }

  Rng rng(seed);
  std::vector<Eigen::Vector2d> position(static_cast<std::size_t>(n));
  const double side = std::sqrt(static_cast<double>(n));
  for (auto& p : position) p = {rng.uniform(0.0, side), rng.uniform(0.0, side)};
  auto planar = [&](int a, int b) {
    return (position[static_cast<std::size_t>(a)] - position[static_cast<std::size_t>(b)]).norm();
  };

  std::vector<std::vector<Edge>> adjacency(static_cast<std::size_t>(n));
  auto degree = [&](int v) { return static_cast<int>(adjacency[static_cast<std::size_t>(v)].size()); };
  auto linked = [&](int a, int b) {
    for (const Edge& e : adjacency[static_cast<std::size_t>(a)]) {
      if (e.to == b) return true;
    }
    return false;
  };
  auto link = [&](int a, int b) {
    const double length = rng.uniform(kMinEdgeLength, kMaxEdgeLength);
    adjacency[static_cast<std::size_t>(a)].push_back({b, length, 0});
    adjacency[static_cast<std::size_t>(b)].push_back({a, length, 0});
  };

  // Degree-capped Euclidean spanning tree (Prim order).
  std::vector<bool> in_tree(static_cast<std::size_t>(n), false);
  in_tree[0] = true;
  for (int added = 1; added < n; ++added) {
    double best = std::numeric_limits<double>::infinity();
    int best_u = -1;
    int best_v = -1;
    for (int u = 0; u < n; ++u) {
      if (!in_tree[static_cast<std::size_t>(u)] || degree(u) >= max_degree) continue;
      for (int v = 0; v < n; ++v) {
        if (in_tree[static_cast<std::size_t>(v)]) continue;
        const double d = planar(u, v);
        if (d < best) {
          best = d;
          best_u = u;
          best_v = v;
        }
      }
    }
    link(best_u, best_v);
    in_tree[static_cast<std::size_t>(best_v)] = true;
  }

  // Extra local edges, nearest pairs first, until the target average degree.
  const auto target_edges = static_cast<std::size_t>(std::lround(n * params.avg_degree / 2.0));
  std::vector<std::pair<int, int>> pairs;
  for (int a = 0; a < n; ++a) {
    for (int b = a + 1; b < n; ++b) pairs.emplace_back(a, b);
  }
  std::stable_sort(pairs.begin(), pairs.end(), [&](const auto& p, const auto& q) {
    return planar(p.first, p.second) < planar(q.first, q.second);
  });
  std::size_t edges = static_cast<std::size_t>(n - 1);
  for (int pass = 0; pass < 4 && edges < target_edges; ++pass) {
    for (const auto& [a, b] : pairs) {
      if (edges >= target_edges) break;
      if (linked(a, b) || degree(a) >= max_degree || degree(b) >= max_degree) continue;
      if (rng.uniform() < 0.6) {
        link(a, b);
        ++edges;
      }
    }
  }

  // Direction slots and features.
  const int k = params.view_count;
  const int f = params.feat_dim;
  std::vector<Vector> base(static_cast<std::size_t>(n));
  for (auto& b : base) b = random_unit(rng, f);
  std::vector<Matrix> views(static_cast<std::size_t>(n));
  for (int v = 0; v < n; ++v) {
    auto& list = adjacency[static_cast<std::size_t>(v)];
    std::sort(list.begin(), list.end(), [](const Edge& a, const Edge& b) { return a.to < b.to; });
    std::vector<int> slots(static_cast<std::size_t>(k));
    std::iota(slots.begin(), slots.end(), 0);
    for (int i = k - 1; i > 0; --i) {
      std::swap(slots[static_cast<std::size_t>(i)],
                slots[rng.index(static_cast<std::size_t>(i) + 1)]);
    }
    std::vector<int> facing(static_cast<std::size_t>(k), -1);
    for (std::size_t i = 0; i < list.size(); ++i) {
      list[i].direction = slots[i];
      facing[static_cast<std::size_t>(slots[i])] = list[i].to;
    }
    Matrix m(k, f);
    for (int d = 0; d < k; ++d) {
      const int target = facing[static_cast<std::size_t>(d)];
      m.row(d) = target >= 0
                     ? noisy_unit(base[static_cast<std::size_t>(target)], params.direction_noise, rng).transpose()
                     : noisy_unit(base[static_cast<std::size_t>(v)], params.ambient_noise, rng).transpose();
    }
    views[static_cast<std::size_t>(v)] = std::move(m);
  }

  return SceneGraph(seed, std::move(adjacency), std::move(views), max_degree);
}

std::vector<ViewpointId> optimal_next_hops(const SceneGraph& scene, ViewpointId current,
                                           ViewpointId goal) {
  std::vector<ViewpointId> hops;
  if (current == goal) return hops;
  const double remaining = scene.distance(current, goal);
  for (const Edge& e : scene.neighbors(current)) {
    if (same_length(e.length + scene.distance(e.to, goal), remaining)) hops.push_back(e.to);
  }
  return hops;
}

Geodesic geodesic(const SceneGraph& scene, ViewpointId a, ViewpointId b) {
  if (!scene.contains(a) || !scene.contains(b)) throw SceneError("geodesic: unknown viewpoint");
  Geodesic result{scene.distance(a, b), {a}};
  ViewpointId v = a;
  while (v != b) {
    const auto next = optimal_next_hops(scene, v, b);
    // Distances come from a connected graph, so a next hop always exists.
    v = next.front();
    result.path.push_back(v);
  }
  return result;
}

Action expert_action(const SceneGraph& scene, ViewpointId current, ViewpointId goal, Rng& rng) {
  if (!scene.contains(current) || !scene.contains(goal)) throw SceneError("expert_action: unknown viewpoint");
  if (current == goal) return kStop;
  const auto hops = optimal_next_hops(scene, current, goal);
  return hops[rng.index(hops.size())];
}

std::vector<ViewpointId> sample_expert_path(const SceneGraph& scene, ViewpointId start,
                                            ViewpointId goal, Rng& rng) {
  std::vector<ViewpointId> path{start};
  for (Action a = expert_action(scene, start, goal, rng); a; a = expert_action(scene, *a, goal, rng)) {
    path.push_back(*a);
  }
  return path;
}

double path_length(const SceneGraph& scene, std::span<const ViewpointId> path) {
  double total = 0.0;
  for (std::size_t i = 1; i < path.size(); ++i) {
    if (path[i] != path[i - 1]) total += scene.edge_length(path[i - 1], path[i]);
  }
  return total;
}

Observation observe(const SceneGraph& scene, ViewpointId v) {
  Observation obs;
  obs.views = scene.views(v);
  obs.pooled = scene.pooled(v);
  for (const Edge& e : scene.neighbors(v)) obs.neighbor_directions.emplace_back(e.to, e.direction);
  return obs;
}

StepResult env_step(const SceneGraph& scene, ViewpointId current, Action action, ViewpointId goal) {
  if (!scene.contains(current) || !scene.contains(goal)) throw SceneError("env_step: unknown viewpoint");
  ViewpointId next = current;
  if (action) {
    if (!scene.adjacent(current, *action)) {
      throw IllegalMove("illegal move " + std::to_string(current) + " -> " + std::to_string(*action));
    }
    next = *action;
  }
  return {observe(scene, next), next, scene.distance(next, goal)};
}

Tour generate_tour(std::shared_ptr<const SceneGraph> scene, const TourParams& params,
                   std::uint64_t seed, int tour_id) {
  if (!scene) throw SceneError("generate_tour: null scene");
  if (params.episodes < 1) throw SceneError("generate_tour: need at least one episode");
  const int n = scene->size();

  std::vector<std::pair<ViewpointId, ViewpointId>> pairs;
  std::vector<std::vector<ViewpointId>> paths;
  for (ViewpointId s = 0; s < n; ++s) {
    for (ViewpointId g = 0; g < n; ++g) {
      if (s == g) continue;
      auto path = geodesic(*scene, s, g).path;
      const auto edges = static_cast<int>(path.size()) - 1;
      if (edges < params.min_path_edges || edges > params.max_path_edges) continue;
      pairs.emplace_back(s, g);
      paths.push_back(std::move(path));
    }
  }
  if (static_cast<int>(pairs.size()) < params.episodes) {
    throw SceneError("generate_tour: scene admits only " + std::to_string(pairs.size()) +
                     " distinct episodes, " + std::to_string(params.episodes) + " requested");
  }

  Rng rng(seed);
  std::vector<std::size_t> order(pairs.size());
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t i = 0; i < static_cast<std::size_t>(params.episodes); ++i) {
    std::swap(order[i], order[i + rng.index(order.size() - i)]);
  }

  Tour tour{scene, {}, tour_id};
  const int f = scene->feat_dim();
  for (int i = 0; i < params.episodes; ++i) {
    const std::size_t pick = order[static_cast<std::size_t>(i)];
    Episode ep;
    ep.start = pairs[pick].first;
    ep.goal = pairs[pick].second;
    ep.teacher_path = paths[pick];
    Vector path_mean = Vector::Zero(f);
    for (ViewpointId v : ep.teacher_path) path_mean += scene->pooled(v);
    path_mean /= static_cast<double>(ep.teacher_path.size());
    for (int j = 0; j < f; ++j) path_mean[j] += params.instruction_noise * rng.normal();
    ep.instruction.resize(2 * f);
    ep.instruction << scene->pooled(ep.goal), path_mean;
    tour.episodes.push_back(std::move(ep));
  }
  return tour;
}

}  // namespace memoir
