#include <map>

#include "check.hpp"
#include "fixtures.hpp"
#include "memoir/scene.hpp"
#include "memoir/scene_io.hpp"
#include "oracles.hpp"

using namespace memoir;

namespace {

/// 0 - 1 - 3 and 0 - 2 - 3, all edges of length 2.
SceneGraph diamond() {
  auto e = [](ViewpointId to, int dir) { return Edge{to, 2.0, dir}; };
  std::vector<std::vector<Edge>> adj{{e(1, 0), e(2, 1)}, {e(0, 0), e(3, 1)}, {e(0, 0), e(3, 1)}, {e(1, 0), e(2, 1)}};
  std::vector<Matrix> views(4, Matrix::Identity(2, 2));
  return SceneGraph(0, adj, views, 2);
}

/// Path 0 - 1 - 2 - 3 - 4 with unit-ish lengths.
SceneGraph path5() {
  std::vector<std::vector<Edge>> adj(5);
  for (int i = 0; i + 1 < 5; ++i) {
    adj[static_cast<std::size_t>(i)].push_back({i + 1, 1.0 + i, i == 0 ? 0 : 1});
    adj[static_cast<std::size_t>(i) + 1].push_back({i, 1.0 + i, 0});
  }
  std::vector<Matrix> views(5, Matrix::Identity(2, 2));
  return SceneGraph(3, adj, views, 2);
}

}  // namespace

TEST_CASE("scene generation is deterministic") {
  const SceneGraph a = generate_scene(7, 4, 2.0, 4, 4);
  const SceneGraph b = generate_scene(7, 4, 2.0, 4, 4);
  CHECK(scene_to_json(a) == scene_to_json(b));
  CHECK_PROPERTY(prop::generators_deterministic(11));
}

TEST_CASE("scene of one viewpoint is rejected") {
  CHECK_THROWS_AS(generate_scene(1, 1, 2.0, 4, 4), SceneError);
}

TEST_CASE("generated scenes satisfy the graph invariants") {
  CHECK(oracle::connected(oracle::edges_of(generate_scene(1, 30, 3.0, 8, 8))));
  CHECK_PROPERTY(prop::scene_invariants(12));
  CHECK_PROPERTY(prop::triangle_inequality(13));
}

TEST_CASE("scene constructor validates its input") {
  std::vector<Matrix> views(2, Matrix::Identity(2, 2));
  CHECK_THROWS_AS(SceneGraph(0, {{{1, 2.0, 0}}, {}}, views, 2), SceneError);
  CHECK_THROWS_AS(SceneGraph(0, {{{0, 2.0, 0}}, {{0, 2.0, 0}}}, views, 2), SceneError);
  CHECK_THROWS_AS(SceneGraph(0, {{{1, 0.0, 0}}, {{0, 0.0, 0}}}, views, 2), SceneError);
  std::vector<Matrix> scaled(2, 2.0 * Matrix::Identity(2, 2));
  CHECK_THROWS_AS(SceneGraph(0, {{{1, 2.0, 0}}, {{0, 2.0, 0}}}, scaled, 2), SceneError);
}

TEST_CASE("tour of one episode follows Dijkstra") {
  auto scene = std::make_shared<const SceneGraph>(path5());
  TourParams p;
  p.episodes = 1;
  p.min_path_edges = 4;
  p.max_path_edges = 4;
  const Tour t = generate_tour(scene, p, 0);
  REQUIRE(t.episodes.size() == 1);
  const Episode& ep = t.episodes.front();
  CHECK(ep.teacher_path == geodesic(*scene, ep.start, ep.goal).path);
  CHECK(path_length(*scene, ep.teacher_path) == doctest::Approx(scene->distance(ep.start, ep.goal)));
  const Tour again = generate_tour(scene, p, 0);
  CHECK(scene_to_json(*scene, &t) == scene_to_json(*scene, &again));
  p.episodes = 0;
  CHECK_THROWS(generate_tour(scene, p, 0));
}

TEST_CASE("tours have distinct start-goal pairs and shortest teacher paths") {
  const Tour t = fixture::small_tour(5, 20, 10);
  std::set<std::pair<ViewpointId, ViewpointId>> pairs;
  for (const Episode& ep : t.episodes) {
    CHECK(pairs.insert({ep.start, ep.goal}).second);
    CHECK(ep.teacher_path.front() == ep.start);
    CHECK(ep.teacher_path.back() == ep.goal);
    CHECK(same_length(path_length(*t.scene, ep.teacher_path), t.scene->distance(ep.start, ep.goal)));
  }
}

TEST_CASE("env_step") {
  const SceneGraph s = path5();
  CHECK(env_step(s, 2, kStop, 2).gamma == 0.0);
  const StepResult r = env_step(s, 1, ViewpointId{2}, 4);
  CHECK(r.position == 2);
  CHECK(r.gamma == oracle::bellman_ford(oracle::edges_of(s), 4)[2]);
  CHECK(r.observation.pooled.size() == 2);
  CHECK_THROWS_AS(env_step(s, 0, ViewpointId{2}, 4), IllegalMove);
}

TEST_CASE("expert action") {
  Rng rng(3);
  const SceneGraph s = path5();
  CHECK(expert_action(s, 3, 3, rng) == kStop);
  for (int i = 0; i < 20; ++i) CHECK(expert_action(s, 1, 4, rng) == Action{2});
  CHECK_PROPERTY(prop::expert_reaches_goal_optimally(14));
}

TEST_CASE("expert splits evenly over a diamond") {
  const SceneGraph s = diamond();
  Rng rng(99);
  std::map<ViewpointId, int> counts;
  const int n = 10000;
  for (int i = 0; i < n; ++i) ++counts[*expert_action(s, 0, 3, rng)];
  CHECK(counts.size() == 2);
  CHECK(std::abs(counts[1] / static_cast<double>(n) - 0.5) <= 0.02);
  CHECK(std::abs(counts[2] / static_cast<double>(n) - 0.5) <= 0.02);
  CHECK(optimal_next_hops(s, 0, 3) == std::vector<ViewpointId>{1, 2});
}

TEST_CASE("geodesic") {
  const SceneGraph d = diamond();
  const Geodesic self = geodesic(d, 2, 2);
  CHECK(self.distance == 0.0);
  CHECK(self.path == std::vector<ViewpointId>{2});
  CHECK(geodesic(d, 0, 3).path == std::vector<ViewpointId>{0, 1, 3});
  CHECK(geodesic(d, 0, 3).path == geodesic(d, 0, 3).path);
  CHECK(geodesic(d, 3, 0).path == std::vector<ViewpointId>{3, 1, 0});
  CHECK_PROPERTY(prop::geodesic_matches_bellman_ford(15));
}

TEST_CASE("observation pools views and maps directions") {
  const SceneGraph s = generate_scene(4, 10, 3.0, 6, 6);
  for (ViewpointId v = 0; v < s.size(); ++v) {
    const Observation o = observe(s, v);
    CHECK(o.views == s.views(v));
    CHECK((o.pooled - s.pooled(v)).norm() == 0.0);
    for (const auto& [nbr, dir] : o.neighbor_directions) CHECK(s.find_edge(v, nbr)->direction == dir);
  }
}

TEST_CASE("scene JSON round trip is bit-exact") {
  CHECK_PROPERTY(prop::scene_json_round_trip(16));
  CHECK_THROWS(scene_from_json("{\"format\": \"nope\"}"));
}
