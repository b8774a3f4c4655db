#include <cmath>

#include "check.hpp"
#include "fixtures.hpp"
#include "memoir/imitation.hpp"
#include "memoir/nav_model.hpp"
#include "memoir/navigator.hpp"

using namespace memoir;
using namespace memoir::nav;

namespace {

NavModelConfig small_config() {
  NavModelConfig c;
  c.feat_dim = 4;
  c.state_dim = 4;
  c.model_dim = 5;
  c.ffn_dim = 6;
  return c;
}

Vector feature(Rng& rng) { return fixture::random_unit(rng, 4); }

/// Visited 4 and 1, current 0, frontier 2 (adjacent) and 3 (behind 1).
EpisodicGraph lift_graph(Rng& rng) {
  EpisodicGraph g;
  g.arrive(4, feature(rng), {{0, feature(rng)}});
  g.arrive(1, feature(rng), {{0, feature(rng)}, {3, feature(rng)}});
  g.arrive(0, feature(rng), {{1, feature(rng)}, {2, feature(rng)}, {4, feature(rng)}});
  return g;
}

NavInputs lift_inputs(const EpisodicGraph& g, Rng& rng) {
  NavInputs in;
  in.graph = &g;
  in.instruction = fixture::random_vector(rng, 8);
  in.views = Matrix(3, 4);
  for (Eigen::Index k = 0; k < 3; ++k) in.views.row(k) = feature(rng).transpose();
  in.directions = {{1, 0}, {2, 1}, {4, 2}};
  return in;
}

}  // namespace

TEST_CASE("single-node graph gives a STOP and a node score") {
  const NavModel model(small_config());
  const ParamStore p = model.init_params(1);
  Rng rng(2);
  EpisodicGraph g;
  g.arrive(0, feature(rng), {});
  Graph graph(&p);
  const CoarseOutput c = model.coarse(graph, g, model.text(graph, fixture::random_vector(rng, 8)));
  CHECK(c.scores.rows() == 2);
  CHECK(c.scores.value().allFinite());
}

TEST_CASE("constant distance bias leaves coarse scores unchanged") {
  const NavModel model(small_config());
  ParamStore p = model.init_params(3);
  Rng rng(4);
  const EpisodicGraph g = lift_graph(rng);
  const Vector instr = fixture::random_vector(rng, 8);
  auto run = [&](double w, double b) {
    p.value("nav.coarse.w_e")(0, 0) = w;
    p.value("nav.coarse.b_e")(0, 0) = b;
    Graph graph(&p);
    return Matrix(model.coarse(graph, g, model.text(graph, instr)).scores.value());
  };
  const Matrix plain = run(0.0, 0.0);
  CHECK((run(0.0, 2.5) - plain).norm() <= 1e-12);
  CHECK((run(1.5, 0.0) - plain).norm() > 1e-9);
}

TEST_CASE("coarse branch is permutation equivariant") { CHECK_PROPERTY(prop::coarse_permutation_equivariance(51)); }

TEST_CASE("fine scores lift onto graph candidates") {
  const NavModel model(small_config());
  const ParamStore p = model.init_params(5);
  Rng rng(6);
  const EpisodicGraph g = lift_graph(rng);
  const NavInputs in = lift_inputs(g, rng);
  const BranchScores s = model.score(p, in);
  REQUIRE(s.candidates == std::vector<Action>{kStop, ViewpointId{2}, ViewpointId{3}});
  REQUIRE(s.view_scores.size() == 3);
  CHECK(s.fine[1] == s.view_scores[1]);
  const double back = std::log(std::exp(s.view_scores[0]) + std::exp(s.view_scores[2]));
  CHECK(std::abs(s.s_back - back) <= 1e-12);
  CHECK(std::abs(s.fine[2] - back) <= 1e-12);

  // Without visited neighbors the non-adjacent candidate is masked.
  EpisodicGraph fresh;
  fresh.arrive(0, feature(rng), {{1, feature(rng)}, {2, feature(rng)}});
  fresh.merge_retrieved(5, feature(rng));
  fresh.add_edge(1, 5);
  NavInputs fin = in;
  fin.graph = &fresh;
  fin.directions = {{1, 0}, {2, 1}};
  const BranchScores f = model.score(p, fin);
  CHECK(f.s_back == kMasked);
  REQUIRE(f.candidates.size() == 4);
  CHECK(f.fine[1] == f.view_scores[0]);
  CHECK(f.fine[2] == f.view_scores[1]);
  CHECK(f.final[3] == kMasked);
  CHECK(select_action(f.candidates, f.final) != Action{5});
}

TEST_CASE("fuse_history") {
  Rng rng(7);
  const Vector x = fixture::random_vector(rng, 4);
  const Vector z1 = fixture::random_vector(rng, 4);
  const Vector z2 = fixture::random_vector(rng, 4);
  CHECK(fuse_history({}, {}, x, 0.1) == x);
  CHECK((fuse_history({z1}, {0.3}, x, 0.1) - (z1 + x)).norm() <= 1e-15);
  CHECK((fuse_history({z1, z2}, {0.7, 0.7}, x, 0.1) - ((z1 + z2) / 2.0 + x)).norm() <= 1e-12);
  for (int i = 0; i < 20; ++i) {
    std::vector<Vector> zs;
    std::vector<double> cs;
    const int n = 1 + static_cast<int>(rng.index(4));
    for (int k = 0; k < n; ++k) {
      zs.push_back(fixture::random_vector(rng, 4));
      cs.push_back(rng.uniform());
    }
    double norm = 0.0;
    for (double c : cs) norm += std::exp(c / 0.1);
    Vector want = x;
    for (int k = 0; k < n; ++k) want += std::exp(cs[static_cast<std::size_t>(k)] / 0.1) / norm * zs[static_cast<std::size_t>(k)];
    CHECK((fuse_history(zs, cs, x, 0.1) - want).norm() <= 1e-9);
  }
  CHECK_THROWS(fuse_history({z1}, {}, x, 0.1));
}

TEST_CASE("fusion head forced to coarse") {
  const NavModel model(small_config());
  ParamStore p = model.init_params(8);
  p.value("nav.fuse.1.W").setZero();
  p.value("nav.fuse.1.b") << -1e3, 0.0, -1e3;
  Rng rng(9);
  const EpisodicGraph g = lift_graph(rng);
  const BranchScores s = model.score(p, lift_inputs(g, rng));
  CHECK(s.sigma.coarse == 1.0);
  for (std::size_t k = 0; k < s.final.size(); ++k) CHECK(s.final[k] == s.coarse[k]);
  CHECK_PROPERTY(prop::fusion_simplex_and_decomposition(52));
}

TEST_CASE("select_action") {
  const std::vector<Action> c{kStop, ViewpointId{7}, ViewpointId{3}};
  CHECK(select_action(c, {2.0, 1.0, 1.5}) == kStop);
  CHECK(select_action(c, {0.0, 1.0, 1.0}) == Action{3});
  CHECK(select_action(c, {1.0, 1.0, 1.0}) == kStop);
  CHECK(select_action(c, {kMasked, 1.0, kMasked}) == Action{7});
  CHECK_THROWS(select_action(c, {1.0}));
}

TEST_CASE("routes through the episodic graph follow the geodesic") {
  PersistentGraph known;
  EpisodicGraph g;
  Rng rng(10);
  for (ViewpointId v = 0; v < 5; ++v) known.add_viewpoint(v);
  for (ViewpointId v = 0; v + 1 < 5; ++v) known.add_edge(v, v + 1, 1.0 + v);
  for (ViewpointId v = 0; v < 4; ++v) g.arrive(v, feature(rng), {{v + 1, feature(rng)}});
  g.arrive(0, feature(rng), {{1, feature(rng)}});
  CHECK(episodic_route(g, known, 0, 4) == std::vector<ViewpointId>{0, 1, 2, 3, 4});
  CHECK(episodic_route(g, known, 0, 9).empty());
}

TEST_CASE("navigation modes") {
  Rng rng(11);
  AgentConfig cfg = fixture::tiny_agent(6, rng);
  const Tour tour = fixture::small_tour(12, 14, 4, 6);
  const Agent agent(cfg);
  const ParamStore p = agent.init_params(13);

  NavigateOptions o;
  o.mode = MemoryMode::NoMemory;
  HybridMemory memory;
  Rng run(1);
  const auto traces = navigate_tour(tour, agent, p, run, o, &memory);
  for (const auto& t : traces) {
    for (const auto& st : t.steps) {
      CHECK(st.retrieved_obs.empty());
      CHECK(st.patterns.empty());
    }
  }
  CHECK(memory.observations.size() > 0);
  CHECK(memory.histories.record_count() > 0);

  cfg.max_steps = 1;
  const Agent one(cfg);
  Rng run2(2);
  for (const auto& t : navigate_tour(tour, one, p, run2, o)) CHECK(t.steps.size() <= 1);
  CHECK_PROPERTY(prop::trace_legality_and_bank_monotonicity(53));
}

TEST_CASE("oracle memory retrieves teacher viewpoints") {
  Rng rng(14);
  const AgentConfig cfg = fixture::tiny_agent(6, rng);
  const Tour tour = fixture::small_tour(15, 10, 6, 6);
  const Agent agent(cfg);
  const ParamStore p = agent.init_params(16);
  NavigateOptions o;
  o.mode = MemoryMode::Oracle;
  HybridMemory memory;
  Rng run(3);
  int checked = 0;
  for (std::size_t e = 0; e < tour.episodes.size(); ++e) {
    const Episode& ep = tour.episodes[e];
    const EpisodeTrace t = navigate_episode(*tour.scene, ep, 0, static_cast<int>(e), memory, agent, p, run, o);
    for (const StepTrace& st : t.steps) {
      std::set<ViewpointId> bank(st.bank_viewpoints.begin(), st.bank_viewpoints.end());
      std::vector<ViewpointId> want;
      for (ViewpointId v : ep.teacher_path) {
        if (v != st.current && bank.count(v) && tour.scene->hops(st.current, v) <= cfg.world.max_horizon) {
          want.push_back(v);
        }
      }
      std::sort(want.begin(), want.end());
      want.erase(std::unique(want.begin(), want.end()), want.end());
      CHECK(st.retrieved_obs == want);
      ++checked;
    }
  }
  CHECK(checked > 0);
}

TEST_CASE("imitation learning") {
  Rng rng(17);
  const AgentConfig cfg = fixture::tiny_agent(6, rng);
  const Agent agent(cfg);
  const std::vector<Tour> tours{fixture::small_tour(18, 12, 4, 6)};
  const ParamStore init = agent.init_params(19);
  ImitationOptions o;
  o.epochs = 1;
  o.lr = 0.0;
  const ImitationResult frozen = train_imitation(tours, agent, init, o);
  for (const auto& name : init.names()) CHECK(frozen.params.value(name) == init.value(name));

  o.lr = 1e-2;
  o.epochs = 2;
  o.seed = 5;
  const ImitationResult a = train_imitation(tours, agent, init, o);
  const ImitationResult b = train_imitation(tours, agent, init, o);
  CHECK(a.params.to_bytes() == b.params.to_bytes());
  CHECK_PROPERTY(prop::nav_model_gradients(54, 15));
}

TEST_CASE("imitation raises expert agreement") {
  Rng rng(20);
  AgentConfig cfg = fixture::tiny_agent(8, rng);
  cfg.nav.model_dim = 16;
  cfg.nav.ffn_dim = 16;
  cfg.max_steps = 10;
  const Agent agent(cfg);
  std::vector<Tour> tours;
  for (int s = 0; s < 3; ++s) tours.push_back(fixture::small_tour(200 + s, 20, 8, 8));
  const ParamStore init = agent.init_params(21);
  ImitationOptions o;
  o.epochs = 8;
  o.lr = 3e-3;
  o.seed = 6;
  const ImitationResult r = train_imitation(tours, agent, init, o);
  const double before = expert_agreement(tours, agent, init, MemoryMode::Memoir, 7);
  const double after = expert_agreement(tours, agent, r.params, MemoryMode::Memoir, 7);
  CHECK(after > before);
}
