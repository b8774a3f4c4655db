#include "fixtures.hpp"

#include <algorithm>
#include <set>

namespace memoir::fixture {

LinearEmbedder::LinearEmbedder(Rng& rng, int state_dim, int feat_dim, int embed_dim)
    : a_(embed_dim, state_dim), b_(embed_dim, feat_dim) {
  for (Eigen::Index i = 0; i < a_.size(); ++i) a_.data()[i] = rng.normal();
  for (Eigen::Index i = 0; i < b_.size(); ++i) b_.data()[i] = rng.normal();
}

Vector random_vector(Rng& rng, int n) {
  Vector v(n);
  for (int i = 0; i < n; ++i) v[i] = rng.normal();
  return v;
}

Vector random_unit(Rng& rng, int n) { return random_vector(rng, n).normalized(); }

LatentState random_state(Rng& rng, int hidden, int stoch) {
  LatentState s;
  s.h = random_vector(rng, hidden);
  s.dist.mean = random_vector(rng, stoch);
  s.dist.log_std = Vector::Constant(stoch, -1.0);
  s.z = s.dist.mean;
  return s;
}

RetrievalInstance random_retrieval_instance(Rng& rng, int max_nodes, int max_horizon, int max_records) {
  RetrievalInstance in;
  const int n = 2 + static_cast<int>(rng.index(static_cast<std::size_t>(max_nodes - 1)));
  in.embedder = std::make_shared<LinearEmbedder>(rng, in.hidden + in.stoch, in.feat, 3);

  // Sparse, non-contiguous ids.
  std::vector<ViewpointId> ids;
  for (int i = 0; i < n; ++i) ids.push_back(3 * i + static_cast<int>(rng.index(3)));
  for (ViewpointId v : ids) in.memory.graph.add_viewpoint(v);
  const bool split = rng.uniform() < 0.2;
  for (int i = 1; i < n; ++i) {
    if (split && i == n / 2) continue;
    const ViewpointId parent = ids[rng.index(static_cast<std::size_t>(i))];
    in.memory.graph.add_edge(ids[static_cast<std::size_t>(i)], parent, 1.0 + static_cast<double>(rng.index(3)));
  }
  const int extra = static_cast<int>(rng.index(static_cast<std::size_t>(n)));
  for (int k = 0; k < extra; ++k) {
    const ViewpointId a = ids[rng.index(ids.size())];
    const ViewpointId b = ids[rng.index(ids.size())];
    if (a != b) in.memory.graph.add_edge(a, b, 1.0 + static_cast<double>(rng.index(3)));
  }
  in.graph = in.memory.graph;

  std::vector<Vector> palette;
  for (int i = 0; i < 4; ++i) palette.push_back(random_unit(rng, in.feat));
  const double coverage = rng.uniform(0.2, 1.0);
  for (ViewpointId v : ids) {
    if (rng.uniform() >= coverage) continue;
    const Vector x = rng.uniform() < 0.4 ? palette[rng.index(palette.size())] : random_unit(rng, in.feat);
    in.memory.add_observation(v, x);
  }

  in.current = ids[rng.index(ids.size())];
  const int horizon = 1 + static_cast<int>(rng.index(static_cast<std::size_t>(max_horizon)));
  std::vector<LatentState> state_palette;
  for (int i = 0; i < 3; ++i) state_palette.push_back(random_state(rng, in.hidden, in.stoch));
  auto pick_state = [&] {
    return rng.uniform() < 0.3 ? state_palette[rng.index(state_palette.size())]
                               : random_state(rng, in.hidden, in.stoch);
  };
  for (int i = 0; i < horizon; ++i) in.imagined.push_back(pick_state());

  // Episodes walk the graph; records sit on logged visits, biased toward
  // the query viewpoint.
  const int records = static_cast<int>(rng.index(static_cast<std::size_t>(max_records) + 1));
  int added = 0;
  for (int e = 0; added < records && e < 12; ++e) {
    ViewpointId v = rng.uniform() < 0.5 ? in.current : ids[rng.index(ids.size())];
    const int length = 1 + static_cast<int>(rng.index(10));
    for (int s = 0; s < length && added < records; ++s) {
      const int step = in.memory.histories.log_visit(e, v);
      if (v == in.current || rng.uniform() < 0.3) {
        ImaginedTrajectory tau;
        const int h = 1 + static_cast<int>(rng.index(static_cast<std::size_t>(max_horizon)));
        for (int i = 0; i < h; ++i) {
          tau.states.push_back(rng.uniform() < 0.5 ? in.imagined[std::min<std::size_t>(i, in.imagined.size() - 1)]
                                                   : pick_state());
          tau.predicted_rewards.push_back(rng.uniform(0.0, 10.0));
        }
        in.memory.add_history(v, random_state(rng, in.hidden, in.stoch), tau, e, step);
        ++added;
      }
      const auto& links = in.memory.graph.neighbors(v);
      if (!links.empty()) v = links[rng.index(links.size())].to;
    }
  }

  in.cfg.max_width = 1 + static_cast<int>(rng.index(6));
  in.cfg.rho_o = rng.uniform() < 0.2 ? 0.0 : rng.uniform();
  in.cfg.gamma_o = rng.uniform(0.3, 1.0);
  in.cfg.theta_h = rng.uniform(0.0, 0.9);
  in.cfg.gamma_h = rng.uniform(0.3, 1.0);
  in.cfg.max_patterns = 1 + static_cast<int>(rng.index(6));
  in.cfg.neighbor_completion = rng.uniform() < 0.5;
  return in;
}

AgentConfig tiny_agent(int feat_dim, Rng& rng) {
  AgentConfig c;
  c.world.feat_dim = feat_dim;
  c.world.instr_dim = 2 * feat_dim;
  c.world.hidden_dim = 1 + static_cast<int>(rng.index(static_cast<std::size_t>(feat_dim - 1)));
  c.world.stoch_dim = feat_dim - c.world.hidden_dim;
  c.world.embed_dim = 2 + static_cast<int>(rng.index(3));
  c.world.mlp_dim = 3 + static_cast<int>(rng.index(4));
  c.world.max_horizon = 1 + static_cast<int>(rng.index(4));
  c.nav.feat_dim = feat_dim;
  c.nav.state_dim = feat_dim;
  c.nav.model_dim = 3 + static_cast<int>(rng.index(4));
  c.nav.ffn_dim = 3 + static_cast<int>(rng.index(4));
  c.nav.instr_tokens = 2;
  c.max_steps = 6;
  return c;
}

Tour small_tour(std::uint64_t seed, int viewpoints, int episodes, int feat_dim) {
  SceneParams sp;
  sp.num_viewpoints = viewpoints;
  sp.avg_degree = 3.0;
  sp.feat_dim = feat_dim;
  sp.view_count = 6;
  auto scene = std::make_shared<const SceneGraph>(generate_scene(seed, sp));
  TourParams tp;
  tp.episodes = episodes;
  tp.min_path_edges = 2;
  tp.max_path_edges = 5;
  return generate_tour(scene, tp, seed + 1);
}

Episode random_episode(const SceneGraph& scene, Rng& rng) {
  Episode ep;
  ep.start = static_cast<ViewpointId>(rng.index(static_cast<std::size_t>(scene.size())));
  do {
    ep.goal = static_cast<ViewpointId>(rng.index(static_cast<std::size_t>(scene.size())));
  } while (ep.goal == ep.start);
  ep.teacher_path = sample_expert_path(scene, ep.start, ep.goal, rng);
  ep.instruction = Vector::Zero(2 * scene.feat_dim());
  return ep;
}

EpisodeTrace random_trace(const SceneGraph& scene, const Episode& episode, Rng& rng, int max_steps) {
  EpisodeTrace t;
  t.start = episode.start;
  t.goal = episode.goal;
  t.path.push_back(episode.start);
  ViewpointId here = episode.start;
  std::set<ViewpointId> bank{here};
  const int steps = 1 + static_cast<int>(rng.index(static_cast<std::size_t>(max_steps)));
  for (int s = 0; s < steps; ++s) {
    StepTrace st;
    st.step = s;
    st.current = here;
    st.bank_viewpoints.assign(bank.begin(), bank.end());
    st.horizon = 1 + static_cast<int>(rng.index(5));
    const int pick = static_cast<int>(rng.index(4));
    for (int k = 0; k < pick; ++k) {
      st.retrieved_obs.push_back(static_cast<ViewpointId>(rng.index(static_cast<std::size_t>(scene.size()))));
    }
    if (rng.uniform() < 0.5) {
      for (ViewpointId v : episode.teacher_path) {
        if (v != here && rng.uniform() < 0.5) st.retrieved_obs.push_back(v);
      }
    }
    std::sort(st.retrieved_obs.begin(), st.retrieved_obs.end());
    st.retrieved_obs.erase(std::unique(st.retrieved_obs.begin(), st.retrieved_obs.end()), st.retrieved_obs.end());
    const int patterns = static_cast<int>(rng.index(3));
    for (int k = 0; k < patterns; ++k) {
      RetrievedPattern p;
      p.episode = static_cast<int>(rng.index(3));
      p.step = static_cast<int>(rng.index(5));
      const int length = 1 + static_cast<int>(rng.index(4));
      for (int i = 0; i < length; ++i) {
        const ViewpointId v = rng.uniform() < 0.5
                                  ? episode.teacher_path[rng.index(episode.teacher_path.size())]
                                  : static_cast<ViewpointId>(rng.index(static_cast<std::size_t>(scene.size())));
        p.original.push_back(v);
        if (rng.uniform() < 0.8) p.traced.push_back(v);
        p.scores.push_back(rng.uniform());
      }
      st.patterns.push_back(p);
      if (rng.uniform() < 0.3) st.patterns.push_back(p);
    }

    const bool stop = s + 1 == steps && rng.uniform() < 0.7;
    if (stop) {
      st.action = kStop;
      t.stopped = true;
    } else {
      const auto nbrs = scene.neighbors(here);
      const ViewpointId next = nbrs[rng.index(nbrs.size())].to;
      st.action = next;
      st.hops.push_back(next);
      here = next;
      t.path.push_back(here);
      bank.insert(here);
    }
    t.steps.push_back(std::move(st));
    if (stop) break;
  }
  return t;
}

}  // namespace memoir::fixture
