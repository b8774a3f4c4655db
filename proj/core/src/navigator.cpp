#include "memoir/navigator.hpp"

#include <algorithm>
#include <limits>
#include <map>
#include <queue>
#include <set>
#include <stdexcept>

namespace memoir {

namespace {

using DistanceMap = std::map<ViewpointId, double>;

DistanceMap episodic_distances(const EpisodicGraph& g, const PersistentGraph& known, ViewpointId source) {
  DistanceMap dist;
  if (!g.contains(source)) return dist;
  std::map<ViewpointId, std::vector<std::pair<ViewpointId, double>>> adj;
  for (const auto& [a, b] : g.edges()) {
    double length = 1.0;
    for (const auto& l : known.neighbors(a)) {
      if (l.to == b) length = l.length;
    }
    adj[a].emplace_back(b, length);
    adj[b].emplace_back(a, length);
  }
  using Item = std::pair<double, ViewpointId>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> heap;
  dist[source] = 0.0;
  heap.emplace(0.0, source);
  while (!heap.empty()) {
    const auto [d, u] = heap.top();
    heap.pop();
    if (d > dist[u]) continue;
    for (const auto& [w, len] : adj[u]) {
      auto it = dist.find(w);
      if (it == dist.end() || d + len < it->second) {
        dist[w] = d + len;
        heap.emplace(d + len, w);
      }
    }
  }
  return dist;
}

std::vector<ViewpointId> unreachable_nodes(const EpisodicGraph& g, const DistanceMap& dist) {
  std::vector<ViewpointId> out;
  for (ViewpointId v : g.ids()) {
    if (dist.count(v) == 0) out.push_back(v);
  }
  return out;
}

std::vector<ViewpointId> subsequent(const HistoryBank& bank, int episode, int step, std::size_t count) {
  const auto& log = bank.visit_log(episode);
  std::vector<ViewpointId> out;
  for (std::size_t k = 1; k <= count; ++k) {
    const std::size_t at = static_cast<std::size_t>(step) + k;
    if (at >= log.size()) break;
    out.push_back(log[at]);
  }
  return out;
}

/// Attaches a pattern to the episodic graph and records it in the trace.
void apply_pattern(EpisodicGraph& g, StepTrace& st, const HistoryRecord& record, const std::vector<double>& scores,
                   const std::vector<ViewpointId>& traced, const AgentConfig& cfg, const HybridMemory& memory) {
  const MergeStats merge = merge_viewpoints(g, traced, cfg.retrieval, memory.graph, memory.observations);
  st.missing_features += merge.missing_features;
  for (std::size_t i = 0; i < traced.size() && i < scores.size() && i < record.trajectory.states.size(); ++i) {
    if (g.contains(traced[i])) g.attach(traced[i], record.trajectory.states[i].full(), scores[i]);
  }
  RetrievedPattern p;
  p.episode = record.episode;
  p.step = record.step;
  p.scores = scores;
  p.traced = traced;
  p.original = subsequent(memory.histories, record.episode, record.step,
                          static_cast<std::size_t>(cfg.world.max_horizon));
  st.patterns.push_back(std::move(p));
}

void retrieve(MemoryMode mode, const SceneGraph& scene, const Episode& episode, ViewpointId here,
              const std::vector<LatentState>& imagined, const HybridMemory& memory, const Embedder& embedder,
              const AgentConfig& cfg, EpisodicGraph& g, StepTrace& st, Rng& rng) {
  const RetrievalConfig& rc = cfg.retrieval;
  const auto records = memory.histories.records(here);
  auto merge_obs = [&](const std::vector<ViewpointId>& viewpoints) {
    st.retrieved_obs = viewpoints;
    st.missing_features += merge_viewpoints(g, viewpoints, rc, memory.graph, memory.observations).missing_features;
  };
  auto hist_scores = [&](const HistoryRecord& r, std::size_t limit) {
    std::vector<double> scores;
    limit = std::min({limit, imagined.size(), r.trajectory.states.size()});
    for (std::size_t i = 0; i < limit; ++i) scores.push_back(score_hist(embedder, imagined[i], r.trajectory.states[i]));
    return scores;
  };

  switch (mode) {
    case MemoryMode::NoMemory:
      return;
    case MemoryMode::Memoir: {
      const ObservationSelection obs =
          select_observations(rc, memory.graph, here, imagined, memory.observations, embedder);
      merge_obs(obs.retrieved);
      const HistorySelection hist = select_histories(rc, memory.graph, here, imagined, memory.histories, embedder);
      for (const PatternMatch& m : hist.patterns) {
        apply_pattern(g, st, records[static_cast<std::size_t>(m.record)], m.scores, m.traced, cfg, memory);
      }
      return;
    }
    case MemoryMode::Random: {
      const ObservationSelection obs =
          select_observations(rc, memory.graph, here, imagined, memory.observations, embedder);
      std::vector<ViewpointId> pool;
      for (ViewpointId v : memory.observations.viewpoints()) {
        if (v != here) pool.push_back(v);
      }
      const std::size_t n = std::min(obs.retrieved.size(), pool.size());
      for (std::size_t i = 0; i < n; ++i) std::swap(pool[i], pool[i + rng.index(pool.size() - i)]);
      pool.resize(n);
      std::sort(pool.begin(), pool.end());
      merge_obs(pool);
      const HistorySelection hist = select_histories(rc, memory.graph, here, imagined, memory.histories, embedder);
      for (const PatternMatch& m : hist.patterns) {
        const HistoryRecord& r = records[rng.index(records.size())];
        const auto traced = subsequent(memory.histories, r.episode, r.step, m.scores.size());
        apply_pattern(g, st, r, hist_scores(r, traced.size()), traced, cfg, memory);
      }
      return;
    }
    case MemoryMode::Full: {
      std::vector<ViewpointId> all;
      for (ViewpointId v : memory.observations.viewpoints()) {
        if (v != here) all.push_back(v);
      }
      merge_obs(all);
      for (const HistoryRecord& r : records) {
        const auto scores = hist_scores(r, imagined.size());
        if (scores.empty()) continue;
        apply_pattern(g, st, r, scores, subsequent(memory.histories, r.episode, r.step, scores.size()), cfg, memory);
      }
      return;
    }
    case MemoryMode::Oracle: {
      const std::set<ViewpointId> teacher(episode.teacher_path.begin(), episode.teacher_path.end());
      std::vector<ViewpointId> truth;
      for (ViewpointId v : teacher) {
        if (v != here && scene.hops(here, v) <= cfg.world.max_horizon && memory.observations.contains(v)) {
          truth.push_back(v);
        }
      }
      merge_obs(truth);
      int kept = 0;
      for (const HistoryRecord& r : records) {
        if (kept >= rc.max_patterns) break;
        std::vector<ViewpointId> traced;
        for (ViewpointId v :
             subsequent(memory.histories, r.episode, r.step, static_cast<std::size_t>(cfg.world.max_horizon))) {
          if (!teacher.count(v)) break;
          traced.push_back(v);
        }
        if (traced.empty()) continue;
        apply_pattern(g, st, r, std::vector<double>(traced.size(), 1.0), traced, cfg, memory);
        ++kept;
      }
      return;
    }
  }
}

}  // namespace

const char* to_string(MemoryMode mode) {
  switch (mode) {
    case MemoryMode::Memoir: return "memoir";
    case MemoryMode::NoMemory: return "no-memory";
    case MemoryMode::Random: return "random-memory";
    case MemoryMode::Full: return "full-memory";
    case MemoryMode::Oracle: return "oracle-memory";
  }
  return "unknown";
}

MemoryMode parse_mode(std::string_view name) {
  for (MemoryMode m : kAllModes) {
    if (name == to_string(m)) return m;
  }
  throw std::invalid_argument("unknown memory mode '" + std::string(name) + "'");
}

bool uses_retrieval(MemoryMode mode) { return mode != MemoryMode::NoMemory; }

void AgentConfig::validate() const {
  world.validate();
  nav.validate();
  retrieval.validate();
  if (max_steps < 1) throw std::invalid_argument("agent.max_steps must be at least 1");
  if (world.feat_dim != nav.feat_dim) throw std::invalid_argument("world_model.feat_dim must equal nav.feat_dim");
  if (world.state_dim() != nav.state_dim) {
    throw std::invalid_argument("world_model.hidden_dim + world_model.stoch_dim must equal nav.state_dim");
  }
  if (world.instr_dim != nav.instr_dim()) {
    throw std::invalid_argument("world_model.instr_dim must equal nav.feat_dim * nav.instr_tokens");
  }
}

Agent::Agent(AgentConfig config) : config_((config.validate(), config)), world_(config_.world), nav_(config_.nav) {}

tensor::ParamStore Agent::init_params(std::uint64_t seed) const {
  tensor::ParamStore store;
  Rng rng(seed);
  Rng world_rng = rng.fork(1);
  Rng nav_rng = rng.fork(2);
  world_.init(store, world_rng);
  nav_.init(store, nav_rng);
  return store;
}

std::vector<ViewpointId> episodic_route(const EpisodicGraph& g, const PersistentGraph& known, ViewpointId from,
                                        ViewpointId to) {
  const DistanceMap to_target = episodic_distances(g, known, to);
  auto it = to_target.find(from);
  if (it == to_target.end()) return {};
  std::vector<ViewpointId> path{from};
  ViewpointId v = from;
  while (v != to) {
    const double remaining = to_target.at(v);
    for (ViewpointId u : g.neighbors(v)) {
      auto du = to_target.find(u);
      if (du == to_target.end() || !(du->second < remaining)) continue;
      double length = 1.0;
      for (const auto& l : known.neighbors(v)) {
        if (l.to == u) length = l.length;
      }
      if (same_length(length + du->second, remaining)) {
        v = u;
        break;
      }
    }
    path.push_back(v);
  }
  return path;
}

std::vector<ViewpointId> selectable_targets(const nav::NavInputs& inputs) {
  const EpisodicGraph& g = *inputs.graph;
  const std::set<ViewpointId> unreachable(inputs.unreachable.begin(), inputs.unreachable.end());
  std::set<ViewpointId> adjacent;
  bool backed = false;
  for (const auto& [v, d] : inputs.directions) {
    adjacent.insert(v);
    if (g.contains(v) && g.node(v).category == NodeCategory::Visited) backed = true;
  }
  std::vector<ViewpointId> out;
  for (ViewpointId v : g.ids()) {
    const auto cat = g.node(v).category;
    if (cat == NodeCategory::Current || cat == NodeCategory::Visited || unreachable.count(v)) continue;
    if (backed || adjacent.count(v)) out.push_back(v);
  }
  return out;
}

Action lifted_expert(const SceneGraph& scene, const PersistentGraph& known, const nav::NavInputs& inputs,
                     ViewpointId goal, Rng& rng) {
  const EpisodicGraph& g = *inputs.graph;
  const ViewpointId here = g.current();
  if (here == goal) return kStop;
  const auto targets = selectable_targets(inputs);
  const std::set<ViewpointId> allowed(targets.begin(), targets.end());
  const auto path = sample_expert_path(scene, here, goal, rng);
  Action best;
  for (std::size_t i = 1; i < path.size(); ++i) {
    if (!g.contains(path[i]) || !g.has_edge(path[i - 1], path[i])) break;
    if (allowed.count(path[i])) best = path[i];
  }
  if (best) return best;

  const DistanceMap dist = episodic_distances(g, known, here);
  double best_cost = std::numeric_limits<double>::infinity();
  for (ViewpointId v : targets) {
    const double cost = dist.at(v) + scene.distance(v, goal);
    if (cost < best_cost) {
      best_cost = cost;
      best = v;
    }
  }
  return best;
}

EpisodeTrace navigate_episode(const SceneGraph& scene, const Episode& episode, int tour_id, int episode_index,
                              HybridMemory& memory, const Agent& agent, const tensor::ParamStore& params, Rng& rng,
                              const NavigateOptions& options) {
  const AgentConfig& cfg = agent.config();
  const world::WorldModel& wm = agent.world();
  const WorldModelEmbedder embedder(wm, params);
  Rng expert_rng = rng.fork(0x65787074ULL + static_cast<std::uint64_t>(episode_index));

  EpisodeTrace trace;
  trace.tour = tour_id;
  trace.episode = episode_index;
  trace.start = episode.start;
  trace.goal = episode.goal;
  trace.path.push_back(episode.start);

  EpisodicGraph g;
  LatentState z = wm.initial_state();
  Observation obs;
  auto arrive = [&](ViewpointId v) {
    obs = observe(scene, v);
    std::vector<std::pair<ViewpointId, Vector>> glimpses;
    for (const auto& [u, d] : obs.neighbor_directions) glimpses.emplace_back(u, obs.views.row(d).transpose());
    memory.graph.observe(scene, v);
    g.arrive(v, obs.pooled, glimpses);
    memory.add_observation(v, obs.pooled);
    z = wm.infer(params, z, obs.pooled, episode.instruction);
    return memory.histories.log_visit(episode_index, v);
  };

  ViewpointId here = episode.start;
  int log_index = arrive(here);
  for (int step = 0; step < cfg.max_steps; ++step) {
    StepTrace st;
    st.step = step;
    st.current = here;
    const ImaginedTrajectory tau = wm.imagine(params, z);
    st.horizon = tau.horizon();
    st.predicted_rewards = tau.predicted_rewards;
    st.bank_viewpoints = memory.observations.viewpoints();

    g.clear_attachments();
    retrieve(options.mode, scene, episode, here, tau.states, memory, embedder, cfg, g, st, rng);
    memory.add_history(here, z, tau, episode_index, log_index);

    nav::NavInputs in;
    in.graph = &g;
    in.instruction = episode.instruction;
    in.views = obs.views;
    in.directions = obs.neighbor_directions;
    in.unreachable = unreachable_nodes(g, episodic_distances(g, memory.graph, here));

    DecisionContext ctx{in, std::nullopt, step};
    if (options.compute_expert) ctx.expert = lifted_expert(scene, memory.graph, in, episode.goal, expert_rng);
    st.expert = ctx.expert;

    Decision d;
    if (options.policy) {
      d = options.policy(ctx);
    } else {
      d.scores = agent.policy().score(params, in);
      d.action = nav::select_action(d.scores.candidates, d.scores.final);
    }
    st.candidates = d.scores.candidates;
    st.coarse = d.scores.coarse;
    st.fine = d.scores.fine;
    st.history = d.scores.history;
    st.final = d.scores.final;
    st.sigma = d.scores.sigma;
    st.action = d.action;

    if (!d.action) {
      trace.stopped = true;
      trace.steps.push_back(std::move(st));
      break;
    }
    const auto route = episodic_route(g, memory.graph, here, *d.action);
    if (route.size() < 2) throw IllegalMove("navigator: no route to viewpoint " + std::to_string(*d.action));
    for (std::size_t i = 1; i < route.size(); ++i) {
      const StepResult r = env_step(scene, here, route[i], episode.goal);
      here = r.position;
      st.hops.push_back(here);
      trace.path.push_back(here);
      log_index = arrive(here);
    }
    trace.steps.push_back(std::move(st));
  }
  return trace;
}

std::vector<EpisodeTrace> navigate_tour(const Tour& tour, const Agent& agent, const tensor::ParamStore& params,
                                        Rng& rng, const NavigateOptions& options, HybridMemory* memory_out) {
  HybridMemory memory;
  std::vector<EpisodeTrace> traces;
  for (std::size_t i = 0; i < tour.episodes.size(); ++i) {
    traces.push_back(navigate_episode(*tour.scene, tour.episodes[i], tour.id, static_cast<int>(i), memory, agent,
                                      params, rng, options));
  }
  if (memory_out) *memory_out = std::move(memory);
  return traces;
}

}  // namespace memoir
