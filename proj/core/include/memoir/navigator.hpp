#pragma once

#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "memoir/episodic_graph.hpp"
#include "memoir/memory.hpp"
#include "memoir/nav_model.hpp"
#include "memoir/scene.hpp"
#include "memoir/world_model.hpp"

namespace memoir {

enum class MemoryMode { Memoir, NoMemory, Random, Full, Oracle };

inline constexpr MemoryMode kAllModes[] = {MemoryMode::NoMemory, MemoryMode::Full, MemoryMode::Random,
                                           MemoryMode::Memoir, MemoryMode::Oracle};

/// "memoir", "no-memory", "random-memory", "full-memory", "oracle-memory".
const char* to_string(MemoryMode mode);
/// Throws std::invalid_argument for unknown names.
MemoryMode parse_mode(std::string_view name);
/// Whether the mode reads the world model at all beyond bank population.
bool uses_retrieval(MemoryMode mode);

struct AgentConfig {
  world::WorldModelConfig world;
  nav::NavModelConfig nav;
  RetrievalConfig retrieval;
  /// T_max: decision steps per episode.
  int max_steps = 15;

  void validate() const;
};

/// World model plus navigation policy sharing one parameter store.
class Agent {
 public:
  explicit Agent(AgentConfig config);

  const AgentConfig& config() const { return config_; }
  const world::WorldModel& world() const { return world_; }
  const nav::NavModel& policy() const { return nav_; }
  tensor::ParamStore init_params(std::uint64_t seed) const;

 private:
  AgentConfig config_;
  world::WorldModel world_;
  nav::NavModel nav_;
};

struct RetrievedPattern {
  int episode = 0;
  int step = 0;
  std::vector<double> scores;
  std::vector<ViewpointId> traced;
  /// The D viewpoints the past episode actually visited after the anchor.
  std::vector<ViewpointId> original;
};

struct StepTrace {
  int step = 0;
  ViewpointId current = 0;
  std::vector<Action> candidates;
  std::vector<double> coarse;
  std::vector<double> fine;
  std::vector<double> history;
  std::vector<double> final;
  nav::FusionWeights sigma;
  Action action;
  /// Viewpoints entered to execute the action (empty for STOP).
  std::vector<ViewpointId> hops;
  std::vector<ViewpointId> retrieved_obs;
  std::vector<RetrievedPattern> patterns;
  /// M_o viewpoints at retrieval time.
  std::vector<ViewpointId> bank_viewpoints;
  int horizon = 0;
  std::vector<double> predicted_rewards;
  /// Supervision target, when computed.
  std::optional<Action> expert;
  int missing_features = 0;
};

struct EpisodeTrace {
  int tour = 0;
  int episode = 0;
  ViewpointId start = 0;
  ViewpointId goal = 0;
  /// Every viewpoint occupied, start included.
  std::vector<ViewpointId> path;
  std::vector<StepTrace> steps;
  bool stopped = false;
};

/// State handed to a policy at one decision step.
struct DecisionContext {
  const nav::NavInputs& inputs;
  /// Lifted expert target, when requested.
  std::optional<Action> expert;
  int step = 0;
};

struct Decision {
  nav::BranchScores scores;
  Action action;
};

using Policy = std::function<Decision(const DecisionContext&)>;

struct NavigateOptions {
  MemoryMode mode = MemoryMode::Memoir;
  /// Compute the lifted expert target at every step.
  bool compute_expert = false;
  /// Replaces the greedy policy (used by imitation learning).
  Policy policy;
};

/// Shortest route through G_t with persistent-graph edge lengths; ties go
/// to the lexicographically smallest sequence. Empty when unreachable.
std::vector<ViewpointId> episodic_route(const EpisodicGraph& g, const PersistentGraph& known, ViewpointId from,
                                        ViewpointId to);

/// Lifted expert target: the furthest selectable candidate on a sampled
/// shortest path whose prefix lies in G_t; otherwise the selectable
/// candidate minimising route length plus remaining geodesic distance.
Action lifted_expert(const SceneGraph& scene, const PersistentGraph& known, const nav::NavInputs& inputs,
                     ViewpointId goal, Rng& rng);

/// Viewpoint candidates the policy can score finitely: unvisited, reachable
/// through G_t, and either adjacent or backed by a visited neighbor.
std::vector<ViewpointId> selectable_targets(const nav::NavInputs& inputs);

/// Runs one episode of the navigation loop against `memory`, which persists
/// across the tour. `rng` drives random-memory sampling and expert paths.
EpisodeTrace navigate_episode(const SceneGraph& scene, const Episode& episode, int tour_id, int episode_index,
                              HybridMemory& memory, const Agent& agent, const tensor::ParamStore& params, Rng& rng,
                              const NavigateOptions& options);

/// Runs every episode of the tour in order with a fresh memory.
std::vector<EpisodeTrace> navigate_tour(const Tour& tour, const Agent& agent, const tensor::ParamStore& params,
                                        Rng& rng, const NavigateOptions& options, HybridMemory* memory_out = nullptr);

}  // namespace memoir
