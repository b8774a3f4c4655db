#include <benchmark/benchmark.h>

#include "memoir/memory.hpp"
#include "memoir/navigator.hpp"
#include "memoir/scene.hpp"

using namespace memoir;

namespace {

AgentConfig agent_config() {
  AgentConfig c;
  c.world.feat_dim = 32;
  c.world.instr_dim = 64;
  c.nav.feat_dim = 32;
  c.nav.state_dim = 32;
  return c;
}

Tour make_tour(int viewpoints, int episodes) {
  auto scene = std::make_shared<const SceneGraph>(generate_scene(5, viewpoints, 3.0, 32, 8));
  TourParams p;
  p.episodes = episodes;
  return generate_tour(scene, p, 6);
}

}  // namespace

static void BM_GenerateScene(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  std::uint64_t seed = 0;
  for (auto _ : state) benchmark::DoNotOptimize(generate_scene(++seed, n, 3.0, 32, 8));
}
BENCHMARK(BM_GenerateScene)->Arg(30)->Arg(100);

static void BM_Geodesic(benchmark::State& state) {
  const SceneGraph s = generate_scene(1, static_cast<int>(state.range(0)), 3.0, 8, 8);
  ViewpointId a = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(geodesic(s, a, s.size() - 1 - a));
    a = (a + 1) % s.size();
  }
}
BENCHMARK(BM_Geodesic)->Arg(30)->Arg(100);

static void BM_Imagine(benchmark::State& state) {
  AgentConfig c = agent_config();
  c.world.max_horizon = static_cast<int>(state.range(0));
  c.world.epsilon = 1e-9;
  const world::WorldModel wm(c.world);
  const auto p = wm.init_params(2);
  const auto s = wm.infer(p, wm.initial_state(), Vector::Ones(32).normalized(), Vector::Zero(64));
  for (auto _ : state) benchmark::DoNotOptimize(wm.imagine(p, s));
}
BENCHMARK(BM_Imagine)->Arg(1)->Arg(5);

static void BM_NavigateTour(benchmark::State& state) {
  const Agent agent(agent_config());
  const auto params = agent.init_params(3);
  const Tour tour = make_tour(30, 5);
  NavigateOptions o;
  o.mode = static_cast<MemoryMode>(state.range(0));
  for (auto _ : state) {
    Rng rng(4);
    benchmark::DoNotOptimize(navigate_tour(tour, agent, params, rng, o));
  }
}
BENCHMARK(BM_NavigateTour)
    ->Arg(static_cast<int>(MemoryMode::NoMemory))
    ->Arg(static_cast<int>(MemoryMode::Memoir))
    ->Unit(benchmark::kMillisecond);

static void BM_RetrieveObservations(benchmark::State& state) {
  const Agent agent(agent_config());
  const auto params = agent.init_params(3);
  const Tour tour = make_tour(static_cast<int>(state.range(0)), 10);
  HybridMemory memory;
  Rng rng(5);
  NavigateOptions o;
  navigate_tour(tour, agent, params, rng, o, &memory);
  const WorldModelEmbedder embedder(agent.world(), params);
  const auto& wm = agent.world();
  const ViewpointId here = memory.observations.viewpoints().front();
  const auto start = wm.infer(params, wm.initial_state(), memory.observations.feature(here), Vector::Zero(64));
  const auto imagined = wm.imagine(params, start).states;
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        select_observations(agent.config().retrieval, memory.graph, here, imagined, memory.observations, embedder));
  }
}
BENCHMARK(BM_RetrieveObservations)->Arg(30)->Arg(60);
BENCHMARK_MAIN();
