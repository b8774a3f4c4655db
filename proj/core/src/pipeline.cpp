#include "memoir/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <exception>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#include "memoir/container.hpp"
#include "memoir/report.hpp"
#include "memoir/scene_io.hpp"
#include "memoir/trace_io.hpp"

#ifndef MEMOIR_VERSION_STRING
#define MEMOIR_VERSION_STRING "unknown"
#endif

namespace memoir {

namespace fs = std::filesystem;

namespace {

constexpr std::uint64_t kTrainStream = 1;
constexpr std::uint64_t kEvalStream = 2;
constexpr std::uint64_t kTourStream = 3;
constexpr std::uint64_t kTrajectoryStream = 10;
constexpr std::uint64_t kPretrainStream = 11;
constexpr std::uint64_t kImitationStream = 12;
constexpr std::uint64_t kRolloutStream = 13;

std::string seed_tag(std::uint64_t seed) { return "seed" + std::to_string(seed); }

void write_text(const fs::path& path, const std::string& text) {
  fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ArtifactError("cannot write " + path.string());
  out << text;
  if (!out) throw ArtifactError("cannot write " + path.string());
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ArtifactError("missing artifact " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path train_scene_file(const RunLayout& layout, int scene, int tour) {
  return layout.scenes() / ("train_" + std::to_string(scene) + "_tour" + std::to_string(tour) + ".json");
}

fs::path eval_scene_file(const RunLayout& layout, int scene) {
  return layout.scenes() / ("eval_" + std::to_string(scene) + ".json");
}

void write_meta(const ExperimentConfig& config) {
  const RunLayout layout{config.out};
  fs::create_directories(layout.root);
  write_text(layout.config(), config_to_json(config));
  write_text(layout.version(), std::string(version_string()) + "\n");
}

std::uint64_t scene_seed(std::uint64_t data_seed, std::uint64_t stream, int index) {
  return Rng(data_seed).fork(stream).fork(static_cast<std::uint64_t>(index)).next_u64();
}

tensor::ParamStore load_params(const fs::path& path, const Agent& agent, std::uint64_t seed) {
  if (!fs::exists(path)) throw ArtifactError("missing snapshot " + path.string());
  try {
    return tensor::ParamStore::load_matching(path.string(), agent.init_params(seed));
  } catch (const ContainerError& e) {
    throw ArtifactError("unreadable snapshot " + path.string() + ": " + e.what());
  }
}

std::string imitation_csv(const std::vector<ImitationCurvePoint>& curve) {
  std::ostringstream os;
  os << "epoch,loss,agreement,decisions\n";
  char buf[96];
  for (const auto& p : curve) {
    std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g,%d\n", p.epoch, p.loss, p.agreement, p.decisions);
    os << buf;
  }
  return os.str();
}

}  // namespace

const char* version_string() { return "memoir-lab " MEMOIR_VERSION_STRING; }

fs::path RunLayout::world_snapshot(std::uint64_t seed) const {
  return snapshots() / ("world_" + seed_tag(seed) + ".bin");
}

fs::path RunLayout::agent_snapshot(std::uint64_t seed, MemoryMode mode) const {
  return snapshots() / ("agent_" + std::string(to_string(mode)) + "_" + seed_tag(seed) + ".bin");
}

std::vector<MemoryMode> training_modes(const ExperimentConfig& config) {
  if (config.imitation.per_mode) return config.modes;
  return {config.imitation.mode};
}

MemoryMode policy_mode(const ExperimentConfig& config, MemoryMode mode) {
  return config.imitation.per_mode ? mode : config.imitation.mode;
}

Dataset generate_dataset(const DataConfig& data) {
  Dataset out;
  for (int s = 0; s < data.train_scenes; ++s) {
    auto scene = std::make_shared<const SceneGraph>(generate_scene(scene_seed(data.seed, kTrainStream, s), data.scene));
    for (int t = 0; t < data.train_tours_per_scene; ++t) {
      const std::uint64_t tour_seed = Rng(scene->seed()).fork(kTourStream).fork(static_cast<std::uint64_t>(t)).next_u64();
      out.train.push_back(generate_tour(scene, data.tour, tour_seed, s * data.train_tours_per_scene + t));
    }
  }
  for (int s = 0; s < data.eval_scenes; ++s) {
    auto scene = std::make_shared<const SceneGraph>(generate_scene(scene_seed(data.seed, kEvalStream, s), data.scene));
    const std::uint64_t tour_seed = Rng(scene->seed()).fork(kTourStream).next_u64();
    out.eval.push_back(generate_tour(scene, data.tour, tour_seed, s));
  }
  return out;
}

void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& fn) {
  std::size_t workers = threads > 0 ? static_cast<std::size_t>(threads) : std::thread::hardware_concurrency();
  workers = std::max<std::size_t>(1, std::min(workers, n));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (;;) {
        const std::size_t i = next.fetch_add(1);
        if (i >= n) return;
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!error) error = std::current_exception();
          next.store(n);
          return;
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

world::PretrainResult pretrain_seed(const ExperimentConfig& config, const Dataset& data, std::uint64_t seed,
                                    tensor::ParamStore params) {
  const Agent agent(config.agent);
  Rng traj_rng = Rng(seed).fork(kTrajectoryStream);
  std::vector<world::TrajectorySample> samples;
  for (std::size_t t = 0; t < data.train.size(); ++t) {
    Rng r = traj_rng.fork(t);
    auto part = world::expert_trajectories(data.train[t], r, config.pretrain.trajectories_per_episode);
    samples.insert(samples.end(), std::make_move_iterator(part.begin()), std::make_move_iterator(part.end()));
  }
  world::PretrainOptions options;
  options.iterations = config.pretrain.iterations;
  options.batch_size = config.pretrain.batch_size;
  options.lr = config.pretrain.lr;
  options.seed = Rng(seed).fork(kPretrainStream).next_u64();
  return world::pretrain(agent.world(), std::move(params), samples, options);
}

ImitationResult imitate_seed(const ExperimentConfig& config, const Dataset& data, std::uint64_t seed,
                             MemoryMode mode, tensor::ParamStore params) {
  const Agent agent(config.agent);
  ImitationOptions options;
  options.epochs = config.imitation.epochs;
  options.lr = config.imitation.lr;
  options.teacher_forcing = config.imitation.teacher_forcing;
  options.freeze_world_model = config.imitation.freeze_world_model;
  options.mode = mode;
  options.seed = Rng(seed).fork(kImitationStream).next_u64();
  return train_imitation(data.train, agent, std::move(params), options);
}

EvaluationRun evaluate_seed(const ExperimentConfig& config, const Dataset& data, std::uint64_t seed, MemoryMode mode,
                            const tensor::ParamStore& params) {
  const Agent agent(config.agent);
  EvaluationRun run;
  run.seed = seed;
  run.mode = mode;
  NavigateOptions options;
  options.mode = mode;
  for (std::size_t t = 0; t < data.eval.size(); ++t) {
    const Tour& tour = data.eval[t];
    Rng rng = Rng(seed).fork(kRolloutStream).fork(t);
    std::vector<EpisodeTrace> traces = navigate_tour(tour, agent, params, rng, options);
    for (std::size_t e = 0; e < traces.size(); ++e) {
      EpisodeMetrics m;
      m.seed = seed;
      m.mode = to_string(mode);
      m.tour = tour.id;
      m.episode = static_cast<int>(e);
      m.decisions = static_cast<int>(traces[e].steps.size());
      m.nav = nav_metrics(traces[e], tour.episodes[e], *tour.scene);
      m.retrieval = retrieval_metrics(traces[e], tour.episodes[e], *tour.scene, config.agent.world.max_horizon);
      run.episodes.push_back(m);
    }
    TourMetrics tm;
    tm.seed = seed;
    tm.mode = to_string(mode);
    tm.tour = tour.id;
    tm.tndtw = tour_ndtw(traces, tour.episodes, *tour.scene, config.tndtw);
    run.tours.push_back(tm);
    run.traces.push_back(std::move(traces));
  }
  return run;
}

Dataset load_dataset(const ExperimentConfig& config) {
  const RunLayout layout{config.out};
  Dataset out;
  auto read = [&](const fs::path& path) {
    if (!fs::exists(path)) throw ArtifactError("missing artifact " + path.string() + " (run generate first)");
    try {
      SceneDocument doc = read_scene_file(path);
      if (!doc.tour) throw ArtifactError("scene file without tour: " + path.string());
      return std::move(*doc.tour);
    } catch (const ArtifactError&) {
      throw;
    } catch (const std::exception& e) {
      throw ArtifactError("unreadable scene file " + path.string() + ": " + e.what());
    }
  };
  for (int s = 0; s < config.data.train_scenes; ++s) {
    for (int t = 0; t < config.data.train_tours_per_scene; ++t) out.train.push_back(read(train_scene_file(layout, s, t)));
  }
  for (int s = 0; s < config.data.eval_scenes; ++s) out.eval.push_back(read(eval_scene_file(layout, s)));
  return out;
}

void cmd_generate(const ExperimentConfig& config) {
  write_meta(config);
  const RunLayout layout{config.out};
  const Dataset data = generate_dataset(config.data);
  for (int s = 0; s < config.data.train_scenes; ++s) {
    for (int t = 0; t < config.data.train_tours_per_scene; ++t) {
      const Tour& tour = data.train[static_cast<std::size_t>(s * config.data.train_tours_per_scene + t)];
      write_text(train_scene_file(layout, s, t), scene_to_json(*tour.scene, &tour));
    }
  }
  for (int s = 0; s < config.data.eval_scenes; ++s) {
    const Tour& tour = data.eval[static_cast<std::size_t>(s)];
    write_text(eval_scene_file(layout, s), scene_to_json(*tour.scene, &tour));
  }
}

void cmd_pretrain(const ExperimentConfig& config, bool resume) {
  write_meta(config);
  const RunLayout layout{config.out};
  const Dataset data = load_dataset(config);
  const Agent agent(config.agent);
  fs::create_directories(layout.snapshots());
  fs::create_directories(layout.curves());
  parallel_for(config.seeds.size(), config.threads, [&](std::size_t i) {
    const std::uint64_t seed = config.seeds[i];
    tensor::ParamStore params = resume && fs::exists(layout.world_snapshot(seed))
                                    ? load_params(layout.world_snapshot(seed), agent, seed)
                                    : agent.init_params(seed);
    world::PretrainResult result = pretrain_seed(config, data, seed, std::move(params));
    result.params.save(layout.world_snapshot(seed).string());
    write_text(layout.curves() / ("pretrain_" + seed_tag(seed) + ".csv"), world::curve_csv(result.curve));
  });
}

void cmd_train(const ExperimentConfig& config) {
  write_meta(config);
  const RunLayout layout{config.out};
  const Dataset data = load_dataset(config);
  const Agent agent(config.agent);
  const std::vector<MemoryMode> modes = training_modes(config);
  parallel_for(config.seeds.size() * modes.size(), config.threads, [&](std::size_t i) {
    const std::uint64_t seed = config.seeds[i / modes.size()];
    const MemoryMode mode = modes[i % modes.size()];
    tensor::ParamStore params = load_params(layout.world_snapshot(seed), agent, seed);
    ImitationResult result = imitate_seed(config, data, seed, mode, std::move(params));
    result.params.save(layout.agent_snapshot(seed, mode).string());
    write_text(layout.curves() / ("imitation_" + std::string(to_string(mode)) + "_" + seed_tag(seed) + ".csv"),
               imitation_csv(result.curve));
  });
}

std::vector<EvaluationRun> cmd_evaluate(const ExperimentConfig& config) {
  write_meta(config);
  const RunLayout layout{config.out};
  const Dataset data = load_dataset(config);
  const Agent agent(config.agent);

  std::map<std::pair<std::uint64_t, MemoryMode>, tensor::ParamStore> params;
  for (std::uint64_t seed : config.seeds) {
    for (MemoryMode mode : config.modes) {
      const MemoryMode trained = policy_mode(config, mode);
      if (params.count({seed, trained})) continue;
      const fs::path path = layout.agent_snapshot(seed, trained);
      if (fs::exists(path)) {
        params.emplace(std::make_pair(seed, trained), load_params(path, agent, seed));
      } else if (mode == MemoryMode::NoMemory) {
        params.emplace(std::make_pair(seed, trained), agent.init_params(seed));
      } else {
        throw ArtifactError("missing snapshot " + path.string() + " required by mode " + to_string(mode));
      }
    }
  }

  std::vector<EvaluationRun> runs(config.seeds.size() * config.modes.size());
  parallel_for(runs.size(), config.threads, [&](std::size_t i) {
    const std::uint64_t seed = config.seeds[i / config.modes.size()];
    const MemoryMode mode = config.modes[i % config.modes.size()];
    runs[i] = evaluate_seed(config, data, seed, mode, params.at({seed, policy_mode(config, mode)}));
  });
  std::sort(runs.begin(), runs.end(), [](const EvaluationRun& a, const EvaluationRun& b) {
    return std::make_pair(a.seed, std::string(to_string(a.mode))) < std::make_pair(b.seed, std::string(to_string(b.mode)));
  });

  std::vector<EpisodeMetrics> episodes;
  std::vector<TourMetrics> tours;
  for (const EvaluationRun& run : runs) {
    episodes.insert(episodes.end(), run.episodes.begin(), run.episodes.end());
    tours.insert(tours.end(), run.tours.begin(), run.tours.end());
    std::vector<EpisodeTrace> all;
    for (const auto& t : run.traces) all.insert(all.end(), t.begin(), t.end());
    write_text(layout.traces() / (std::string(to_string(run.mode)) + "_" + seed_tag(run.seed) + ".jsonl"),
               traces_to_jsonl(all));
  }
  write_text(layout.metrics(), metrics_csv(episodes, tours));
  cmd_report(layout.root);
  return runs;
}

void cmd_report(const fs::path& root) {
  const RunLayout layout{root};
  const std::vector<MetricsRow> rows = parse_metrics_csv(read_text(layout.metrics()));
  std::string summary = "# Ablation summary\n\nMean ± standard deviation over seeds of per-seed episode means.\n\n";
  summary += ablation_summary(rows);
  write_text(layout.summary(), summary);
  write_text(layout.plots() / "progress_sr.svg", progress_svg(rows, "sr"));
  write_text(layout.plots() / "progress_spl.svg", progress_svg(rows, "spl"));
}

}  // namespace memoir
