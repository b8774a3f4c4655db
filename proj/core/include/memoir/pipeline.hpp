#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "memoir/experiment_config.hpp"
#include "memoir/metrics.hpp"

namespace memoir {

/// A required artifact is absent or unreadable.
class ArtifactError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Build identifier written to every output directory.
const char* version_string();

struct Dataset {
  std::vector<Tour> train;
  std::vector<Tour> eval;
};

/// Deterministic in the data section of the config.
Dataset generate_dataset(const DataConfig& data);

/// Paths inside an output directory.
struct RunLayout {
  std::filesystem::path root;

  std::filesystem::path config() const { return root / "config.json"; }
  std::filesystem::path version() const { return root / "VERSION"; }
  std::filesystem::path scenes() const { return root / "scenes"; }
  std::filesystem::path snapshots() const { return root / "snapshots"; }
  std::filesystem::path traces() const { return root / "traces"; }
  std::filesystem::path plots() const { return root / "plots"; }
  std::filesystem::path curves() const { return root / "curves"; }
  std::filesystem::path metrics() const { return root / "metrics.csv"; }
  std::filesystem::path summary() const { return root / "summary.md"; }
  std::filesystem::path world_snapshot(std::uint64_t seed) const;
  /// Policy trained under `mode`.
  std::filesystem::path agent_snapshot(std::uint64_t seed, MemoryMode mode) const;
};

/// Per-(seed, mode) evaluation output, sorted by seed then mode order.
struct EvaluationRun {
  std::uint64_t seed = 0;
  MemoryMode mode = MemoryMode::Memoir;
  std::vector<EpisodeMetrics> episodes;
  std::vector<TourMetrics> tours;
  std::vector<std::vector<EpisodeTrace>> traces;
};

/// World-model pretraining for one seed, starting from `params`.
world::PretrainResult pretrain_seed(const ExperimentConfig& config, const Dataset& data, std::uint64_t seed,
                                    tensor::ParamStore params);
/// Imitation learning for one seed on the training tours, retrieving in `mode`.
ImitationResult imitate_seed(const ExperimentConfig& config, const Dataset& data, std::uint64_t seed,
                             MemoryMode mode, tensor::ParamStore params);
/// Modes that get their own policy, in config order.
std::vector<MemoryMode> training_modes(const ExperimentConfig& config);
/// The training mode whose policy is evaluated under `mode`.
MemoryMode policy_mode(const ExperimentConfig& config, MemoryMode mode);
/// Greedy rollouts over every evaluation tour. Deterministic in its inputs;
/// random-memory sampling and expert tie-breaks draw from a stream that
/// depends only on (seed, tour).
EvaluationRun evaluate_seed(const ExperimentConfig& config, const Dataset& data, std::uint64_t seed, MemoryMode mode,
                            const tensor::ParamStore& params);

/// Runs `fn(i)` for i in [0, n) on up to `threads` workers (0 = hardware
/// concurrency). The first exception is rethrown after all workers join.
void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& fn);

/// Subcommands. Each writes config.json and VERSION into the output root.
void cmd_generate(const ExperimentConfig& config);
void cmd_pretrain(const ExperimentConfig& config, bool resume = false);
void cmd_train(const ExperimentConfig& config);
std::vector<EvaluationRun> cmd_evaluate(const ExperimentConfig& config);
/// Rebuilds summary.md and plots/*.svg from metrics.csv.
void cmd_report(const std::filesystem::path& root);

Dataset load_dataset(const ExperimentConfig& config);

}  // namespace memoir
