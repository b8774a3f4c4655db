#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "memoir/imitation.hpp"
#include "memoir/metrics.hpp"
#include "memoir/navigator.hpp"
#include "memoir/scene.hpp"
#include "memoir/world_model.hpp"

namespace memoir {

/// Invalid configuration. The message starts with the dotted field path.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct DataConfig {
  std::uint64_t seed = 7;
  int train_scenes = 5;
  int eval_scenes = 5;
  int train_tours_per_scene = 2;
  SceneParams scene;
  TourParams tour;
};

struct PretrainConfig {
  int iterations = 300;
  int batch_size = 8;
  double lr = 3e-3;
  int trajectories_per_episode = 1;
};

struct ImitationConfig {
  int epochs = 4;
  double lr = 1e-3;
  bool teacher_forcing = true;
  bool freeze_world_model = true;
  /// Train one policy per evaluated mode; otherwise a single policy trained
  /// under `mode` is evaluated in every mode.
  bool per_mode = true;
  MemoryMode mode = MemoryMode::Memoir;
};

struct ExperimentConfig {
  DataConfig data;
  AgentConfig agent;
  PretrainConfig pretrain;
  ImitationConfig imitation;
  TourNdtwMode tndtw = TourNdtwMode::Concatenate;
  std::vector<MemoryMode> modes{std::begin(kAllModes), std::end(kAllModes)};
  std::vector<std::uint64_t> seeds{1, 2, 3};
  /// Worker threads; 0 means hardware concurrency.
  int threads = 0;
  std::string out = "runs/default";

  /// Throws ConfigError naming the offending field.
  void validate() const;
};

/// Parses and validates. Missing fields take the module defaults; unknown
/// fields and type mismatches are errors.
ExperimentConfig parse_config(std::string_view json_text);
ExperimentConfig load_config(const std::string& path);

/// Fully resolved config, every field present, stable key order.
std::string config_to_json(const ExperimentConfig& config);

}  // namespace memoir
