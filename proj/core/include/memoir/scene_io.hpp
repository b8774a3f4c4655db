#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>

#include "memoir/scene.hpp"

namespace memoir {

inline constexpr int kSceneFormatVersion = 1;

struct SceneDocument {
  std::shared_ptr<const SceneGraph> scene;
  std::optional<Tour> tour;
};

/// JSON document: format, version, seed, nodes (with view arrays), edges,
/// and an optional tour with its episodes. Doubles are written in shortest
/// round-trip form, so parse + dump reproduces the text exactly.
std::string scene_to_json(const SceneGraph& scene, const Tour* tour = nullptr);
SceneDocument scene_from_json(std::string_view text);

void write_scene_file(const std::filesystem::path& path, const SceneGraph& scene,
                      const Tour* tour = nullptr);
SceneDocument read_scene_file(const std::filesystem::path& path);

}  // namespace memoir
