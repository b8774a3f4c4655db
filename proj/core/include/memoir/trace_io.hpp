#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "memoir/navigator.hpp"

namespace memoir {

/// One JSON object per decision step, newline-terminated. Masked scores
/// (-inf) are written as null; STOP is a null action.
std::string traces_to_jsonl(const std::vector<EpisodeTrace>& traces);

/// Inverse of traces_to_jsonl. Episode paths are rebuilt from the start and
/// the per-step hops. Throws std::runtime_error on malformed input.
std::vector<EpisodeTrace> traces_from_jsonl(std::string_view text);

}  // namespace memoir
