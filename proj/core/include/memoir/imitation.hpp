#pragma once

#include <cstdint>
#include <vector>

#include "memoir/navigator.hpp"

namespace memoir {

struct ImitationOptions {
  int epochs = 4;
  double lr = 1e-3;
  std::uint64_t seed = 0;
  /// Follow the expert after each supervised decision; otherwise follow the
  /// policy's own argmax (student rollouts).
  bool teacher_forcing = true;
  /// Keep world-model parameters fixed; otherwise interleave ELBO steps.
  bool freeze_world_model = true;
  MemoryMode mode = MemoryMode::Memoir;
};

struct ImitationCurvePoint {
  int epoch = 0;
  /// Mean cross-entropy per supervised decision.
  double loss = 0.0;
  /// Fraction of decisions whose argmax matched the expert target.
  double agreement = 0.0;
  int decisions = 0;
};

struct ImitationResult {
  tensor::ParamStore params;
  std::vector<ImitationCurvePoint> curve;
};

/// Behavior cloning over complete tours with one Adam step per episode.
/// Deterministic in (params, tours, options). Throws world::DivergenceError.
ImitationResult train_imitation(const std::vector<Tour>& tours, const Agent& agent, tensor::ParamStore params,
                                const ImitationOptions& options);

/// Top-1 agreement with the lifted expert under teacher forcing.
double expert_agreement(const std::vector<Tour>& tours, const Agent& agent, const tensor::ParamStore& params,
                        MemoryMode mode, std::uint64_t seed);

}  // namespace memoir
