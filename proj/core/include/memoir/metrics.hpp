#pragma once

#include <span>
#include <string>
#include <vector>

#include "memoir/navigator.hpp"
#include "memoir/scene.hpp"

namespace memoir {

/// Distance scale of nDTW, meters.
inline constexpr double kDtwThreshold = 3.0;

struct NavMetrics {
  double tl = 0.0;
  double ne = 0.0;
  double sr = 0.0;
  double spl = 0.0;
  double ndtw = 0.0;
};

struct RetrievalMetrics {
  double oa = 1.0;
  double or_ = 1.0;
  double ha = 1.0;
  double hr = 1.0;
};

/// Dynamic time warping cost with geodesic point distances.
double dtw(const SceneGraph& scene, std::span<const ViewpointId> path, std::span<const ViewpointId> reference);
/// exp(-DTW / (|reference| * 3 m)).
double ndtw(const SceneGraph& scene, std::span<const ViewpointId> path, std::span<const ViewpointId> reference);

NavMetrics nav_metrics(const EpisodeTrace& trace, const Episode& episode, const SceneGraph& scene);

enum class TourNdtwMode { Concatenate, GeometricMean };

/// Throws std::invalid_argument when the counts differ.
double tour_ndtw(std::span<const EpisodeTrace> traces, std::span<const Episode> episodes, const SceneGraph& scene,
                 TourNdtwMode mode = TourNdtwMode::Concatenate);

/// Observation ground truth per step: teacher viewpoints other than the
/// current one, within `horizon` scene hops of it, present in M_o at that
/// step. History ground truth per pattern: teacher viewpoints among the
/// pattern's original continuation. Empty ratios count as 1.
RetrievalMetrics retrieval_metrics(const EpisodeTrace& trace, const Episode& episode, const SceneGraph& scene,
                                   int horizon);

struct EpisodeMetrics {
  std::uint64_t seed = 0;
  std::string mode;
  int tour = 0;
  int episode = 0;
  int decisions = 0;
  NavMetrics nav;
  RetrievalMetrics retrieval;
};

struct TourMetrics {
  std::uint64_t seed = 0;
  std::string mode;
  int tour = 0;
  double tndtw = 0.0;
};

/// Header plus one row per episode and one aggregate row per tour
/// (kind = "tour", averages of the episode rows plus T-nDTW).
std::string metrics_csv(const std::vector<EpisodeMetrics>& episodes, const std::vector<TourMetrics>& tours);

/// Fixed column order of metrics_csv.
const std::vector<std::string>& metrics_columns();

}  // namespace memoir
