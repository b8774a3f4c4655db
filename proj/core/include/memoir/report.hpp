#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "memoir/navigator.hpp"

namespace memoir {

/// One parsed line of metrics.csv.
struct MetricsRow {
  std::uint64_t seed = 0;
  std::string mode;
  int tour = 0;
  /// -1 on tour aggregate rows.
  int episode = -1;
  bool aggregate = false;
  std::map<std::string, double> values;
};

std::vector<MetricsRow> parse_metrics_csv(std::string_view text);

/// Mean of `metric` over the episode rows of one (mode, seed), restricted
/// to episodes whose tour-progress fraction e/n lies in [lo, hi).
double mean_metric(const std::vector<MetricsRow>& rows, const std::string& mode, std::uint64_t seed,
                   const std::string& metric, double lo = 0.0, double hi = 1.0);

/// Seeds present in the episode rows, ascending.
std::vector<std::uint64_t> seeds_in(const std::vector<MetricsRow>& rows);

/// Markdown table: every mode of kAllModes, mean and standard deviation
/// over seeds of the per-seed episode means. Modes without rows read n/a.
std::string ablation_summary(const std::vector<MetricsRow>& rows);

/// Line chart of `metric` (sr or spl) per tour-progress decile, one series
/// per mode present.
std::string progress_svg(const std::vector<MetricsRow>& rows, const std::string& metric);

}  // namespace memoir
