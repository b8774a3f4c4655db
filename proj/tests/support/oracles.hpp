#pragma once

#include <functional>
#include <map>
#include <set>
#include <vector>

#include "memoir/memory.hpp"
#include "memoir/metrics.hpp"
#include "memoir/navigator.hpp"
#include "memoir/scene.hpp"

namespace memoir::oracle {

/// Weighted undirected edge list, the common input of the graph oracles.
struct EdgeList {
  int n = 0;
  struct E {
    int a;
    int b;
    double w;
  };
  std::vector<E> edges;
};

EdgeList edges_of(const SceneGraph& scene);
/// Ids are remapped densely; `ids` holds the original id of each index.
EdgeList edges_of(const PersistentGraph& graph, std::vector<ViewpointId>& ids);

/// Single-source distances by edge relaxation; +inf when unreachable.
std::vector<double> bellman_ford(const EdgeList& g, int source);
/// All-pairs unweighted hop counts; -1 when unreachable.
std::vector<std::vector<int>> floyd_hops(const EdgeList& g);
bool connected(const EdgeList& g);

/// Every shortest path from a to b, by exhaustive search on tight edges.
std::vector<std::vector<int>> all_shortest_paths(const EdgeList& g, int a, int b);
/// Lexicographically smallest element of all_shortest_paths.
std::vector<int> lex_shortest_path(const EdgeList& g, int a, int b);

double unit_score(const Vector& a, const Vector& b);

struct ObservationOracle {
  std::vector<std::vector<ViewpointId>> rings;
  std::vector<std::vector<ViewpointId>> survivors;
  std::set<ViewpointId> retrieved;
};

/// Exhaustive reading of observation retrieval: hop rings among M_o
/// entries, score sort with id tie-break, percentile count, width cap,
/// union of shortest paths.
ObservationOracle observations(const RetrievalConfig& cfg, const PersistentGraph& graph, ViewpointId current,
                               const std::vector<LatentState>& imagined, const ObservationBank& bank,
                               const Embedder& embedder);

struct PatternOracle {
  int episode;
  int step;
  int record;
  std::vector<double> scores;
  std::vector<ViewpointId> traced;
};

/// Exhaustive reading of history retrieval.
std::vector<PatternOracle> histories(const RetrievalConfig& cfg, ViewpointId current,
                                     const std::vector<LatentState>& imagined, const HistoryBank& bank,
                                     const Embedder& embedder);

// Metrics, written directly from the formulas.
double dtw(const std::vector<std::vector<double>>& dist, const std::vector<int>& path, const std::vector<int>& ref);
NavMetrics nav(const EdgeList& g, const EpisodeTrace& trace, const Episode& episode);
RetrievalMetrics retrieval(const EdgeList& g, const EpisodeTrace& trace, const Episode& episode, int horizon);

/// Central finite differences over a random subset of entries.
struct FdReport {
  double max_rel = 0.0;
  std::size_t checked = 0;
};
FdReport finite_difference(tensor::ParamStore& params, const std::function<double(const tensor::ParamStore&)>& loss,
                           const tensor::Gradients& analytic, Rng& rng, std::size_t per_param, double h = 1e-5,
                           double floor = 1e-6);

}  // namespace memoir::oracle
