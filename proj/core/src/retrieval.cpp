#include <algorithm>
#include <map>
#include <set>

#include "memoir/memory.hpp"

namespace memoir {

namespace {

void require_anchor(const PersistentGraph& graph, ViewpointId current) {
  if (!graph.contains(current)) {
    throw MemoryError("retrieval: current viewpoint " + std::to_string(current) + " not in persistent graph");
  }
}

}  // namespace

ObservationSelection select_observations(const RetrievalConfig& cfg, const PersistentGraph& graph,
                                         ViewpointId current, std::span<const LatentState> imagined,
                                         const ObservationBank& bank, const Embedder& embedder) {
  require_anchor(graph, current);
  ObservationSelection out;
  if (imagined.empty()) return out;

  std::map<int, std::vector<ViewpointId>> rings;
  for (const auto& [v, hops] : graph.hop_distances(current)) {
    if (hops >= 1 && hops <= static_cast<int>(imagined.size()) && bank.contains(v)) rings[hops].push_back(v);
  }

  std::set<ViewpointId> retrieved;
  for (int i = 1; i <= static_cast<int>(imagined.size()); ++i) {
    const std::vector<ViewpointId>& ring = rings[i];
    std::vector<std::pair<double, ViewpointId>> scored;
    std::vector<double> scores;
    if (!ring.empty()) {
      const Vector query = embedder.state(imagined[static_cast<std::size_t>(i - 1)]);
      for (ViewpointId v : ring) {
        const double c = unit_score(query, embedder.observation(bank.feature(v)));
        scored.emplace_back(c, v);
        scores.push_back(c);
      }
    }
    std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
      return a.first != b.first ? a.first > b.first : a.second < b.second;
    });
    const int keep = std::min(retained_count(cfg, i, static_cast<int>(ring.size())), cfg.max_width);
    std::vector<ViewpointId> survivors;
    for (int k = 0; k < keep; ++k) survivors.push_back(scored[static_cast<std::size_t>(k)].second);
    for (ViewpointId s : survivors) {
      for (ViewpointId v : graph.shortest_path(current, s)) {
        if (v != current) retrieved.insert(v);
      }
    }
    out.rings.push_back(ring);
    out.ring_scores.push_back(std::move(scores));
    out.survivors.push_back(std::move(survivors));
  }
  out.retrieved.assign(retrieved.begin(), retrieved.end());
  return out;
}

HistorySelection select_histories(const RetrievalConfig& cfg, const PersistentGraph& graph, ViewpointId current,
                                  std::span<const LatentState> imagined, const HistoryBank& bank,
                                  const Embedder& embedder) {
  require_anchor(graph, current);
  HistorySelection out;
  const auto records = bank.records(current);
  if (records.empty() || imagined.empty()) return out;

  std::vector<Vector> queries;
  for (const LatentState& s : imagined) queries.push_back(embedder.state(s));

  std::vector<PatternMatch> matches;
  for (std::size_t j = 0; j < records.size(); ++j) {
    const HistoryRecord& r = records[j];
    PatternMatch m;
    m.anchor = current;
    m.episode = r.episode;
    m.step = r.step;
    m.record = static_cast<int>(j);
    const std::size_t limit = std::min(queries.size(), r.trajectory.states.size());
    for (std::size_t i = 0; i < limit; ++i) {
      const double c = unit_score(queries[i], embedder.state(r.trajectory.states[i]));
      if (c < match_threshold(cfg, static_cast<int>(i) + 1)) break;
      m.scores.push_back(c);
    }
    if (m.scores.empty()) continue;
    m.min_score = *std::min_element(m.scores.begin(), m.scores.end());
    matches.push_back(std::move(m));
  }
  out.matched = static_cast<int>(matches.size());

  std::sort(matches.begin(), matches.end(), [](const PatternMatch& a, const PatternMatch& b) {
    if (a.scores.size() != b.scores.size()) return a.scores.size() > b.scores.size();
    if (a.min_score != b.min_score) return a.min_score > b.min_score;
    if (a.episode != b.episode) return a.episode < b.episode;
    if (a.step != b.step) return a.step < b.step;
    return a.record < b.record;
  });
  if (static_cast<int>(matches.size()) > cfg.max_patterns) matches.resize(static_cast<std::size_t>(cfg.max_patterns));

  for (PatternMatch& m : matches) {
    const auto& log = bank.visit_log(m.episode);
    for (std::size_t k = 1; k <= m.scores.size(); ++k) {
      const std::size_t at = static_cast<std::size_t>(m.step) + k;
      if (at >= log.size()) break;
      m.traced.push_back(log[at]);
    }
  }
  out.patterns = std::move(matches);
  return out;
}

MergeStats merge_viewpoints(EpisodicGraph& g, std::span<const ViewpointId> viewpoints, const RetrievalConfig& cfg,
                            const PersistentGraph& graph, const ObservationBank& bank) {
  MergeStats stats;
  auto link = [&](ViewpointId v) {
    for (const auto& l : graph.neighbors(v)) {
      if (g.contains(l.to)) g.add_edge(v, l.to);
    }
  };
  for (ViewpointId v : viewpoints) {
    if (!graph.contains(v)) throw MemoryError("merge: viewpoint " + std::to_string(v) + " not in persistent graph");
    const Vector* x = bank.find(v);
    if (!x) {
      ++stats.missing_features;
      continue;
    }
    if (g.merge_retrieved(v, *x)) stats.added.push_back(v);
    link(v);
    if (!cfg.neighbor_completion) continue;
    for (const auto& l : graph.neighbors(v)) {
      if (g.contains(l.to)) continue;
      const Vector* feature = bank.find(l.to);
      if (!feature) feature = graph.glimpse(l.to);
      if (!feature) continue;
      g.merge_completion(l.to, *feature);
      link(l.to);
    }
  }
  return stats;
}

ObservationRetrieval retrieve_observations(const RetrievalConfig& cfg, const PersistentGraph& graph,
                                           ViewpointId current, std::span<const LatentState> imagined,
                                           const ObservationBank& bank, const Embedder& embedder, EpisodicGraph& g) {
  ObservationRetrieval out;
  out.selection = select_observations(cfg, graph, current, imagined, bank, embedder);
  out.merge = merge_viewpoints(g, out.selection.retrieved, cfg, graph, bank);
  return out;
}

HistoryRetrieval retrieve_histories(const RetrievalConfig& cfg, const PersistentGraph& graph, ViewpointId current,
                                    std::span<const LatentState> imagined, const HistoryBank& histories,
                                    const ObservationBank& bank, const Embedder& embedder, EpisodicGraph& g) {
  HistoryRetrieval out;
  out.selection = select_histories(cfg, graph, current, imagined, histories, embedder);
  const auto records = histories.records(current);
  for (const PatternMatch& m : out.selection.patterns) {
    MergeStats s = merge_viewpoints(g, m.traced, cfg, graph, bank);
    out.merge.missing_features += s.missing_features;
    out.merge.added.insert(out.merge.added.end(), s.added.begin(), s.added.end());
    const HistoryRecord& r = records[static_cast<std::size_t>(m.record)];
    for (std::size_t i = 0; i < m.traced.size(); ++i) {
      if (g.contains(m.traced[i])) g.attach(m.traced[i], r.trajectory.states[i].full(), m.scores[i]);
    }
  }
  return out;
}

}  // namespace memoir
