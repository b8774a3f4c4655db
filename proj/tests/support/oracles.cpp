#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace memoir::oracle {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

bool tight(double a, double b) { return std::abs(a - b) <= 1e-9 * std::max({1.0, std::abs(a), std::abs(b)}); }

double weight(const EdgeList& g, int a, int b) {
  for (const auto& e : g.edges) {
    if ((e.a == a && e.b == b) || (e.a == b && e.b == a)) return e.w;
  }
  return kInf;
}

std::vector<std::vector<double>> all_distances(const EdgeList& g) {
  std::vector<std::vector<double>> d;
  for (int s = 0; s < g.n; ++s) d.push_back(bellman_ford(g, s));
  return d;
}

}  // namespace

EdgeList edges_of(const SceneGraph& scene) {
  EdgeList g;
  g.n = scene.size();
  for (ViewpointId v = 0; v < scene.size(); ++v) {
    for (const Edge& e : scene.neighbors(v)) {
      if (v < e.to) g.edges.push_back({v, e.to, e.length});
    }
  }
  return g;
}

EdgeList edges_of(const PersistentGraph& graph, std::vector<ViewpointId>& ids) {
  ids = graph.viewpoints();
  std::map<ViewpointId, int> index;
  for (std::size_t i = 0; i < ids.size(); ++i) index[ids[i]] = static_cast<int>(i);
  EdgeList g;
  g.n = static_cast<int>(ids.size());
  for (ViewpointId v : ids) {
    for (const auto& l : graph.neighbors(v)) {
      if (v < l.to) g.edges.push_back({index[v], index[l.to], l.length});
    }
  }
  return g;
}

std::vector<double> bellman_ford(const EdgeList& g, int source) {
  std::vector<double> d(static_cast<std::size_t>(g.n), kInf);
  d[static_cast<std::size_t>(source)] = 0.0;
  for (int round = 0; round < g.n; ++round) {
    bool changed = false;
    for (const auto& e : g.edges) {
      auto& da = d[static_cast<std::size_t>(e.a)];
      auto& db = d[static_cast<std::size_t>(e.b)];
      if (da + e.w < db) {
        db = da + e.w;
        changed = true;
      }
      if (db + e.w < da) {
        da = db + e.w;
        changed = true;
      }
    }
    if (!changed) break;
  }
  return d;
}

std::vector<std::vector<int>> floyd_hops(const EdgeList& g) {
  const int big = std::numeric_limits<int>::max() / 4;
  std::vector<std::vector<int>> h(static_cast<std::size_t>(g.n), std::vector<int>(static_cast<std::size_t>(g.n), big));
  for (int i = 0; i < g.n; ++i) h[i][i] = 0;
  for (const auto& e : g.edges) h[e.a][e.b] = h[e.b][e.a] = 1;
  for (int k = 0; k < g.n; ++k) {
    for (int i = 0; i < g.n; ++i) {
      for (int j = 0; j < g.n; ++j) h[i][j] = std::min(h[i][j], h[i][k] + h[k][j]);
    }
  }
  for (auto& row : h) {
    for (int& x : row) {
      if (x >= big) x = -1;
    }
  }
  return h;
}

bool connected(const EdgeList& g) {
  if (g.n == 0) return true;
  const auto h = floyd_hops(g);
  return std::none_of(h[0].begin(), h[0].end(), [](int x) { return x < 0; });
}

std::vector<std::vector<int>> all_shortest_paths(const EdgeList& g, int a, int b) {
  const std::vector<double> to_b = bellman_ford(g, b);
  std::vector<std::vector<int>> out;
  if (to_b[static_cast<std::size_t>(a)] == kInf) return out;
  std::vector<int> path{a};
  std::function<void(int)> walk = [&](int v) {
    if (v == b) {
      out.push_back(path);
      return;
    }
    for (const auto& e : g.edges) {
      int u = -1;
      if (e.a == v) u = e.b;
      if (e.b == v) u = e.a;
      if (u < 0) continue;
      const double rest = to_b[static_cast<std::size_t>(u)];
      if (rest < to_b[static_cast<std::size_t>(v)] && tight(e.w + rest, to_b[static_cast<std::size_t>(v)])) {
        path.push_back(u);
        walk(u);
        path.pop_back();
      }
    }
  };
  walk(a);
  return out;
}

std::vector<int> lex_shortest_path(const EdgeList& g, int a, int b) {
  const auto paths = all_shortest_paths(g, a, b);
  if (paths.empty()) return {};
  return *std::min_element(paths.begin(), paths.end());
}

double unit_score(const Vector& a, const Vector& b) {
  double dot = 0.0;
  double na = 0.0;
  double nb = 0.0;
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  return 0.5 * (dot / (std::sqrt(na) * std::sqrt(nb)) + 1.0);
}

ObservationOracle observations(const RetrievalConfig& cfg, const PersistentGraph& graph, ViewpointId current,
                               const std::vector<LatentState>& imagined, const ObservationBank& bank,
                               const Embedder& embedder) {
  std::vector<ViewpointId> ids;
  const EdgeList g = edges_of(graph, ids);
  const int here = static_cast<int>(std::find(ids.begin(), ids.end(), current) - ids.begin());
  const auto hops = floyd_hops(g);

  ObservationOracle out;
  for (std::size_t step = 1; step <= imagined.size(); ++step) {
    std::vector<ViewpointId> ring;
    for (int j = 0; j < g.n; ++j) {
      if (hops[here][j] == static_cast<int>(step) && bank.find(ids[j])) ring.push_back(ids[j]);
    }
    const Vector query = embedder.state(imagined[step - 1]);
    std::vector<std::pair<double, ViewpointId>> ranked;
    for (ViewpointId v : ring) ranked.emplace_back(unit_score(query, embedder.observation(bank.feature(v))), v);
    std::stable_sort(ranked.begin(), ranked.end(), [](const auto& x, const auto& y) {
      if (x.first > y.first) return true;
      if (x.first < y.first) return false;
      return x.second < y.second;
    });

    int keep = 0;
    if (!ring.empty()) {
      double fraction = 1.0 - cfg.rho_o * std::pow(cfg.gamma_o, static_cast<double>(step - 1));
      fraction = std::min(1.0, std::max(0.0, fraction));
      const int n = static_cast<int>(ring.size());
      keep = 1;
      while (keep < n && static_cast<double>(keep) < fraction * n - 1e-9) ++keep;
      keep = std::min(keep, cfg.max_width);
    }
    std::vector<ViewpointId> survivors;
    for (int k = 0; k < keep; ++k) survivors.push_back(ranked[static_cast<std::size_t>(k)].second);
    for (ViewpointId s : survivors) {
      const int target = static_cast<int>(std::find(ids.begin(), ids.end(), s) - ids.begin());
      for (int v : lex_shortest_path(g, here, target)) {
        if (v != here) out.retrieved.insert(ids[static_cast<std::size_t>(v)]);
      }
    }
    out.rings.push_back(ring);
    out.survivors.push_back(survivors);
  }
  return out;
}

std::vector<PatternOracle> histories(const RetrievalConfig& cfg, ViewpointId current,
                                     const std::vector<LatentState>& imagined, const HistoryBank& bank,
                                     const Embedder& embedder) {
  std::vector<PatternOracle> found;
  const auto records = bank.records(current);
  for (std::size_t r = 0; r < records.size(); ++r) {
    const HistoryRecord& rec = records[r];
    PatternOracle p{rec.episode, rec.step, static_cast<int>(r), {}, {}};
    for (std::size_t i = 0; i < imagined.size() && i < rec.trajectory.states.size(); ++i) {
      const double c =
          unit_score(embedder.state(imagined[i]), embedder.state(rec.trajectory.states[i]));
      if (c < cfg.theta_h * std::pow(cfg.gamma_h, static_cast<double>(i))) break;
      p.scores.push_back(c);
    }
    if (p.scores.empty()) continue;
    const auto& log = bank.visit_log(rec.episode);
    for (std::size_t k = 1; k <= p.scores.size(); ++k) {
      if (static_cast<std::size_t>(rec.step) + k < log.size()) p.traced.push_back(log[rec.step + k]);
    }
    found.push_back(p);
  }
  auto min_of = [](const PatternOracle& p) { return *std::min_element(p.scores.begin(), p.scores.end()); };
  for (std::size_t i = 1; i < found.size(); ++i) {
    for (std::size_t j = i; j > 0; --j) {
      const PatternOracle& a = found[j - 1];
      const PatternOracle& b = found[j];
      bool swap = false;
      if (a.scores.size() != b.scores.size()) {
        swap = a.scores.size() < b.scores.size();
      } else if (min_of(a) != min_of(b)) {
        swap = min_of(a) < min_of(b);
      } else {
        swap = std::tie(a.episode, a.step, a.record) > std::tie(b.episode, b.step, b.record);
      }
      if (!swap) break;
      std::swap(found[j - 1], found[j]);
    }
  }
  if (found.size() > static_cast<std::size_t>(cfg.max_patterns)) found.resize(static_cast<std::size_t>(cfg.max_patterns));
  return found;
}

double dtw(const std::vector<std::vector<double>>& dist, const std::vector<int>& path, const std::vector<int>& ref) {
  const std::size_t n = path.size();
  const std::size_t m = ref.size();
  std::vector<std::vector<double>> c(n + 1, std::vector<double>(m + 1, kInf));
  c[0][0] = 0.0;
  for (std::size_t i = 1; i <= n; ++i) {
    for (std::size_t j = 1; j <= m; ++j) {
      const double best = std::min(c[i - 1][j - 1], std::min(c[i - 1][j], c[i][j - 1]));
      c[i][j] = dist[static_cast<std::size_t>(path[i - 1])][static_cast<std::size_t>(ref[j - 1])] + best;
    }
  }
  return c[n][m];
}

NavMetrics nav(const EdgeList& g, const EpisodeTrace& trace, const Episode& episode) {
  const auto d = all_distances(g);
  NavMetrics m;
  for (std::size_t i = 1; i < trace.path.size(); ++i) {
    if (trace.path[i] != trace.path[i - 1]) m.tl += weight(g, trace.path[i - 1], trace.path[i]);
  }
  m.ne = d[static_cast<std::size_t>(trace.path.back())][static_cast<std::size_t>(episode.goal)];
  m.sr = m.ne < 3.0 ? 1.0 : 0.0;
  const double best = d[static_cast<std::size_t>(episode.start)][static_cast<std::size_t>(episode.goal)];
  m.spl = m.sr * (std::max(best, m.tl) > 0.0 ? best / std::max(best, m.tl) : 1.0);
  const std::vector<int> path(trace.path.begin(), trace.path.end());
  const std::vector<int> ref(episode.teacher_path.begin(), episode.teacher_path.end());
  m.ndtw = std::exp(-dtw(d, path, ref) / (3.0 * static_cast<double>(ref.size())));
  return m;
}

RetrievalMetrics retrieval(const EdgeList& g, const EpisodeTrace& trace, const Episode& episode, int horizon) {
  const auto hops = floyd_hops(g);
  const std::set<ViewpointId> teacher(episode.teacher_path.begin(), episode.teacher_path.end());
  std::set<ViewpointId> retrieved_union;
  std::set<ViewpointId> truth_union;
  std::set<ViewpointId> hit_union;
  double hist_hit = 0.0;
  double hist_len = 0.0;
  double hist_truth = 0.0;
  for (const StepTrace& st : trace.steps) {
    std::set<ViewpointId> truth;
    for (ViewpointId v : st.bank_viewpoints) {
      if (v != st.current && teacher.count(v) && hops[st.current][v] >= 0 && hops[st.current][v] <= horizon) {
        truth.insert(v);
      }
    }
    for (ViewpointId v : truth) truth_union.insert(v);
    for (ViewpointId v : st.retrieved_obs) {
      retrieved_union.insert(v);
      if (truth.count(v)) hit_union.insert(v);
    }
    std::vector<const RetrievedPattern*> distinct;
    for (const RetrievedPattern& p : st.patterns) {
      const bool dup = std::any_of(distinct.begin(), distinct.end(), [&](const RetrievedPattern* q) {
        return q->episode == p.episode && q->step == p.step && q->traced == p.traced;
      });
      if (!dup) distinct.push_back(&p);
    }
    for (const RetrievedPattern* p : distinct) {
      const std::set<ViewpointId> traj(p->traced.begin(), p->traced.end());
      std::set<ViewpointId> gt;
      for (ViewpointId v : p->original) {
        if (teacher.count(v)) gt.insert(v);
      }
      for (ViewpointId v : traj) hist_hit += static_cast<double>(gt.count(v));
      hist_len += static_cast<double>(traj.size());
      hist_truth += static_cast<double>(gt.size());
    }
  }
  auto frac = [](double a, double b) { return b == 0.0 ? 1.0 : a / b; };
  RetrievalMetrics m;
  m.oa = frac(static_cast<double>(hit_union.size()), static_cast<double>(retrieved_union.size()));
  m.or_ = frac(static_cast<double>(hit_union.size()), static_cast<double>(truth_union.size()));
  m.ha = frac(hist_hit, hist_len);
  m.hr = frac(hist_hit, hist_truth);
  return m;
}

FdReport finite_difference(tensor::ParamStore& params, const std::function<double(const tensor::ParamStore&)>& loss,
                           const tensor::Gradients& analytic, Rng& rng, std::size_t per_param, double h,
                           double floor) {
  FdReport report;
  for (const std::string& name : params.names()) {
    Matrix& value = params.value(name);
    const auto total = static_cast<std::size_t>(value.size());
    std::vector<std::size_t> picks;
    if (per_param == 0 || per_param >= total) {
      for (std::size_t i = 0; i < total; ++i) picks.push_back(i);
    } else {
      for (std::size_t i = 0; i < per_param; ++i) picks.push_back(rng.index(total));
    }
    auto it = analytic.find(name);
    for (std::size_t flat : picks) {
      const auto r = static_cast<Eigen::Index>(flat) / value.cols();
      const auto c = static_cast<Eigen::Index>(flat) % value.cols();
      const double saved = value(r, c);
      value(r, c) = saved + h;
      const double up = loss(params);
      value(r, c) = saved - h;
      const double down = loss(params);
      value(r, c) = saved;
      const double numeric = (up - down) / (2.0 * h);
      const double exact = it == analytic.end() ? 0.0 : it->second(r, c);
      const double rel = std::abs(exact - numeric) / std::max({std::abs(exact), std::abs(numeric), floor});
      report.max_rel = std::max(report.max_rel, rel);
      ++report.checked;
    }
  }
  return report;
}

}  // namespace memoir::oracle
