#include "memoir/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <tuple>

namespace memoir {

namespace {

double ratio(std::size_t num, std::size_t den) {
  if (den == 0) return 1.0;
  return static_cast<double>(num) / static_cast<double>(den);
}

std::string number(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

double dtw(const SceneGraph& scene, std::span<const ViewpointId> path, std::span<const ViewpointId> reference) {
  const std::size_t n = path.size();
  const std::size_t m = reference.size();
  if (n == 0 || m == 0) throw std::invalid_argument("dtw: empty path");
  constexpr double inf = std::numeric_limits<double>::infinity();
  std::vector<double> prev(m + 1, inf);
  std::vector<double> cur(m + 1, inf);
  prev[0] = 0.0;
  for (std::size_t i = 1; i <= n; ++i) {
    cur[0] = inf;
    for (std::size_t j = 1; j <= m; ++j) {
      const double cost = scene.distance(path[i - 1], reference[j - 1]);
      cur[j] = cost + std::min({prev[j], cur[j - 1], prev[j - 1]});
    }
    std::swap(prev, cur);
  }
  return prev[m];
}

double ndtw(const SceneGraph& scene, std::span<const ViewpointId> path, std::span<const ViewpointId> reference) {
  return std::exp(-dtw(scene, path, reference) / (static_cast<double>(reference.size()) * kDtwThreshold));
}

NavMetrics nav_metrics(const EpisodeTrace& trace, const Episode& episode, const SceneGraph& scene) {
  if (trace.path.empty()) throw std::invalid_argument("nav_metrics: empty trace path");
  NavMetrics m;
  m.tl = path_length(scene, trace.path);
  m.ne = scene.distance(trace.path.back(), episode.goal);
  m.sr = m.ne < kSuccessRadius ? 1.0 : 0.0;
  const double shortest = scene.distance(episode.start, episode.goal);
  const double denom = std::max(shortest, m.tl);
  m.spl = denom > 0.0 ? m.sr * shortest / denom : m.sr;
  m.ndtw = ndtw(scene, trace.path, episode.teacher_path);
  return m;
}

double tour_ndtw(std::span<const EpisodeTrace> traces, std::span<const Episode> episodes, const SceneGraph& scene,
                 TourNdtwMode mode) {
  if (traces.size() != episodes.size()) throw std::invalid_argument("tour_ndtw: trace/episode count mismatch");
  if (traces.empty()) throw std::invalid_argument("tour_ndtw: empty tour");
  if (mode == TourNdtwMode::GeometricMean) {
    double log_sum = 0.0;
    for (std::size_t i = 0; i < traces.size(); ++i) {
      log_sum += std::log(ndtw(scene, traces[i].path, episodes[i].teacher_path));
    }
    return std::exp(log_sum / static_cast<double>(traces.size()));
  }
  std::vector<ViewpointId> path;
  std::vector<ViewpointId> reference;
  for (std::size_t i = 0; i < traces.size(); ++i) {
    path.insert(path.end(), traces[i].path.begin(), traces[i].path.end());
    reference.insert(reference.end(), episodes[i].teacher_path.begin(), episodes[i].teacher_path.end());
  }
  return ndtw(scene, path, reference);
}

RetrievalMetrics retrieval_metrics(const EpisodeTrace& trace, const Episode& episode, const SceneGraph& scene,
                                   int horizon) {
  const std::set<ViewpointId> teacher(episode.teacher_path.begin(), episode.teacher_path.end());
  std::set<ViewpointId> retrieved_all;
  std::set<ViewpointId> truth_all;
  std::set<ViewpointId> hit_all;
  std::size_t hist_hit = 0;
  std::size_t hist_traj = 0;
  std::size_t hist_truth = 0;
  for (const StepTrace& st : trace.steps) {
    const std::set<ViewpointId> bank(st.bank_viewpoints.begin(), st.bank_viewpoints.end());
    std::set<ViewpointId> truth;
    for (ViewpointId v : teacher) {
      if (v != st.current && bank.count(v) && scene.hops(st.current, v) <= horizon) truth.insert(v);
    }
    truth_all.insert(truth.begin(), truth.end());
    for (ViewpointId v : st.retrieved_obs) {
      retrieved_all.insert(v);
      if (truth.count(v)) hit_all.insert(v);
    }

    std::set<std::tuple<int, int, std::vector<ViewpointId>>> seen;
    for (const RetrievedPattern& p : st.patterns) {
      if (!seen.emplace(p.episode, p.step, p.traced).second) continue;
      const std::set<ViewpointId> traj(p.traced.begin(), p.traced.end());
      std::set<ViewpointId> gt;
      for (ViewpointId v : p.original) {
        if (teacher.count(v)) gt.insert(v);
      }
      for (ViewpointId v : traj) hist_hit += gt.count(v);
      hist_traj += traj.size();
      hist_truth += gt.size();
    }
  }
  RetrievalMetrics m;
  m.oa = ratio(hit_all.size(), retrieved_all.size());
  m.or_ = ratio(hit_all.size(), truth_all.size());
  m.ha = ratio(hist_hit, hist_traj);
  m.hr = ratio(hist_hit, hist_truth);
  return m;
}

const std::vector<std::string>& metrics_columns() {
  static const std::vector<std::string> columns{"seed", "mode", "tour", "episode", "kind", "decisions", "tl",
                                                "ne",   "sr",   "spl",  "ndtw",    "tndtw", "oa",        "or",
                                                "ha",   "hr"};
  return columns;
}

std::string metrics_csv(const std::vector<EpisodeMetrics>& episodes, const std::vector<TourMetrics>& tours) {
  std::ostringstream os;
  const auto& cols = metrics_columns();
  for (std::size_t i = 0; i < cols.size(); ++i) os << (i ? "," : "") << cols[i];
  os << '\n';

  auto row = [&](std::uint64_t seed, const std::string& mode, int tour, const std::string& episode,
                 const std::string& kind, double decisions, const NavMetrics& n, const std::string& tndtw,
                 const RetrievalMetrics& r) {
    os << seed << ',' << mode << ',' << tour << ',' << episode << ',' << kind << ',' << number(decisions) << ','
       << number(n.tl) << ',' << number(n.ne) << ',' << number(n.sr) << ',' << number(n.spl) << ','
       << number(n.ndtw) << ',' << tndtw << ',' << number(r.oa) << ',' << number(r.or_) << ',' << number(r.ha)
       << ',' << number(r.hr) << '\n';
  };

  using Key = std::tuple<std::string, std::uint64_t, int>;
  std::map<Key, std::vector<const EpisodeMetrics*>> grouped;
  for (const auto& e : episodes) grouped[{e.mode, e.seed, e.tour}].push_back(&e);
  std::map<Key, const TourMetrics*> tour_rows;
  for (const auto& t : tours) tour_rows[{t.mode, t.seed, t.tour}] = &t;

  for (auto& [key, rows] : grouped) {
    std::sort(rows.begin(), rows.end(), [](const auto* a, const auto* b) { return a->episode < b->episode; });
    NavMetrics mean_nav;
    RetrievalMetrics mean_ret{0.0, 0.0, 0.0, 0.0};
    double mean_dec = 0.0;
    for (const EpisodeMetrics* e : rows) {
      row(e->seed, e->mode, e->tour, std::to_string(e->episode), "episode", e->decisions, e->nav, "", e->retrieval);
      mean_nav.tl += e->nav.tl;
      mean_nav.ne += e->nav.ne;
      mean_nav.sr += e->nav.sr;
      mean_nav.spl += e->nav.spl;
      mean_nav.ndtw += e->nav.ndtw;
      mean_ret.oa += e->retrieval.oa;
      mean_ret.or_ += e->retrieval.or_;
      mean_ret.ha += e->retrieval.ha;
      mean_ret.hr += e->retrieval.hr;
      mean_dec += e->decisions;
    }
    const double n = static_cast<double>(rows.size());
    for (double* v : {&mean_nav.tl, &mean_nav.ne, &mean_nav.sr, &mean_nav.spl, &mean_nav.ndtw, &mean_ret.oa,
                      &mean_ret.or_, &mean_ret.ha, &mean_ret.hr, &mean_dec}) {
      *v /= n;
    }
    auto t = tour_rows.find(key);
    const std::string tndtw = t != tour_rows.end() ? number(t->second->tndtw) : "";
    row(std::get<1>(key), std::get<0>(key), std::get<2>(key), "", "tour", mean_dec, mean_nav, tndtw, mean_ret);
  }
  return os.str();
}

}  // namespace memoir
