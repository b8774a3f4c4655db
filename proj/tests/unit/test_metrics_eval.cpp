#include <cmath>

#include "check.hpp"
#include "fixtures.hpp"
#include "memoir/metrics.hpp"
#include "memoir/report.hpp"
#include "memoir/trace_io.hpp"
#include "oracles.hpp"

using namespace memoir;

namespace {

/// 0 - 1 - 2 - 3 - 4 with lengths 1, 2, 3, 4.
SceneGraph path5() {
  std::vector<std::vector<Edge>> adj(5);
  for (int i = 0; i + 1 < 5; ++i) {
    adj[static_cast<std::size_t>(i)].push_back({i + 1, 1.0 + i, i == 0 ? 0 : 1});
    adj[static_cast<std::size_t>(i) + 1].push_back({i, 1.0 + i, 0});
  }
  return SceneGraph(3, adj, std::vector<Matrix>(5, Matrix::Identity(2, 2)), 2);
}

Episode episode(std::vector<ViewpointId> teacher) {
  Episode e;
  e.start = teacher.front();
  e.goal = teacher.back();
  e.teacher_path = std::move(teacher);
  return e;
}

/// Walks `path` one hop per decision and stops at its end.
EpisodeTrace walk(const std::vector<ViewpointId>& path, ViewpointId goal) {
  EpisodeTrace t;
  t.start = path.front();
  t.goal = goal;
  t.path = path;
  for (std::size_t i = 0; i < path.size(); ++i) {
    StepTrace st;
    st.step = static_cast<int>(i);
    st.current = path[i];
    if (i + 1 < path.size()) {
      st.action = path[i + 1];
      st.hops = {path[i + 1]};
    } else {
      st.action = kStop;
      t.stopped = true;
    }
    t.steps.push_back(st);
  }
  return t;
}

}  // namespace

TEST_CASE("teacher path scores perfectly") {
  const SceneGraph s = path5();
  const Episode ep = episode({0, 1, 2, 3});
  const NavMetrics m = nav_metrics(walk(ep.teacher_path, 3), ep, s);
  CHECK(m.sr == 1.0);
  CHECK(m.spl == 1.0);
  CHECK(m.ndtw == 1.0);
  CHECK(m.ne == 0.0);
  CHECK(m.tl == 6.0);
}

TEST_CASE("stopping at a distant start scores zero") {
  const SceneGraph s = path5();
  const Episode ep = episode({0, 1, 2, 3, 4});
  const NavMetrics m = nav_metrics(walk({0}, 4), ep, s);
  CHECK(m.sr == 0.0);
  CHECK(m.spl == 0.0);
  CHECK(m.tl == 0.0);
  CHECK(m.ne == 10.0);
}

TEST_CASE("metrics agree with reference formulas") {
  CHECK_PROPERTY(prop::metrics_match_reference(61));
  CHECK_PROPERTY(prop::metric_bounds(62));
}

TEST_CASE("tour nDTW") {
  const SceneGraph s = path5();
  const std::vector<Episode> eps{episode({0, 1}), episode({1, 2})};
  const std::vector<EpisodeTrace> perfect{walk({0, 1}, 1), walk({1, 2}, 2)};
  CHECK(tour_ndtw(perfect, eps, s) == 1.0);

  const std::vector<EpisodeTrace> one{walk({0, 1, 2}, 1)};
  const std::vector<Episode> one_ep{eps[0]};
  CHECK(tour_ndtw(one, one_ep, s) == ndtw(s, one[0].path, eps[0].teacher_path));

  // Concatenated path 0 1 1 0 1 2 against 0 1 1 2: the lone detour back to
  // 0 costs d(0, 1) = 1 in the cheapest warping.
  const std::vector<EpisodeTrace> detour{walk({0, 1}, 1), walk({1, 0, 1, 2}, 2)};
  const std::vector<ViewpointId> p{0, 1, 1, 0, 1, 2};
  const std::vector<ViewpointId> r{0, 1, 1, 2};
  CHECK(dtw(s, p, r) == 1.0);
  CHECK(tour_ndtw(detour, eps, s) == doctest::Approx(std::exp(-1.0 / 12.0)).epsilon(1e-15));
  CHECK(tour_ndtw(detour, eps, s, TourNdtwMode::GeometricMean) ==
        doctest::Approx(std::sqrt(ndtw(s, detour[1].path, eps[1].teacher_path))));
  CHECK_THROWS(tour_ndtw(one, eps, s));
}

TEST_CASE("retrieval metrics conventions") {
  const SceneGraph s = path5();
  const Episode ep = episode({0, 1, 2, 3});
  EpisodeTrace t = walk({0, 1, 2}, 3);
  for (auto& st : t.steps) st.bank_viewpoints = {};
  RetrievalMetrics m = retrieval_metrics(t, ep, s, 2);
  CHECK(m.oa == 1.0);
  CHECK(m.or_ == 1.0);
  CHECK(m.ha == 1.0);
  CHECK(m.hr == 1.0);

  for (auto& st : t.steps) st.bank_viewpoints = {0, 1, 2, 3};
  m = retrieval_metrics(t, ep, s, 2);
  CHECK(m.oa == 1.0);
  CHECK(m.or_ == 0.0);

  t.steps[0].retrieved_obs = {1, 2};
  t.steps[1].retrieved_obs = {0, 2, 3};
  t.steps[2].retrieved_obs = {0, 1, 3};
  m = retrieval_metrics(t, ep, s, 2);
  CHECK(m.oa == 1.0);
  CHECK(m.or_ == 1.0);
}

TEST_CASE("retrieval metrics on a scripted episode") {
  const SceneGraph s = path5();
  const Episode ep = episode({0, 1, 2, 3});
  EpisodeTrace t = walk({0, 1, 2}, 3);
  t.steps[0].bank_viewpoints = {0, 1, 2};
  t.steps[0].retrieved_obs = {2, 4};
  t.steps[1].bank_viewpoints = {0, 1, 2, 3};
  t.steps[1].retrieved_obs = {0, 4};
  t.steps[2].bank_viewpoints = {0, 1, 2, 3};
  RetrievedPattern a;
  a.traced = {1, 2};
  a.original = {1, 4};
  RetrievedPattern b;
  b.step = 1;
  b.traced = {4};
  b.original = {2, 3};
  t.steps[0].patterns = {a, a};
  t.steps[1].patterns = {b};
  const RetrievalMetrics m = retrieval_metrics(t, ep, s, 2);
  CHECK(m.oa == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
  CHECK(m.or_ == 0.5);
  CHECK(m.ha == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  CHECK(m.hr == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  const RetrievalMetrics ref = oracle::retrieval(oracle::edges_of(s), t, ep, 2);
  CHECK(ref.oa == m.oa);
  CHECK(ref.hr == m.hr);
}

TEST_CASE("trace JSONL") {
  CHECK_PROPERTY(prop::trace_jsonl_round_trip(63));
  CHECK_THROWS(traces_from_jsonl("{not json}\n"));
}

TEST_CASE("metrics CSV round trip through the report parser") {
  EpisodeMetrics e;
  e.seed = 2;
  e.mode = "memoir";
  e.episode = 1;
  e.decisions = 4;
  e.nav = {12.5, 0.0, 1.0, 0.8, 0.9};
  TourMetrics tm{2, "memoir", 0, 0.75};
  const std::string csv = metrics_csv({e}, {tm});
  const auto rows = parse_metrics_csv(csv);
  REQUIRE(rows.size() == 2);
  CHECK_FALSE(rows[0].aggregate);
  CHECK(rows[0].values.at("spl") == 0.8);
  CHECK(rows[1].aggregate);
  CHECK(rows[1].values.at("tndtw") == 0.75);
  CHECK(csv.substr(0, csv.find('\n')).find("seed,mode,tour,episode") == 0);
  CHECK(seeds_in(rows) == std::vector<std::uint64_t>{2});
  const std::string table = ablation_summary(rows);
  for (MemoryMode m : kAllModes) CHECK(table.find(to_string(m)) != std::string::npos);
}
