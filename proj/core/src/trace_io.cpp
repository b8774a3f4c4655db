#include "memoir/trace_io.hpp"

#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace memoir {

namespace {

using nlohmann::json;

json action_json(const Action& a) { return a ? json(*a) : json(nullptr); }

Action action_from(const json& j) {
  if (j.is_null()) return kStop;
  return j.get<ViewpointId>();
}

json scores_json(const std::vector<double>& v) {
  json out = json::array();
  for (double x : v) out.push_back(std::isfinite(x) ? json(x) : json(nullptr));
  return out;
}

std::vector<double> scores_from(const json& j) {
  std::vector<double> out;
  for (const auto& x : j) out.push_back(x.is_null() ? -std::numeric_limits<double>::infinity() : x.get<double>());
  return out;
}

json step_json(const EpisodeTrace& ep, const StepTrace& st) {
  json j;
  j["tour"] = ep.tour;
  j["episode"] = ep.episode;
  j["start"] = ep.start;
  j["goal"] = ep.goal;
  j["step"] = st.step;
  j["current"] = st.current;
  json cands = json::array();
  for (const Action& a : st.candidates) cands.push_back(action_json(a));
  j["candidates"] = cands;
  j["coarse"] = scores_json(st.coarse);
  j["fine"] = scores_json(st.fine);
  j["history"] = scores_json(st.history);
  j["final"] = scores_json(st.final);
  j["sigma"] = {{"fine", st.sigma.fine}, {"coarse", st.sigma.coarse}, {"history", st.sigma.history}};
  j["action"] = action_json(st.action);
  j["hops"] = st.hops;
  j["retrieved_obs"] = st.retrieved_obs;
  json patterns = json::array();
  for (const RetrievedPattern& p : st.patterns) {
    patterns.push_back({{"episode", p.episode},
                        {"step", p.step},
                        {"scores", p.scores},
                        {"traced", p.traced},
                        {"original", p.original}});
  }
  j["patterns"] = patterns;
  j["bank_viewpoints"] = st.bank_viewpoints;
  j["horizon"] = st.horizon;
  j["predicted_rewards"] = st.predicted_rewards;
  if (st.expert) j["expert"] = action_json(*st.expert);
  j["missing_features"] = st.missing_features;
  return j;
}

StepTrace step_from(const json& j) {
  StepTrace st;
  st.step = j.at("step").get<int>();
  st.current = j.at("current").get<ViewpointId>();
  for (const auto& a : j.at("candidates")) st.candidates.push_back(action_from(a));
  st.coarse = scores_from(j.at("coarse"));
  st.fine = scores_from(j.at("fine"));
  st.history = scores_from(j.at("history"));
  st.final = scores_from(j.at("final"));
  const json& s = j.at("sigma");
  st.sigma = {s.at("fine").get<double>(), s.at("coarse").get<double>(), s.at("history").get<double>()};
  st.action = action_from(j.at("action"));
  st.hops = j.at("hops").get<std::vector<ViewpointId>>();
  st.retrieved_obs = j.at("retrieved_obs").get<std::vector<ViewpointId>>();
  for (const auto& p : j.at("patterns")) {
    RetrievedPattern r;
    r.episode = p.at("episode").get<int>();
    r.step = p.at("step").get<int>();
    r.scores = p.at("scores").get<std::vector<double>>();
    r.traced = p.at("traced").get<std::vector<ViewpointId>>();
    r.original = p.at("original").get<std::vector<ViewpointId>>();
    st.patterns.push_back(std::move(r));
  }
  st.bank_viewpoints = j.at("bank_viewpoints").get<std::vector<ViewpointId>>();
  st.horizon = j.at("horizon").get<int>();
  st.predicted_rewards = j.at("predicted_rewards").get<std::vector<double>>();
  if (j.contains("expert")) st.expert = action_from(j.at("expert"));
  st.missing_features = j.at("missing_features").get<int>();
  return st;
}

}  // namespace

std::string traces_to_jsonl(const std::vector<EpisodeTrace>& traces) {
  std::string out;
  for (const EpisodeTrace& ep : traces) {
    for (const StepTrace& st : ep.steps) {
      out += step_json(ep, st).dump();
      out += '\n';
    }
  }
  return out;
}

std::vector<EpisodeTrace> traces_from_jsonl(std::string_view text) {
  std::vector<EpisodeTrace> out;
  std::istringstream in{std::string(text)};
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      const json j = json::parse(line);
      const int tour = j.at("tour").get<int>();
      const int episode = j.at("episode").get<int>();
      if (out.empty() || out.back().tour != tour || out.back().episode != episode) {
        EpisodeTrace ep;
        ep.tour = tour;
        ep.episode = episode;
        ep.start = j.at("start").get<ViewpointId>();
        ep.goal = j.at("goal").get<ViewpointId>();
        ep.path.push_back(ep.start);
        out.push_back(std::move(ep));
      }
      EpisodeTrace& ep = out.back();
      StepTrace st = step_from(j);
      ep.path.insert(ep.path.end(), st.hops.begin(), st.hops.end());
      ep.stopped = !st.action.has_value();
      ep.steps.push_back(std::move(st));
    } catch (const json::exception& e) {
      throw std::runtime_error("trace line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace memoir
