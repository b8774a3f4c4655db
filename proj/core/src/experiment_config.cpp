#include "memoir/experiment_config.hpp"

#include <fstream>
#include <functional>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

namespace memoir {

namespace {

using nlohmann::ordered_json;

/// Reads one JSON object, tracking consumed keys so leftovers are rejected.
class Section {
 public:
  Section(const ordered_json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(where() + ": expected an object");
  }

  void finish() const {
    for (const auto& [key, value] : j_.items()) {
      if (!used_.count(key)) throw ConfigError(field(key) + ": unknown field");
    }
  }

  void get(const char* key, int& out) {
    if (const auto* v = take(key)) {
      if (!v->is_number_integer()) throw ConfigError(field(key) + ": expected an integer");
      out = v->get<int>();
    }
  }

  void get(const char* key, std::uint64_t& out) {
    if (const auto* v = take(key)) {
      if (!v->is_number_unsigned()) throw ConfigError(field(key) + ": expected a non-negative integer");
      out = v->get<std::uint64_t>();
    }
  }

  void get(const char* key, double& out) {
    if (const auto* v = take(key)) {
      if (!v->is_number()) throw ConfigError(field(key) + ": expected a number");
      out = v->get<double>();
    }
  }

  void get(const char* key, bool& out) {
    if (const auto* v = take(key)) {
      if (!v->is_boolean()) throw ConfigError(field(key) + ": expected a boolean");
      out = v->get<bool>();
    }
  }

  void get(const char* key, std::string& out) {
    if (const auto* v = take(key)) {
      if (!v->is_string()) throw ConfigError(field(key) + ": expected a string");
      out = v->get<std::string>();
    }
  }

  void get(const char* key, MemoryMode& out) {
    std::string name = to_string(out);
    get(key, name);
    out = mode(name, field(key));
  }

  const ordered_json* take(const char* key) {
    used_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  std::string field(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }
  std::string where() const { return path_.empty() ? "config" : path_; }

  static MemoryMode mode(const std::string& name, const std::string& field) {
    try {
      return parse_mode(name);
    } catch (const std::invalid_argument&) {
      throw ConfigError(field + ": unknown mode '" + name + "'");
    }
  }

 private:
  const ordered_json& j_;
  std::string path_;
  std::set<std::string> used_;
};

template <class Fn>
void section(Section& parent, const char* key, Fn&& fn) {
  if (const auto* v = parent.take(key)) {
    Section s(*v, parent.field(key));
    fn(s);
    s.finish();
  }
}

void rethrow_as_config(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const ConfigError&) {
    throw;
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
}

}  // namespace

void ExperimentConfig::validate() const {
  auto fail = [](const std::string& msg) { throw ConfigError(msg); };
  if (data.train_scenes < 1) fail("data.train_scenes must be at least 1");
  if (data.eval_scenes < 1) fail("data.eval_scenes must be at least 1");
  if (data.train_tours_per_scene < 1) fail("data.train_tours_per_scene must be at least 1");
  const SceneParams& s = data.scene;
  if (s.num_viewpoints < 2) fail("data.scene.num_viewpoints must be at least 2");
  if (!(s.avg_degree >= 1.0)) fail("data.scene.avg_degree must be at least 1");
  if (s.view_count < 1) fail("data.scene.view_count must be at least 1");
  if (s.max_degree < 0) fail("data.scene.max_degree must be non-negative");
  if (!(s.direction_noise >= 0.0)) fail("data.scene.direction_noise must be non-negative");
  if (!(s.ambient_noise >= 0.0)) fail("data.scene.ambient_noise must be non-negative");
  const TourParams& t = data.tour;
  if (t.episodes < 1) fail("data.tour.episodes must be at least 1");
  if (!(t.instruction_noise >= 0.0)) fail("data.tour.instruction_noise must be non-negative");
  if (t.min_path_edges < 1) fail("data.tour.min_path_edges must be at least 1");
  if (t.max_path_edges < t.min_path_edges) fail("data.tour.max_path_edges must be at least min_path_edges");
  rethrow_as_config([&] { agent.validate(); });
  if (data.scene.feat_dim != agent.world.feat_dim) fail("data.scene.feat_dim must equal world_model.feat_dim");
  if (agent.nav.instr_tokens != 2) fail("nav.instr_tokens must be 2 (goal and path tokens)");
  if (pretrain.iterations < 0) fail("pretrain.iterations must be non-negative");
  if (pretrain.batch_size < 1) fail("pretrain.batch_size must be at least 1");
  if (!(pretrain.lr > 0.0)) fail("pretrain.lr must be positive");
  if (pretrain.trajectories_per_episode < 1) fail("pretrain.trajectories_per_episode must be at least 1");
  if (imitation.epochs < 0) fail("imitation.epochs must be non-negative");
  if (!(imitation.lr > 0.0)) fail("imitation.lr must be positive");
  if (modes.empty()) fail("modes must not be empty");
  if (seeds.empty()) fail("seeds must not be empty");
  if (std::set<std::uint64_t>(seeds.begin(), seeds.end()).size() != seeds.size()) fail("seeds must be distinct");
  if (std::set<MemoryMode>(modes.begin(), modes.end()).size() != modes.size()) fail("modes must be distinct");
  if (threads < 0) fail("threads must be non-negative");
  if (out.empty()) fail("out must not be empty");
}

ExperimentConfig parse_config(std::string_view json_text) {
  ordered_json root;
  try {
    root = ordered_json::parse(json_text);
  } catch (const ordered_json::parse_error& e) {
    throw ConfigError(std::string("config: invalid JSON: ") + e.what());
  }
  ExperimentConfig c;
  Section top(root, "");
  section(top, "data", [&](Section& s) {
    s.get("seed", c.data.seed);
    s.get("train_scenes", c.data.train_scenes);
    s.get("eval_scenes", c.data.eval_scenes);
    s.get("train_tours_per_scene", c.data.train_tours_per_scene);
    section(s, "scene", [&](Section& p) {
      p.get("num_viewpoints", c.data.scene.num_viewpoints);
      p.get("avg_degree", c.data.scene.avg_degree);
      p.get("feat_dim", c.data.scene.feat_dim);
      p.get("view_count", c.data.scene.view_count);
      p.get("max_degree", c.data.scene.max_degree);
      p.get("direction_noise", c.data.scene.direction_noise);
      p.get("ambient_noise", c.data.scene.ambient_noise);
    });
    section(s, "tour", [&](Section& p) {
      p.get("episodes", c.data.tour.episodes);
      p.get("instruction_noise", c.data.tour.instruction_noise);
      p.get("min_path_edges", c.data.tour.min_path_edges);
      p.get("max_path_edges", c.data.tour.max_path_edges);
    });
  });
  section(top, "world_model", [&](Section& p) {
    auto& w = c.agent.world;
    p.get("feat_dim", w.feat_dim);
    p.get("instr_dim", w.instr_dim);
    p.get("hidden_dim", w.hidden_dim);
    p.get("stoch_dim", w.stoch_dim);
    p.get("embed_dim", w.embed_dim);
    p.get("mlp_dim", w.mlp_dim);
    p.get("max_horizon", w.max_horizon);
    p.get("epsilon", w.epsilon);
    p.get("zeta", w.zeta);
  });
  section(top, "nav", [&](Section& p) {
    auto& n = c.agent.nav;
    p.get("feat_dim", n.feat_dim);
    p.get("state_dim", n.state_dim);
    p.get("model_dim", n.model_dim);
    p.get("ffn_dim", n.ffn_dim);
    p.get("instr_tokens", n.instr_tokens);
    p.get("zeta", n.zeta);
  });
  section(top, "retrieval", [&](Section& p) {
    auto& r = c.agent.retrieval;
    p.get("max_width", r.max_width);
    p.get("rho_o", r.rho_o);
    p.get("gamma_o", r.gamma_o);
    p.get("theta_h", r.theta_h);
    p.get("gamma_h", r.gamma_h);
    p.get("max_patterns", r.max_patterns);
    p.get("neighbor_completion", r.neighbor_completion);
  });
  section(top, "agent", [&](Section& p) { p.get("max_steps", c.agent.max_steps); });
  section(top, "pretrain", [&](Section& p) {
    p.get("iterations", c.pretrain.iterations);
    p.get("batch_size", c.pretrain.batch_size);
    p.get("lr", c.pretrain.lr);
    p.get("trajectories_per_episode", c.pretrain.trajectories_per_episode);
  });
  section(top, "imitation", [&](Section& p) {
    p.get("epochs", c.imitation.epochs);
    p.get("lr", c.imitation.lr);
    p.get("teacher_forcing", c.imitation.teacher_forcing);
    p.get("freeze_world_model", c.imitation.freeze_world_model);
    p.get("per_mode", c.imitation.per_mode);
    p.get("mode", c.imitation.mode);
  });
  section(top, "evaluation", [&](Section& p) {
    std::string name = c.tndtw == TourNdtwMode::Concatenate ? "concatenate" : "geometric-mean";
    p.get("tndtw", name);
    if (name == "concatenate") {
      c.tndtw = TourNdtwMode::Concatenate;
    } else if (name == "geometric-mean") {
      c.tndtw = TourNdtwMode::GeometricMean;
    } else {
      throw ConfigError("evaluation.tndtw: expected 'concatenate' or 'geometric-mean'");
    }
  });
  if (const auto* v = top.take("modes")) {
    if (!v->is_array()) throw ConfigError("modes: expected an array");
    c.modes.clear();
    for (std::size_t i = 0; i < v->size(); ++i) {
      const auto& m = (*v)[i];
      const std::string field = "modes[" + std::to_string(i) + "]";
      if (!m.is_string()) throw ConfigError(field + ": expected a string");
      c.modes.push_back(Section::mode(m.get<std::string>(), field));
    }
  }
  if (const auto* v = top.take("seeds")) {
    if (!v->is_array()) throw ConfigError("seeds: expected an array");
    c.seeds.clear();
    for (std::size_t i = 0; i < v->size(); ++i) {
      const auto& s = (*v)[i];
      if (!s.is_number_unsigned()) {
        throw ConfigError("seeds[" + std::to_string(i) + "]: expected a non-negative integer");
      }
      c.seeds.push_back(s.get<std::uint64_t>());
    }
  }
  top.get("threads", c.threads);
  top.get("out", c.out);
  top.finish();
  c.validate();
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("config: cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string config_to_json(const ExperimentConfig& c) {
  ordered_json j;
  const auto& s = c.data.scene;
  const auto& t = c.data.tour;
  j["data"] = {{"seed", c.data.seed},
               {"train_scenes", c.data.train_scenes},
               {"eval_scenes", c.data.eval_scenes},
               {"train_tours_per_scene", c.data.train_tours_per_scene},
               {"scene",
                {{"num_viewpoints", s.num_viewpoints},
                 {"avg_degree", s.avg_degree},
                 {"feat_dim", s.feat_dim},
                 {"view_count", s.view_count},
                 {"max_degree", s.max_degree},
                 {"direction_noise", s.direction_noise},
                 {"ambient_noise", s.ambient_noise}}},
               {"tour",
                {{"episodes", t.episodes},
                 {"instruction_noise", t.instruction_noise},
                 {"min_path_edges", t.min_path_edges},
                 {"max_path_edges", t.max_path_edges}}}};
  const auto& w = c.agent.world;
  j["world_model"] = {{"feat_dim", w.feat_dim},       {"instr_dim", w.instr_dim}, {"hidden_dim", w.hidden_dim},
                      {"stoch_dim", w.stoch_dim},     {"embed_dim", w.embed_dim}, {"mlp_dim", w.mlp_dim},
                      {"max_horizon", w.max_horizon}, {"epsilon", w.epsilon},     {"zeta", w.zeta}};
  const auto& n = c.agent.nav;
  j["nav"] = {{"feat_dim", n.feat_dim}, {"state_dim", n.state_dim},       {"model_dim", n.model_dim},
              {"ffn_dim", n.ffn_dim},   {"instr_tokens", n.instr_tokens}, {"zeta", n.zeta}};
  const auto& r = c.agent.retrieval;
  j["retrieval"] = {{"max_width", r.max_width}, {"rho_o", r.rho_o},
                    {"gamma_o", r.gamma_o},     {"theta_h", r.theta_h},
                    {"gamma_h", r.gamma_h},     {"max_patterns", r.max_patterns},
                    {"neighbor_completion", r.neighbor_completion}};
  j["agent"] = {{"max_steps", c.agent.max_steps}};
  j["pretrain"] = {{"iterations", c.pretrain.iterations},
                   {"batch_size", c.pretrain.batch_size},
                   {"lr", c.pretrain.lr},
                   {"trajectories_per_episode", c.pretrain.trajectories_per_episode}};
  j["imitation"] = {{"epochs", c.imitation.epochs},
                    {"lr", c.imitation.lr},
                    {"teacher_forcing", c.imitation.teacher_forcing},
                    {"freeze_world_model", c.imitation.freeze_world_model},
                    {"per_mode", c.imitation.per_mode},
                    {"mode", to_string(c.imitation.mode)}};
  j["evaluation"] = {{"tndtw", c.tndtw == TourNdtwMode::Concatenate ? "concatenate" : "geometric-mean"}};
  ordered_json modes = ordered_json::array();
  for (MemoryMode m : c.modes) modes.push_back(to_string(m));
  j["modes"] = modes;
  j["seeds"] = c.seeds;
  j["threads"] = c.threads;
  j["out"] = c.out;
  return j.dump(2) + "\n";
}

}  // namespace memoir
