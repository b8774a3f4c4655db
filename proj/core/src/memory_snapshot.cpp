#include <nlohmann/json.hpp>

#include "memoir/container.hpp"
#include "memoir/memory.hpp"

namespace memoir {

namespace {

constexpr const char* kKind = "memoir-memory";

Matrix stack(const std::vector<Vector>& rows, Eigen::Index cols) {
  Matrix m(static_cast<Eigen::Index>(rows.size()), cols);
  for (std::size_t i = 0; i < rows.size(); ++i) m.row(static_cast<Eigen::Index>(i)) = rows[i].transpose();
  return m;
}

Matrix pack_states(const std::vector<const LatentState*>& states, bool deterministic) {
  if (states.empty()) return Matrix(0, 0);
  const auto n = static_cast<Eigen::Index>(states.size());
  Matrix m(deterministic ? n : 3 * n, deterministic ? states.front()->h.size() : states.front()->z.size());
  for (Eigen::Index i = 0; i < n; ++i) {
    const LatentState& s = *states[static_cast<std::size_t>(i)];
    if (deterministic) {
      m.row(i) = s.h.transpose();
    } else {
      m.row(3 * i) = s.dist.mean.transpose();
      m.row(3 * i + 1) = s.dist.log_std.transpose();
      m.row(3 * i + 2) = s.z.transpose();
    }
  }
  return m;
}

std::vector<LatentState> unpack_states(const Matrix& h, const Matrix& z) {
  if (z.rows() != 3 * h.rows()) throw ContainerError("corrupt payload: latent state block shape");
  std::vector<LatentState> out(static_cast<std::size_t>(h.rows()));
  for (Eigen::Index i = 0; i < h.rows(); ++i) {
    LatentState& s = out[static_cast<std::size_t>(i)];
    s.h = h.row(i).transpose();
    s.dist.mean = z.row(3 * i).transpose();
    s.dist.log_std = z.row(3 * i + 1).transpose();
    s.z = z.row(3 * i + 2).transpose();
  }
  return out;
}

}  // namespace

struct MemorySnapshotAccess {
  static std::string write(const HybridMemory& m) {
    ContainerContents c;
    c.kind = kKind;
    c.version = kMemorySnapshotVersion;
    nlohmann::json meta;

    const PersistentGraph& g = m.graph;
    meta["viewpoints"] = g.viewpoints();
    std::vector<Vector> edges;
    for (const auto& [a, links] : g.adjacency_) {
      for (const auto& l : links) {
        if (a < l.to) edges.push_back(Eigen::Vector3d(static_cast<double>(a), static_cast<double>(l.to), l.length));
      }
    }
    c.arrays.push_back({"graph.edges", stack(edges, 3)});
    nlohmann::json glimpse_meta = nlohmann::json::array();
    std::vector<Vector> glimpse_sums;
    for (const auto& [v, entry] : g.glimpses_) {
      glimpse_meta.push_back({v, entry.second});
      glimpse_sums.push_back(entry.first);
    }
    meta["glimpses"] = glimpse_meta;
    c.arrays.push_back({"graph.glimpse_sums", stack(glimpse_sums, glimpse_sums.empty() ? 0 : glimpse_sums[0].size())});

    nlohmann::json obs_meta = nlohmann::json::array();
    std::vector<Vector> obs_sums;
    for (const auto& [v, e] : m.observations.entries_) {
      obs_meta.push_back({v, e.visits});
      obs_sums.push_back(e.sum);
    }
    meta["observations"] = obs_meta;
    c.arrays.push_back({"obs.sums", stack(obs_sums, obs_sums.empty() ? 0 : obs_sums[0].size())});

    nlohmann::json hist_meta = nlohmann::json::array();
    int k = 0;
    for (const auto& [v, records] : m.histories.records_) {
      for (const HistoryRecord& r : records) {
        hist_meta.push_back({{"viewpoint", v}, {"episode", r.episode}, {"step", r.step},
                             {"horizon", r.trajectory.horizon()}});
        std::vector<const LatentState*> tau;
        for (const auto& s : r.trajectory.states) tau.push_back(&s);
        const std::string prefix = "hist." + std::to_string(k++) + ".";
        c.arrays.push_back({prefix + "state_h", pack_states({&r.state}, true)});
        c.arrays.push_back({prefix + "state_z", pack_states({&r.state}, false)});
        c.arrays.push_back({prefix + "tau_h", pack_states(tau, true)});
        c.arrays.push_back({prefix + "tau_z", pack_states(tau, false)});
        Matrix rewards(1, static_cast<Eigen::Index>(r.trajectory.predicted_rewards.size()));
        for (std::size_t i = 0; i < r.trajectory.predicted_rewards.size(); ++i) {
          rewards(0, static_cast<Eigen::Index>(i)) = r.trajectory.predicted_rewards[i];
        }
        c.arrays.push_back({prefix + "rewards", rewards});
      }
    }
    meta["history"] = hist_meta;
    nlohmann::json logs = nlohmann::json::array();
    for (const auto& [episode, log] : m.histories.logs_) logs.push_back({episode, log});
    meta["visit_logs"] = logs;
    c.meta_json = meta.dump();
    return write_container(c);
  }

  static HybridMemory read(std::string_view bytes) {
    const ContainerContents c = read_container(bytes, kKind, kMemorySnapshotVersion);
    std::map<std::string, const Matrix*> arrays;
    for (const auto& a : c.arrays) arrays[a.name] = &a.data;
    auto array = [&](const std::string& name) -> const Matrix& {
      auto it = arrays.find(name);
      if (it == arrays.end()) throw ContainerError("corrupt payload: missing array " + name);
      return *it->second;
    };

    HybridMemory m;
    try {
      const auto meta = nlohmann::json::parse(c.meta_json);
      for (int v : meta.at("viewpoints")) m.graph.add_viewpoint(v);
      const Matrix& edges = array("graph.edges");
      for (Eigen::Index i = 0; i < edges.rows(); ++i) {
        m.graph.add_edge(static_cast<ViewpointId>(edges(i, 0)), static_cast<ViewpointId>(edges(i, 1)), edges(i, 2));
      }
      const Matrix& glimpse_sums = array("graph.glimpse_sums");
      const auto& glimpses = meta.at("glimpses");
      if (static_cast<Eigen::Index>(glimpses.size()) != glimpse_sums.rows()) {
        throw ContainerError("corrupt payload: glimpse count");
      }
      for (std::size_t i = 0; i < glimpses.size(); ++i) {
        const int v = glimpses[i].at(0);
        const int count = glimpses[i].at(1);
        Vector sum = glimpse_sums.row(static_cast<Eigen::Index>(i)).transpose();
        m.graph.glimpse_means_[v] = sum / static_cast<double>(count);
        m.graph.glimpses_[v] = {std::move(sum), count};
      }

      const Matrix& obs_sums = array("obs.sums");
      const auto& obs = meta.at("observations");
      if (static_cast<Eigen::Index>(obs.size()) != obs_sums.rows()) throw ContainerError("corrupt payload: obs count");
      for (std::size_t i = 0; i < obs.size(); ++i) {
        auto& e = m.observations.entries_[obs[i].at(0).get<int>()];
        e.visits = obs[i].at(1);
        e.sum = obs_sums.row(static_cast<Eigen::Index>(i)).transpose();
        e.mean = e.sum / static_cast<double>(e.visits);
      }

      int k = 0;
      for (const auto& h : meta.at("history")) {
        const std::string prefix = "hist." + std::to_string(k++) + ".";
        HistoryRecord r;
        r.episode = h.at("episode");
        r.step = h.at("step");
        r.state = unpack_states(array(prefix + "state_h"), array(prefix + "state_z")).at(0);
        const int horizon = h.at("horizon");
        if (horizon > 0) r.trajectory.states = unpack_states(array(prefix + "tau_h"), array(prefix + "tau_z"));
        const Matrix& rewards = array(prefix + "rewards");
        if (static_cast<int>(r.trajectory.states.size()) != horizon || rewards.cols() != horizon) {
          throw ContainerError("corrupt payload: trajectory horizon");
        }
        for (Eigen::Index i = 0; i < rewards.cols(); ++i) r.trajectory.predicted_rewards.push_back(rewards(0, i));
        m.histories.add(h.at("viewpoint").get<int>(), std::move(r));
      }
      for (const auto& entry : meta.at("visit_logs")) {
        m.histories.logs_[entry.at(0).get<int>()] = entry.at(1).get<std::vector<ViewpointId>>();
      }
    } catch (const nlohmann::json::exception& e) {
      throw ContainerError(std::string("corrupt payload: ") + e.what());
    } catch (const MemoryError& e) {
      throw ContainerError(std::string("corrupt payload: ") + e.what());
    }
    return m;
  }
};

std::string snapshot(const HybridMemory& memory) { return MemorySnapshotAccess::write(memory); }

HybridMemory restore(std::string_view bytes) { return MemorySnapshotAccess::read(bytes); }

}  // namespace memoir
