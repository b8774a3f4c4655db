#include "memoir/scene_io.hpp"

#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

namespace memoir {
namespace {

using nlohmann::json;

json vector_json(const Vector& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v[i]);
  return out;
}

Vector vector_from(const json& j) {
  Vector v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v[static_cast<Eigen::Index>(i)] = j[i].get<double>();
  return v;
}

}  // namespace

std::string scene_to_json(const SceneGraph& scene, const Tour* tour) {
  json doc;
  doc["format"] = "memoir-scene";
  doc["version"] = kSceneFormatVersion;
  doc["seed"] = scene.seed();
  doc["feat_dim"] = scene.feat_dim();
  doc["view_count"] = scene.view_count();
  doc["max_degree"] = scene.max_degree();

  json nodes = json::array();
  json edges = json::array();
  for (ViewpointId v = 0; v < scene.size(); ++v) {
    json views = json::array();
    const Matrix& m = scene.views(v);
    for (Eigen::Index r = 0; r < m.rows(); ++r) views.push_back(vector_json(m.row(r).transpose()));
    nodes.push_back({{"id", v}, {"views", std::move(views)}});
    for (const Edge& e : scene.neighbors(v)) {
      if (e.to < v) continue;
      edges.push_back({{"a", v},
                       {"b", e.to},
                       {"length", e.length},
                       {"dir_a", e.direction},
                       {"dir_b", scene.find_edge(e.to, v)->direction}});
    }
  }
  doc["nodes"] = std::move(nodes);
  doc["edges"] = std::move(edges);

  if (tour != nullptr) {
    json episodes = json::array();
    for (const Episode& ep : tour->episodes) {
      episodes.push_back({{"start", ep.start},
                          {"goal", ep.goal},
                          {"teacher_path", ep.teacher_path},
                          {"instruction", vector_json(ep.instruction)}});
    }
    doc["tour"] = {{"id", tour->id}, {"episodes", std::move(episodes)}};
  }
  return doc.dump();
}

SceneDocument scene_from_json(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw SceneError(std::string("scene document: ") + e.what());
  }
  try {
    if (doc.at("format").get<std::string>() != "memoir-scene") throw SceneError("scene document: wrong format tag");
    if (doc.at("version").get<int>() != kSceneFormatVersion) throw SceneError("scene document: unsupported version");
    const int k = doc.at("view_count").get<int>();
    const int f = doc.at("feat_dim").get<int>();
    const auto& nodes = doc.at("nodes");
    const auto n = nodes.size();

    std::vector<Matrix> views(n);
    for (const auto& node : nodes) {
      const auto id = node.at("id").get<std::size_t>();
      if (id >= n) throw SceneError("scene document: node id out of range");
      const auto& rows = node.at("views");
      if (static_cast<int>(rows.size()) != k) throw SceneError("scene document: wrong view count");
      Matrix m(k, f);
      for (int r = 0; r < k; ++r) {
        const auto& row = rows[static_cast<std::size_t>(r)];
        if (static_cast<int>(row.size()) != f) throw SceneError("scene document: wrong feature dimension");
        for (int c = 0; c < f; ++c) m(r, c) = row[static_cast<std::size_t>(c)].get<double>();
      }
      views[id] = std::move(m);
    }

    std::vector<std::vector<Edge>> adjacency(n);
    for (const auto& e : doc.at("edges")) {
      const auto a = e.at("a").get<ViewpointId>();
      const auto b = e.at("b").get<ViewpointId>();
      if (a < 0 || b < 0 || static_cast<std::size_t>(a) >= n || static_cast<std::size_t>(b) >= n) {
        throw SceneError("scene document: edge endpoint out of range");
      }
      const double length = e.at("length").get<double>();
      adjacency[static_cast<std::size_t>(a)].push_back({b, length, e.at("dir_a").get<int>()});
      adjacency[static_cast<std::size_t>(b)].push_back({a, length, e.at("dir_b").get<int>()});
    }

    SceneDocument out;
    auto scene = std::make_shared<const SceneGraph>(doc.at("seed").get<std::uint64_t>(), std::move(adjacency),
                                                    std::move(views), doc.at("max_degree").get<int>());
    out.scene = scene;
    if (doc.contains("tour")) {
      Tour tour{scene, {}, doc["tour"].at("id").get<int>()};
      for (const auto& e : doc["tour"].at("episodes")) {
        Episode ep;
        ep.start = e.at("start").get<ViewpointId>();
        ep.goal = e.at("goal").get<ViewpointId>();
        ep.teacher_path = e.at("teacher_path").get<std::vector<ViewpointId>>();
        ep.instruction = vector_from(e.at("instruction"));
        if (!scene->contains(ep.start) || !scene->contains(ep.goal)) {
          throw SceneError("scene document: episode references unknown viewpoint");
        }
        tour.episodes.push_back(std::move(ep));
      }
      if (tour.episodes.empty()) throw SceneError("scene document: tour without episodes");
      out.tour = std::move(tour);
    }
    return out;
  } catch (const json::exception& e) {
    throw SceneError(std::string("scene document: ") + e.what());
  }
}

void write_scene_file(const std::filesystem::path& path, const SceneGraph& scene, const Tour* tour) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << scene_to_json(scene, tour) << '\n';
}

SceneDocument read_scene_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return scene_from_json(buffer.str());
}

}  // namespace memoir
