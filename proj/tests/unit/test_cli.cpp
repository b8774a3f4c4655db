#include <filesystem>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "doctest.h"
#include "memoir/cli.hpp"
#include "memoir/container.hpp"
#include "memoir/experiment_config.hpp"
#include "memoir/pipeline.hpp"

using namespace memoir;
namespace fs = std::filesystem;

namespace {

nlohmann::json tiny_config(const fs::path& out) {
  return {
      {"data",
       {{"seed", 3},
        {"train_scenes", 1},
        {"eval_scenes", 1},
        {"train_tours_per_scene", 1},
        {"scene", {{"num_viewpoints", 10}, {"avg_degree", 3.0}, {"feat_dim", 6}, {"view_count", 6}}},
        {"tour", {{"episodes", 4}, {"min_path_edges", 2}, {"max_path_edges", 4}}}}},
      {"world_model",
       {{"feat_dim", 6}, {"instr_dim", 12}, {"hidden_dim", 3}, {"stoch_dim", 3}, {"embed_dim", 4}, {"mlp_dim", 6},
        {"max_horizon", 3}}},
      {"nav", {{"feat_dim", 6}, {"state_dim", 6}, {"model_dim", 6}, {"ffn_dim", 6}}},
      {"agent", {{"max_steps", 6}}},
      {"pretrain", {{"iterations", 4}, {"batch_size", 2}}},
      {"imitation", {{"epochs", 1}}},
      {"seeds", {1, 2}},
      {"threads", 1},
      {"out", out.string()},
  };
}

struct Scratch {
  fs::path root;
  explicit Scratch(const std::string& name) : root(fs::temp_directory_path() / ("memoir_cli_" + name)) {
    fs::remove_all(root);
    fs::create_directories(root);
  }
  ~Scratch() { fs::remove_all(root); }

  fs::path write_config(const nlohmann::json& j, const std::string& file = "config.json") const {
    const fs::path p = root / file;
    std::ofstream(p) << j.dump(2);
    return p;
  }
};

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result run(std::vector<std::string> args) {
  args.insert(args.begin(), "memoir-lab");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out;
  std::ostringstream err;
  const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) { return read_binary_file(p.string()); }

/// Every regular file under `dir`, keyed by relative path.
std::map<std::string, std::string> tree(const fs::path& dir) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (e.is_regular_file()) files[fs::relative(e.path(), dir).string()] = slurp(e.path());
  }
  return files;
}

}  // namespace

TEST_CASE("config errors name the field") {
  nlohmann::json j = tiny_config("unused");
  j["data"]["train_scenes"] = 0;
  CHECK_THROWS_WITH_AS(parse_config(j.dump()), doctest::Contains("data.train_scenes"), ConfigError);
  j = tiny_config("unused");
  j["nav"]["bogus"] = 1;
  CHECK_THROWS_WITH_AS(parse_config(j.dump()), doctest::Contains("nav.bogus"), ConfigError);
  j = tiny_config("unused");
  j["pretrain"]["lr"] = "fast";
  CHECK_THROWS_WITH_AS(parse_config(j.dump()), doctest::Contains("pretrain.lr"), ConfigError);
  j = tiny_config("unused");
  j["world_model"]["feat_dim"] = 5;
  CHECK_THROWS_AS(parse_config(j.dump()), ConfigError);
  CHECK_THROWS_AS(parse_config("{"), ConfigError);
}

TEST_CASE("resolved config round trips") {
  const ExperimentConfig c = parse_config(tiny_config("x").dump());
  CHECK(config_to_json(parse_config(config_to_json(c))) == config_to_json(c));
}

TEST_CASE("exit codes") {
  Scratch s("codes");
  CHECK(run({}).code == kExitConfig);
  CHECK(run({"generate"}).code == kExitConfig);
  nlohmann::json bad = tiny_config(s.root / "run");
  bad["seeds"] = nlohmann::json::array();
  const Result r = run({"generate", "--config", s.write_config(bad).string()});
  CHECK(r.code == kExitConfig);
  CHECK(r.err.find("seeds") != std::string::npos);
  CHECK(run({"generate", "--config", (s.root / "missing.json").string()}).code == kExitConfig);
  CHECK(run({"evaluate", "--config", s.write_config(tiny_config(s.root / "empty")).string()}).code == kExitFailure);

  nlohmann::json wild = tiny_config(s.root / "wild");
  wild["pretrain"]["lr"] = 1e300;
  wild["pretrain"]["iterations"] = 20;
  const std::string path = s.write_config(wild, "wild.json").string();
  REQUIRE(run({"generate", "--config", path}).code == kExitOk);
  const Result diverged = run({"pretrain", "--config", path});
  CHECK_MESSAGE(diverged.code == kExitDivergence, diverged.err);
}

TEST_CASE("generate is byte-identical") {
  Scratch s("generate");
  const std::string a = s.write_config(tiny_config(s.root / "a"), "a.json").string();
  const std::string b = s.write_config(tiny_config(s.root / "b"), "b.json").string();
  REQUIRE(run({"generate", "--config", a}).code == kExitOk);
  REQUIRE(run({"generate", "--config", b}).code == kExitOk);
  const auto ta = tree(s.root / "a" / "scenes");
  CHECK_FALSE(ta.empty());
  CHECK(ta == tree(s.root / "b" / "scenes"));
  fs::remove_all(s.root / "a" / "scenes");
  REQUIRE(run({"generate", "--config", a}).code == kExitOk);
  CHECK(ta == tree(s.root / "a" / "scenes"));
}

TEST_CASE("full pipeline writes every mode and reruns identically") {
  Scratch s("pipeline");
  const std::string a = s.write_config(tiny_config(s.root / "a"), "a.json").string();
  const std::string b = s.write_config(tiny_config(s.root / "b"), "b.json").string();
  const Result r = run({"all", "--config", a});
  REQUIRE_MESSAGE(r.code == kExitOk, r.err);
  REQUIRE(run({"all", "--config", b}).code == kExitOk);

  const fs::path ra = s.root / "a";
  const std::string summary = slurp(ra / "summary.md");
  for (MemoryMode m : kAllModes) CHECK(summary.find(to_string(m)) != std::string::npos);
  CHECK(slurp(ra / "metrics.csv") == slurp(s.root / "b" / "metrics.csv"));
  CHECK(tree(ra / "snapshots") == tree(s.root / "b" / "snapshots"));
  CHECK(tree(ra / "traces") == tree(s.root / "b" / "traces"));
  CHECK(fs::exists(ra / "VERSION"));
  CHECK(fs::exists(ra / "config.json"));

  fs::remove(ra / "summary.md");
  CHECK(run({"report", "--out", ra.string()}).code == kExitOk);
  CHECK(slurp(ra / "summary.md") == summary);

  const Result single = run({"evaluate", "--config", a, "--seed", "1", "--mode", "memoir"});
  CHECK(single.code == kExitOk);
  CHECK(run({"evaluate", "--config", a, "--mode", "telepathy"}).code == kExitConfig);
}
