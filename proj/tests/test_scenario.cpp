#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "trajflow/io.hpp"
#include "trajflow/scenario.hpp"

using namespace trajflow;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / "trajflow_scenario_test" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

json small_gsom(const std::string& out) {
  json doc = json::parse(R"({
    "model": "gsom",
    "diagram": {"type": "cgarz", "rho_max": 100, "v_max": 90, "rho_f": 10},
    "grid": {"a": 0, "b": 4, "dx": 0.1},
    "time": {"horizon_min": 2},
    "initial": {"type": "kde", "bandwidth_km": 0.1, "normalization": "standard"},
    "trajectories": {"source": "synthetic", "n": 11, "c": 0.3, "horizon_min": 2, "stride": 2},
    "emissions": {"formula": "max", "stretch": [1.0, 2.0]},
    "diffusion": {"mu": 1e-8, "lx": 2.5, "ly": 0.02, "dx": 0.01, "dy": 0.01, "record_every": 10,
                  "roads": [{"road": 0, "x_origin": -2.0, "direction": 1, "y": 0.0}]},
    "output": {"record_every": 5}
  })");
  doc["output"]["dir"] = out;
  return doc;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string error_of(const json& doc) {
  try {
    parse_config(doc, ".");
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

int cli(const std::string& args) {
  const std::string cmd = std::string(TRAJFLOW_CLI) + " " + args + " > /dev/null 2>&1";
  const int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

fs::path write_json(const fs::path& dir, const std::string& name, const json& doc) {
  const auto p = dir / name;
  std::ofstream(p) << doc.dump(2);
  return p;
}

}  // namespace

TEST_CASE("config validation names the offending field") {
  json base = json::parse(R"({"model": "lwr", "grid": {"a": 0, "b": 3, "dx": 0.1}})");
  CHECK(error_of(base).empty());
  CHECK(error_of(json{{"model", "lwr"}, {"gird", json::object()}}).find("'gird'") != std::string::npos);
  CHECK(error_of(json{{"model", "ctm"}}).find("'model'") != std::string::npos);
  CHECK(error_of(json{{"grid", {{"dx", -0.1}}}}).find("'grid.dx'") != std::string::npos);
  CHECK(error_of(json{{"grid", {{"dx", "0.1"}}}}).find("'grid.dx'") != std::string::npos);
  CHECK(error_of(json{{"grid", {{"a", 0}, {"b", 1}, {"dx", 0.3}}}}).find("multiple of dx") != std::string::npos);
  CHECK(error_of(json{{"initial", {{"type", "constant"}, {"rho", 120}}}}).find("rho_max") != std::string::npos);
  CHECK(error_of(json{{"cutoff", {{"ell", 0.7}, {"L", 0.6}}}}).find("ell < L") != std::string::npos);
  CHECK(error_of(json{{"time", {{"horizon_min", 1}, {"horizon_s", 60}}}}).find("'time.horizon'") != std::string::npos);
  CHECK(error_of(json{{"trajectories", {{"source", "file"}}}}).find("'trajectories.file'") != std::string::npos);
  CHECK(error_of(json{{"emissions", {{"stretch", {3, 1}}}}, {"model", "gsom"}}).find("'emissions.stretch'") !=
        std::string::npos);
  CHECK(error_of(json{{"model", "gsom"}, {"diagram", {{"type", "greenshields"}}}}).find("'diagram.type'") !=
        std::string::npos);
  CHECK(error_of(json{{"model", "network"}, {"network", {{"alpha", {{"D1", 1.2}}}}}}).find("'network.alpha.D1'") !=
        std::string::npos);
  CHECK(error_of(json{{"model", "lwr"}, {"diffusion", {{"mu", 1e-8}}}}).find("needs emissions") != std::string::npos);
  CHECK(error_of(json{{"seed", -3}}).find("'seed'") != std::string::npos);
  CHECK_THROWS_AS(parse_config(json{{"emissions", {{"coefficients", "/nonexistent.csv"}}}}, "."), IoError);
}

TEST_CASE("config defaults") {
  const auto cfg = parse_config(json{{"model", "network"}}, "/tmp");
  CHECK(cfg.diagram.rho_max == 56.0);
  CHECK(cfg.network.lengths.at(1) == 41.0);
  CHECK(cfg.network.lengths.at(6) == 36.0);
  CHECK(cfg.network.warm_start == 0.5);
  CHECK(cfg.emissions.enabled);
  CHECK(cfg.output_dir == "/tmp/out");
  const auto lwr = parse_config(json::object(), ".");
  CHECK_FALSE(lwr.emissions.enabled);
  CHECK(fnv1a_hex("") == "cbf29ce484222325");
  CHECK(fnv1a_hex("a") == "af63dc4c8601ec8c");
}

TEST_CASE("runs are deterministic and write the declared files") {
  const auto dir = scratch("determinism");
  const auto cfg = parse_config(small_gsom((dir / "a").string()), dir.string());
  const json m1 = run_scenario(cfg);
  RunOptions o;
  o.out_dir = (dir / "b").string();
  const json m2 = run_scenario(cfg, o);
  for (const auto& [key, file] : m1["files"].items()) {
    const auto name = file.get<std::string>();
    CHECK(slurp(dir / "a" / name) == slurp(dir / "b" / name));
  }
  json a = m1, b = m2;
  a.erase("wall_clock_s");
  b.erase("wall_clock_s");
  CHECK(a == b);
  CHECK(m1["record_every"] == 5);
  CHECK(m1["files"].contains("emission"));
  CHECK(m1["files"].contains("psi"));
  CHECK(m1["diffusion"]["relative_balance_error"].get<double>() < 1e-10);

  const FieldDump rho = read_field((dir / "a" / "rho.csv").string());
  CHECK(rho.record_every == 5);
  CHECK(rho.n_cells == 40);
  const auto n_steps = m1["n_steps"].get<std::size_t>();
  CHECK(rho.rows.size() == n_steps / 5 + 1 + (n_steps % 5 ? 1 : 0));
  CHECK(rho.times.back() == doctest::Approx(2.0 / 60.0));

  o.seed = 99;
  o.out_dir = (dir / "c").string();
  CHECK(run_scenario(cfg, o)["config_hash"] != m1["config_hash"]);
}

TEST_CASE("post-processing reproduces the emission dump") {
  const auto dir = scratch("post");
  const auto cfg = parse_config(small_gsom((dir / "run").string()), dir.string());
  run_scenario(cfg);
  postprocess_emissions(cfg, (dir / "run").string(), (dir / "post").string());
  const FieldDump a = read_field((dir / "run" / "emission.csv").string());
  const FieldDump b = read_field((dir / "post" / "emission.csv").string());
  REQUIRE(a.rows.size() == b.rows.size());
  for (std::size_t k = 0; k < a.rows.size(); ++k) CHECK((a.rows[k] == b.rows[k]).all());

  const json d = run_diffusion(cfg, (dir / "run").string(), (dir / "diff").string());
  CHECK(d["diffusion"]["relative_balance_error"].get<double>() < 1e-10);
  CHECK(d["diffusion"]["negative_cells"] == 0);
  CHECK(fs::exists(dir / "diff" / "psi.csv"));
}

TEST_CASE("cli exit codes") {
  const auto dir = scratch("cli");
  const auto good = write_json(dir, "good.json", small_gsom((dir / "out").string()));
  CHECK(cli("validate --config " + good.string()) == 0);
  CHECK(cli("simulate --config " + good.string() + " --record-every 7 --seed 3") == 0);
  CHECK(read_field((dir / "out" / "rho.csv").string()).record_every == 7);
  CHECK(cli("emissions --config " + good.string() + " --out " + (dir / "post").string()) == 0);
  CHECK(cli("diffuse --config " + good.string() + " --out " + (dir / "diff").string()) == 0);
  CHECK(cli("generate-trajectories --kind ftl --out " + (dir / "gen").string()) == 0);
  CHECK(load_trajectories((dir / "gen" / "trajectories.csv").string()).size() == 50);

  auto bad = small_gsom((dir / "out").string());
  bad["grid"]["dx"] = -1;
  CHECK(cli("simulate --config " + write_json(dir, "bad.json", bad).string()) == 2);
  CHECK(cli("simulate --config " + good.string() + " --record-every 0") == 2);
  CHECK(cli("frobnicate") == 2);

  auto cfl = small_gsom((dir / "out").string());
  cfl["time"]["dt_s"] = 30;
  CHECK(cli("simulate --config " + write_json(dir, "cfl.json", cfl).string()) == 3);
  CHECK(cli("validate --config " + (dir / "cfl.json").string()) == 3);

  auto missing = small_gsom((dir / "out").string());
  missing["trajectories"] = {{"source", "file"}, {"file", "nowhere.csv"}};
  CHECK(cli("simulate --config " + write_json(dir, "missing.json", missing).string()) == 4);
  CHECK(cli("emissions --config " + good.string() + " --input " + (dir / "empty").string()) == 4);
}

TEST_CASE("bundled scenarios validate") {
  for (const char* name : {"riemann_lwr.json", "platoon_gsom.json", "stop_and_go.json", "highway_network.json"}) {
    CAPTURE(name);
    const auto cfg = load_config((fs::path(TRAJFLOW_SCENARIOS) / name).string());
    CHECK_NOTHROW(validate_scenario(cfg));
  }
}
