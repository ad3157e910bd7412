#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "trajflow/diffusion.hpp"
#include "trajflow/emissions.hpp"
#include "trajflow/gsom.hpp"
#include "trajflow/kde.hpp"
#include "trajflow/lwr.hpp"
#include "trajflow/network.hpp"
#include "trajflow/synthetic.hpp"

namespace trajflow {

enum class ModelKind { Lwr, Gsom, Network };

struct DiagramSpec {
  bool cgarz = false;
  double rho_max = 100.0;
  double v_max = 90.0;  // u_max for Greenshields
  double rho_f = 10.0;
  std::optional<double> w_l;
  std::optional<double> w_r;

  GreenshieldsDiagram<double> greenshields() const { return {rho_max, v_max}; }
  CgarzDiagram<double> cgarz_diagram() const;
};

struct InitialSpec {
  enum class Kind { Constant, Riemann, Kde };
  Kind kind = Kind::Constant;
  double rho = 0.0;
  std::optional<double> w;  // CGARZ only; defaults to the middle of [w_l, w_r]
  double x0 = 0.0;
  double rho_left = 0.0;
  double rho_right = 0.0;
  std::optional<double> w_left;
  std::optional<double> w_right;
  KdeConfig kde{0.1, KernelNormalization::Literal};
};

struct BoundarySpec {
  Boundary boundary = Boundary::neumann();
  bool from_left_state = false;  // inflow = demand of the initial left state
};

struct TrajectorySpec {
  enum class Source { None, File, Synthetic, Ftl };
  Source source = Source::None;
  std::string file;
  int road_id = 0;
  std::size_t stride = 1;           // keep every stride-th vehicle
  std::optional<std::size_t> take;  // then keep at most this many

  // Synthetic platoon.
  std::size_t n = 41;
  double c = 0.3;
  double horizon = 20.0 / 60.0;  // h
  double v_max = 90.0;
  double sample_dt = 1.0 / 3600.0;
  PlatoonAcceleration accel = PlatoonAcceleration::SpeedDerivative;

  // Follow-the-leader.
  FtlConfig ftl{};
  double ftl_x_tail = 0.5;
  double ftl_dt = 0.25 / 3600.0;
  double ftl_duration = 0.1;
  std::size_t ftl_record_every = 4;
  double ftl_slowdown = 0.5;
};

struct EmissionSpec {
  bool enabled = true;
  EmissionModel model{};
  std::optional<double> stretch_a;  // km, summing window
  std::optional<double> stretch_b;
};

struct DiffusionSpec {
  bool enabled = false;
  double mu = 1e-8;
  double lx = 40.0;
  double ly = 0.1;
  double dx = 0.01;
  double dy = 0.01;
  SourceConfig source{};
  std::vector<RoadStrip> roads;
  std::size_t record_every = 100;
};

struct NetworkSpec {
  std::map<int, double> lengths;
  double alpha[3] = {0.78, 0.78, 0.48};
  double beta[3] = {0.2, 0.5, 0.2};
  std::string sensors_file;
  // Synthetic sensors, used when no file is given.
  std::map<int, double> sensor_mean_flux;
  double sensor_speed = 80.0;
  double warm_start = 0.5;  // h
};

struct ScenarioConfig {
  ModelKind model = ModelKind::Lwr;
  EmbeddingMode embedding = EmbeddingMode::ClosestVehicle;
  DiagramSpec diagram{};
  CutoffShape<double> cutoff{0.2, 0.6};
  FluxSamplingConfig sampling{};
  double a = 0.0;
  double b = 3.0;
  double dx = 0.1;
  double horizon = 1.0 / 60.0;  // h
  std::optional<double> dt;     // h; defaults to the CFL bound
  InitialSpec initial{};
  BoundarySpec left{Boundary::demand(0.0), false};
  BoundarySpec right{};
  TrajectorySpec trajectories{};
  EmissionSpec emissions{};
  DiffusionSpec diffusion{};
  NetworkSpec network{};
  std::string output_dir = "out";
  std::size_t record_every = 1;
  std::uint64_t seed = 1;

  nlohmann::json raw;    // the parsed document
  std::string base_dir;  // relative paths resolve against this
};

/// Parses and validates a scenario. Unknown or ill-typed fields raise ConfigError
/// naming the field.
ScenarioConfig parse_config(const nlohmann::json& doc, const std::string& base_dir = ".");
ScenarioConfig load_config(const std::string& path);

/// 64-bit FNV-1a of a byte string, as 16 hex digits.
std::string fnv1a_hex(const std::string& bytes);

/// Fleet described by a trajectory block; the seed drives the FTL perturbation.
Fleet build_fleet(const TrajectorySpec& spec, const std::string& base_dir, std::uint64_t seed,
                  std::vector<std::string>* warnings = nullptr);

struct RunOptions {
  std::optional<std::string> out_dir;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> record_every;
  bool quiet = true;
};

/// Checks a config end to end without running it: files, grids, CFL.
/// Returns human-readable findings; throws on the first hard error.
std::vector<std::string> validate_scenario(const ScenarioConfig& cfg);

/// Runs a scenario and writes dumps plus manifest.json. Returns the manifest.
nlohmann::json run_scenario(const ScenarioConfig& cfg, const RunOptions& opts = {});

/// Emission dumps from previously written rho/speed/accel dumps in `input_dir`.
nlohmann::json postprocess_emissions(const ScenarioConfig& cfg, const std::string& input_dir,
                                     const std::string& out_dir);

/// Runs the diffusion block on emission dumps found in `input_dir`.
nlohmann::json run_diffusion(const ScenarioConfig& cfg, const std::string& input_dir,
                             const std::string& out_dir, std::optional<std::size_t> record_every = {});

}  // namespace trajflow
