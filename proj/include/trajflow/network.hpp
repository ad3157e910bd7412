#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "trajflow/gsom.hpp"

namespace trajflow {

/// Flow split at a diverge: the side branch takes 1 - alpha.
struct DivergeFlows {
  double main;
  double side;
};

/// FIFO diverge. Both branches are throttled by the most constrained one, so the
/// split ratio is always alpha : (1 - alpha).
DivergeFlows diverge_fluxes(double s_in, double r_main, double r_side, double alpha);

struct MergeFlows {
  double main;
  double side;
};

/// Priority merge: pass-through when demands fit, otherwise
/// main = median{S_main, R - S_side, beta R} and side = R - main.
MergeFlows merge_fluxes(double s_main, double s_side, double r_out, double beta);

enum class Slot { Main, Side };

/// Where a diverge branch or a road end delivers vehicles.
struct Outlet {
  enum class Kind { Road, Merge };
  Kind kind = Kind::Road;
  int id = 0;              // road id, or merge index
  Slot slot = Slot::Main;  // merge input slot

  static Outlet road(int id) { return {Kind::Road, id, Slot::Main}; }
  static Outlet merge(int index, Slot s) { return {Kind::Merge, index, s}; }
};

struct DivergeJunction {
  std::string name;
  int in_road;
  Outlet out_main;
  Outlet out_side;
  double alpha;
};

struct MergeJunction {
  std::string name;
  int out_road;
  double beta;
};

/// Per-minute sensor records on the entry of one road.
struct SensorSeries {
  struct Record {
    double flux;   // veh/h
    double speed;  // km/h
  };
  int road_id = 0;
  int first_minute = 0;
  std::vector<Record> records;
};

/// Record active at time t (h), taken piecewise constant per minute relative to
/// the series start; std::nullopt outside the recorded span.
std::optional<SensorSeries::Record> sensor_at(const SensorSeries& series, double t);

/// Inflow admitted from a sensor into a road whose first cell can receive r0.
double sensor_inflow(const SensorSeries::Record& rec, double r0);

/// Smooth random sensor series: flux oscillates around `mean_flux` with the
/// given relative amplitude plus seeded noise; speed is constant.
SensorSeries synthetic_sensor_series(int road_id, std::size_t n_minutes, double mean_flux,
                                     double speed, std::uint64_t seed, double amplitude = 0.3);

struct Road {
  int id;
  double length;
  GsomSolver solver;
  MacroState2 state;
  Fleet fleet;
  /// Set for roads that end in a merge slot instead of a diverge or the network exit.
  std::optional<Outlet> outlet;
};

/// Bookkeeping of one network step.
struct NetworkStepReport {
  double t = 0.0;
  double dt = 0.0;
  double mass_before = 0.0;  // veh
  double mass_after = 0.0;
  double inflow = 0.0;   // veh/h through network entries
  double outflow = 0.0;  // veh/h through network exits
  std::vector<DivergeFlows> diverge_flows;
  std::vector<MergeFlows> merge_flows;

  /// |mass_after - mass_before - (inflow - outflow) dt| relative to the mass scale.
  double balance_error() const;
};

struct NetworkParameters {
  CgarzDiagram<double> diagram = CgarzDiagram<double>::with_default_bounds(56.0, 10.0, 90.0);
  double dx = 0.1;
  CutoffShape<double> shape{0.2, 0.6};
  EmbeddingMode mode = EmbeddingMode::ClosestVehicle;
  FluxSamplingConfig sampling{};
};

class Network {
public:
  using WarningSink = std::function<void(const std::string&)>;

  /// `road_outlets` lists roads that end directly in a merge slot.
  Network(NetworkParameters params, const std::vector<std::pair<int, double>>& roads,
          std::vector<DivergeJunction> diverges, std::vector<MergeJunction> merges,
          const std::map<int, Outlet>& road_outlets = {});

  const NetworkParameters& parameters() const { return params_; }
  std::vector<Road>& roads() { return roads_; }
  const std::vector<Road>& roads() const { return roads_; }
  Road& road(int id);
  const Road& road(int id) const;
  const std::vector<DivergeJunction>& diverges() const { return diverges_; }
  const std::vector<MergeJunction>& merges() const { return merges_; }

  /// Roads with no upstream junction; they take sensor inflow.
  const std::vector<int>& entry_roads() const { return entries_; }
  /// Roads with no downstream junction; their right end is free outflow.
  const std::vector<int>& exit_roads() const { return exits_; }

  void set_sensor(SensorSeries series);
  void set_fleet(int road_id, Fleet fleet);
  void set_warning_sink(WarningSink sink) { warn_ = std::move(sink); }

  /// Every road empty with w at the middle of its range.
  void reset_empty();

  double total_mass() const;
  double max_dt() const;

  NetworkStepReport step(double t, double dt);

private:
  NetworkParameters params_;
  std::vector<Road> roads_;
  std::map<int, std::size_t> index_;
  std::vector<DivergeJunction> diverges_;
  std::vector<MergeJunction> merges_;
  std::vector<int> entries_;
  std::vector<int> exits_;
  std::map<int, SensorSeries> sensors_;
  std::map<int, bool> warned_;
  WarningSink warn_;
};

/// Three diverges and three merges joining six roads: entries 1, 3, 5 and exits
/// 2, 4, 6. Lengths are given per road id.
Network highway_network(const NetworkParameters& params, const std::map<int, double>& lengths,
                        double alpha_d1 = 0.78, double alpha_d2 = 0.78, double alpha_d3 = 0.48,
                        double beta_m1 = 0.2, double beta_m2 = 0.5, double beta_m3 = 0.2);

/// Fills an empty network for `duration` hours from its sensors and fleets.
/// Returns the time reached.
double warm_start(Network& net, double duration, double dt, double t0 = 0.0);

}  // namespace trajflow
