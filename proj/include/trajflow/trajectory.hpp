#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "trajflow/diagrams.hpp"

namespace trajflow {

struct TrajectorySample {
  double t;                  // h
  double x;                  // km
  std::optional<double> v;   // km/h
};

/// Recorded path of one tracked vehicle on one road.
///
/// Sample times are strictly increasing and positions non-decreasing; the
/// constructor enforces both.
class Trajectory {
public:
  Trajectory(std::string vehicle_id, std::vector<TrajectorySample> samples, int road_id = 0);

  const std::string& vehicle_id() const { return vehicle_id_; }
  int road_id() const { return road_id_; }
  const std::vector<TrajectorySample>& samples() const { return samples_; }
  double t_begin() const { return samples_.front().t; }
  double t_end() const { return samples_.back().t; }
  bool covers(double t) const { return t >= t_begin() && t <= t_end(); }
  bool has_speeds() const { return has_speeds_; }

  /// Largest speed the trajectory can report through interpolation.
  double max_speed() const;

private:
  std::string vehicle_id_;
  int road_id_;
  std::vector<TrajectorySample> samples_;
  bool has_speeds_;
};

using Fleet = std::vector<Trajectory>;

/// Kinematics of one vehicle at one instant.
struct Kinematics {
  double p;       // km
  double p_dot;   // km/h
  double p_ddot;  // km/h^2
};

/// Linear interpolation of a trajectory; std::nullopt when the vehicle is not on
/// the road at t. The acceleration is a centered difference of the interpolated
/// speed over the width of the segment containing t.
std::optional<Kinematics> interpolate(const Trajectory& traj, double t);

struct ActiveVehicle {
  std::size_t index;  // position in the fleet
  Kinematics state;
};

/// All vehicles active at one instant, in fleet order.
struct FleetSnapshot {
  double t = 0.0;
  std::vector<ActiveVehicle> vehicles;

  bool empty() const { return vehicles.empty(); }
  double max_speed() const;
};

FleetSnapshot snapshot(const Fleet& fleet, double t);

/// Index (into the fleet) of the active vehicle nearest to x; lowest index on ties.
std::optional<std::size_t> closest_vehicle(const FleetSnapshot& snap, double x);
std::optional<std::size_t> closest_vehicle(const Fleet& fleet, double x, double t);

/// Number of active vehicles with chi(x - p_i) > 0.
std::size_t coverage_count(const FleetSnapshot& snap, double x, const CutoffShape<double>& shape);
std::size_t coverage_count(const Fleet& fleet, double x, double t, const CutoffShape<double>& shape);

/// Trajectories whose road_id matches.
Fleet fleet_for_road(const Fleet& fleet, int road_id);

/// Every k-th trajectory starting from the first.
Fleet subsample(const Fleet& fleet, std::size_t stride);

}  // namespace trajflow
