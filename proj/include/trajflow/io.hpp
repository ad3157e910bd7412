#pragma once

#include <map>
#include <string>
#include <vector>

#include "trajflow/grid.hpp"
#include "trajflow/network.hpp"
#include "trajflow/trajectory.hpp"

namespace trajflow {

/// Reads `vehicle_id,road_id,t_seconds,x_km[,v_kmh]` rows. A header line starting
/// with `vehicle_id` and `#` comments are skipped. Rows are grouped by
/// (vehicle, road) in order of first appearance and sorted by time. A vehicle
/// whose positions decrease is dropped and reported in `warnings`.
Fleet load_trajectories(const std::string& path, std::vector<std::string>* warnings = nullptr);

void write_trajectories(const std::string& path, const Fleet& fleet);

/// Reads `road_id,minute,flux_veh_per_h,speed_kmh` rows into one series per road.
/// Duplicate or missing minutes are errors.
std::vector<SensorSeries> load_sensors(const std::string& path);

void write_sensors(const std::string& path, const std::vector<SensorSeries>& series);

/// Time series of one per-cell quantity.
struct FieldDump {
  std::string quantity;  // rho, w, speed, accel, emission, psi
  std::string units;
  double a = 0.0;
  double b = 0.0;
  double dx = 0.0;
  double dt = 0.0;
  std::size_t n_cells = 0;
  std::size_t record_every = 1;
  std::map<std::string, std::string> extra;  // additional header keys
  std::vector<double> times;                 // h
  std::vector<Field> rows;

  void append(double t, const Field& row);
};

/// Writes a dump: one `# key=value,...` header line, a column line, then one
/// row per recorded step (`t_h` followed by the cells), 17 significant digits.
void write_field(const std::string& path, const FieldDump& dump);
FieldDump read_field(const std::string& path);

/// Creates the directory (and parents) or throws IoError.
void ensure_directory(const std::string& dir);

}  // namespace trajflow
