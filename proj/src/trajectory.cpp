#include "trajflow/trajectory.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "trajflow/errors.hpp"

namespace trajflow {

Trajectory::Trajectory(std::string vehicle_id, std::vector<TrajectorySample> samples, int road_id)
    : vehicle_id_(std::move(vehicle_id)), road_id_(road_id), samples_(std::move(samples)) {
  if (samples_.empty()) throw ConfigError("trajectory " + vehicle_id_ + ": no samples");
  for (std::size_t k = 1; k < samples_.size(); ++k) {
    if (!(samples_[k].t > samples_[k - 1].t))
      throw ConfigError("trajectory " + vehicle_id_ + ": sample times not strictly increasing");
    if (samples_[k].x < samples_[k - 1].x)
      throw ConfigError("trajectory " + vehicle_id_ + ": decreasing position");
  }
  has_speeds_ = std::all_of(samples_.begin(), samples_.end(),
                            [](const TrajectorySample& s) { return s.v.has_value(); });
}

double Trajectory::max_speed() const {
  double vmax = 0.0;
  if (has_speeds_) {
    for (const auto& s : samples_) vmax = std::max(vmax, *s.v);
    return vmax;
  }
  for (std::size_t k = 1; k < samples_.size(); ++k)
    vmax = std::max(vmax, (samples_[k].x - samples_[k - 1].x) / (samples_[k].t - samples_[k - 1].t));
  return vmax;
}

namespace {

// Index k of the segment [t_k, t_{k+1}] containing t; samples.size() >= 2.
std::size_t segment_of(const std::vector<TrajectorySample>& s, double t) {
  auto it = std::upper_bound(s.begin(), s.end(), t,
                             [](double value, const TrajectorySample& e) { return value < e.t; });
  auto k = static_cast<std::size_t>(std::distance(s.begin(), it));
  if (k == 0) return 0;
  return std::min(k - 1, s.size() - 2);
}

double speed_at(const std::vector<TrajectorySample>& s, bool has_speeds, double t) {
  const std::size_t k = segment_of(s, t);
  const auto& a = s[k];
  const auto& b = s[k + 1];
  if (!has_speeds) return (b.x - a.x) / (b.t - a.t);
  const double lambda = (t - a.t) / (b.t - a.t);
  return (1.0 - lambda) * *a.v + lambda * *b.v;
}

}  // namespace

std::optional<Kinematics> interpolate(const Trajectory& traj, double t) {
  if (!traj.covers(t)) return std::nullopt;
  const auto& s = traj.samples();
  if (s.size() == 1) return Kinematics{s.front().x, s.front().v.value_or(0.0), 0.0};

  const std::size_t k = segment_of(s, t);
  const auto& a = s[k];
  const auto& b = s[k + 1];
  const double lambda = (t - a.t) / (b.t - a.t);
  Kinematics out{};
  out.p = (1.0 - lambda) * a.x + lambda * b.x;
  out.p_dot = speed_at(s, traj.has_speeds(), t);

  const double h = b.t - a.t;
  const double lo = std::max(traj.t_begin(), t - h / 2);
  const double hi = std::min(traj.t_end(), t + h / 2);
  out.p_ddot = hi > lo ? (speed_at(s, traj.has_speeds(), hi) - speed_at(s, traj.has_speeds(), lo)) /
                             (hi - lo)
                       : 0.0;
  return out;
}

double FleetSnapshot::max_speed() const {
  double vmax = 0.0;
  for (const auto& v : vehicles) vmax = std::max(vmax, v.state.p_dot);
  return vmax;
}

FleetSnapshot snapshot(const Fleet& fleet, double t) {
  FleetSnapshot snap;
  snap.t = t;
  for (std::size_t i = 0; i < fleet.size(); ++i)
    if (auto k = interpolate(fleet[i], t)) snap.vehicles.push_back({i, *k});
  return snap;
}

std::optional<std::size_t> closest_vehicle(const FleetSnapshot& snap, double x) {
  std::optional<std::size_t> best;
  double best_dist = std::numeric_limits<double>::infinity();
  for (const auto& v : snap.vehicles) {
    const double d = std::abs(x - v.state.p);
    if (d < best_dist) {
      best_dist = d;
      best = v.index;
    }
  }
  return best;
}

std::optional<std::size_t> closest_vehicle(const Fleet& fleet, double x, double t) {
  return closest_vehicle(snapshot(fleet, t), x);
}

std::size_t coverage_count(const FleetSnapshot& snap, double x, const CutoffShape<double>& shape) {
  return static_cast<std::size_t>(std::count_if(
      snap.vehicles.begin(), snap.vehicles.end(),
      [&](const ActiveVehicle& v) { return cutoff(x - v.state.p, shape) > 0.0; }));
}

std::size_t coverage_count(const Fleet& fleet, double x, double t, const CutoffShape<double>& shape) {
  return coverage_count(snapshot(fleet, t), x, shape);
}

Fleet fleet_for_road(const Fleet& fleet, int road_id) {
  Fleet out;
  std::copy_if(fleet.begin(), fleet.end(), std::back_inserter(out),
               [&](const Trajectory& tr) { return tr.road_id() == road_id; });
  return out;
}

Fleet subsample(const Fleet& fleet, std::size_t stride) {
  if (stride == 0) throw ConfigError("subsample: stride must be positive");
  Fleet out;
  for (std::size_t i = 0; i < fleet.size(); i += stride) out.push_back(fleet[i]);
  return out;
}

}  // namespace trajflow
