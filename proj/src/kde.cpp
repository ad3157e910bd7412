#include "trajflow/kde.hpp"

#include <cmath>
#include <numbers>

namespace trajflow {

double KdeConfig::kernel(double x) const {
  const double scale = normalization == KernelNormalization::Literal
                           ? 1.0 / (2.0 * std::numbers::pi * bandwidth)
                           : 1.0 / (std::sqrt(2.0 * std::numbers::pi) * bandwidth);
  return scale * std::exp(-x * x / (2.0 * bandwidth * bandwidth));
}

namespace {
void check(const KdeConfig& cfg) {
  if (!(cfg.bandwidth > 0.0)) throw ConfigError("kde: bandwidth must be positive");
}
}  // namespace

Field kde_density(const FleetSnapshot& snap, const KdeConfig& cfg, const SpatialGrid& grid) {
  check(cfg);
  Field rho = Field::Zero(static_cast<Eigen::Index>(grid.size()));
  for (std::size_t j = 0; j < grid.size(); ++j) {
    const double x = grid.center(j);
    double sum = 0.0;
    for (const auto& v : snap.vehicles) sum += cfg.kernel(x - v.state.p);
    rho(static_cast<Eigen::Index>(j)) = sum;
  }
  return rho;
}

Field kde_density(const Fleet& fleet, double t, const KdeConfig& cfg, const SpatialGrid& grid) {
  return kde_density(snapshot(fleet, t), cfg, grid);
}

Field kde_velocity(const FleetSnapshot& snap, const KdeConfig& cfg, const SpatialGrid& grid) {
  check(cfg);
  if (snap.empty()) throw ConfigError("kde_velocity: no active vehicles");
  Field nu(static_cast<Eigen::Index>(grid.size()));
  for (std::size_t j = 0; j < grid.size(); ++j) {
    const double x = grid.center(j);
    double num = 0.0;
    double den = 0.0;
    for (const auto& v : snap.vehicles) {
      const double k = cfg.kernel(x - v.state.p);
      num += v.state.p_dot * k;
      den += k;
    }
    if (den > 0.0) {
      nu(static_cast<Eigen::Index>(j)) = num / den;
    } else {
      const auto nearest = *closest_vehicle(snap, x);
      for (const auto& v : snap.vehicles)
        if (v.index == nearest) nu(static_cast<Eigen::Index>(j)) = v.state.p_dot;
    }
  }
  return nu;
}

Field kde_velocity(const Fleet& fleet, double t, const KdeConfig& cfg, const SpatialGrid& grid) {
  return kde_velocity(snapshot(fleet, t), cfg, grid);
}

}  // namespace trajflow
