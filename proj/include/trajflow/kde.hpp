#pragma once

#include "trajflow/grid.hpp"
#include "trajflow/trajectory.hpp"

namespace trajflow {

/// Leading constant of the Gaussian window.
enum class KernelNormalization {
  Literal,   // 1 / (2 pi h); integrates to 1 / sqrt(2 pi)
  Standard,  // 1 / (sqrt(2 pi) h); integrates to 1
};

struct KdeConfig {
  double bandwidth;  // km
  KernelNormalization normalization = KernelNormalization::Literal;

  double kernel(double x) const;
};

/// Parzen-Rosenblatt density: sum_i K(x_j - p_i(t)) at every cell center.
Field kde_density(const FleetSnapshot& snap, const KdeConfig& cfg, const SpatialGrid& grid);
Field kde_density(const Fleet& fleet, double t, const KdeConfig& cfg, const SpatialGrid& grid);

/// Kernel-weighted mean speed. Cells where every weight underflows take the
/// nearest vehicle's speed. Requires at least one active vehicle.
Field kde_velocity(const FleetSnapshot& snap, const KdeConfig& cfg, const SpatialGrid& grid);
Field kde_velocity(const Fleet& fleet, double t, const KdeConfig& cfg, const SpatialGrid& grid);

}  // namespace trajflow
