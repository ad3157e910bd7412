#pragma once

#include <optional>

#include "trajflow/ctm.hpp"
#include "trajflow/diagrams.hpp"
#include "trajflow/grid.hpp"
#include "trajflow/lwr.hpp"
#include "trajflow/trajectory.hpp"

namespace trajflow {

/// Embedded CGARZ speed at (x, t).
double embedded_speed_2(double x, double t, double rho, double w, const Fleet& fleet,
                        const CgarzDiagram<double>& diag, const CutoffShape<double>& shape,
                        EmbeddingMode mode = EmbeddingMode::ClosestVehicle);

struct GsomConfig {
  CgarzDiagram<double> diagram;
  CutoffShape<double> shape{0.2, 0.6};
  EmbeddingMode mode = EmbeddingMode::ClosestVehicle;
  FluxSamplingConfig sampling{};
  Boundary left = Boundary::demand(0.0);
  Boundary right = Boundary::neumann();
};

/// CGARZ model: density by CTM with a per-cell critical density that depends
/// on the cell's w, and w by first-order upwinding with the embedded speed.
class GsomSolver {
public:
  GsomSolver(SpatialGrid grid, GsomConfig cfg);

  const SpatialGrid& grid() const { return grid_; }
  const GsomConfig& config() const { return cfg_; }

  double max_dt(const Fleet& fleet) const;
  double step_bound(const FleetSnapshot& snap) const;

  CellFluxTable tabulate(const MacroState2& state, const FleetSnapshot& snap) const;

  /// One step with the configured boundaries. `w_in` is the w carried by the
  /// inflow; it defaults to the first cell's w.
  MacroState2 step(const MacroState2& state, double t, const Fleet& fleet, double dt,
                   std::optional<double> w_in = std::nullopt) const;
  MacroState2 step(const MacroState2& state, const FleetSnapshot& snap, double dt,
                   std::optional<double> w_in = std::nullopt) const;

  /// One step from a precomputed table with explicit boundary face fluxes.
  /// Used by junction coupling; checks the CFL bound like `step`.
  MacroState2 advance(const MacroState2& state, const FleetSnapshot& snap, const CellFluxTable& table,
                      double left_flux, double right_flux, double w_in, double dt) const;

private:
  SpatialGrid grid_;
  GsomConfig cfg_;
};

/// Acceleration along the flow at every cell center, in km/h^2:
///   a = V_t - rho V_rho D_x V + V V_x
/// where D_x V is the centered difference of the discrete embedded speed field
/// (one-sided at the ends), V_x the explicit x-dependence through the cutoff,
/// and V_t the explicit time dependence through the vehicle trajectory. Under
/// ACV the partials are averaged over the covering vehicles. Cells where some
/// p_dot + v vanishes get 0.
Field acceleration_field(const GsomSolver& solver, const MacroState2& state,
                         const FleetSnapshot& snap);
Field acceleration_field(const GsomSolver& solver, const MacroState2& state,
                         const FleetSnapshot& snap, const CellFluxTable& table);

}  // namespace trajflow
