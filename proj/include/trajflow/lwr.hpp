#pragma once

#include <functional>
#include <vector>

#include "trajflow/ctm.hpp"
#include "trajflow/diagrams.hpp"
#include "trajflow/grid.hpp"
#include "trajflow/trajectory.hpp"

namespace trajflow {

/// Analytical speed law u(rho) of a first-order model.
struct SpeedLaw {
  std::function<double(double)> speed;
  double rho_max;
  double u_max;        // u(0)
  double slope_bound;  // sup over rho of |rho u'(rho)|
};

SpeedLaw greenshields_law(const GreenshieldsDiagram<double>& d);

/// v(., w) of a CGARZ diagram at frozen w.
SpeedLaw cgarz_law(const CgarzDiagram<double>& d, double w);

/// Embedded speed at (x, t) for density rho.
double embedded_speed(double x, double t, double rho, const Fleet& fleet, const SpeedLaw& law,
                      const CutoffShape<double>& shape, EmbeddingMode mode);

/// rho times the embedded speed.
double embedded_flux(double x, double t, double rho, const Fleet& fleet, const SpeedLaw& law,
                     const CutoffShape<double>& shape, EmbeddingMode mode);

CriticalPoint critical_density(double x, double t, const Fleet& fleet, const SpeedLaw& law,
                               const CutoffShape<double>& shape, EmbeddingMode mode,
                               const FluxSamplingConfig& sampling = {});

double sending(double x, double t, double rho, const Fleet& fleet, const SpeedLaw& law,
               const CutoffShape<double>& shape, EmbeddingMode mode,
               const FluxSamplingConfig& sampling = {});
double receiving(double x, double t, double rho, const Fleet& fleet, const SpeedLaw& law,
                 const CutoffShape<double>& shape, EmbeddingMode mode,
                 const FluxSamplingConfig& sampling = {});

/// Influence of the snapshot on every cell center of the grid.
std::vector<CellInfluence> cell_influences(const SpatialGrid& grid, const FleetSnapshot& snap,
                                           const CutoffShape<double>& shape, EmbeddingMode mode);

/// Time-step bound for an embedded flux built from a law with speeds up to
/// `u_max` and |rho u'| up to `slope_bound`, given the fastest tracked speed.
///
/// The derivative of rho * blend(u) in rho is at most max(blend, 2 rho |u'|)
/// in magnitude where a vehicle with positive speed is present, so the slope
/// term is doubled whenever `fleet_moving` is set.
double cfl_bound(double dx, double u_max, double slope_bound, double fleet_speed, bool fleet_moving);

struct LwrConfig {
  SpeedLaw law;
  CutoffShape<double> shape{0.2, 0.6};
  EmbeddingMode mode = EmbeddingMode::ClosestVehicle;
  FluxSamplingConfig sampling{};
  Boundary left = Boundary::demand(0.0);
  Boundary right = Boundary::neumann();
};

/// First-order CTM with trajectory-embedded velocity.
class LwrSolver {
public:
  LwrSolver(SpatialGrid grid, LwrConfig cfg);

  const SpatialGrid& grid() const { return grid_; }
  const LwrConfig& config() const { return cfg_; }

  /// Largest admissible dt over the whole lifetime of the fleet.
  double max_dt(const Fleet& fleet) const;

  /// Largest admissible dt for a step taken from this snapshot.
  double step_bound(const FleetSnapshot& snap) const;

  CellFluxTable tabulate(const Field& rho, const FleetSnapshot& snap) const;

  /// Advances from t to t + dt. Throws NumericalError when dt exceeds the bound.
  MacroState1 step(const MacroState1& state, double t, const Fleet& fleet, double dt) const;
  MacroState1 step(const MacroState1& state, const FleetSnapshot& snap, double dt) const;

private:
  SpatialGrid grid_;
  LwrConfig cfg_;
};

}  // namespace trajflow
