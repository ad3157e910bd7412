#include "trajflow/lwr.hpp"

#include <algorithm>
#include <sstream>

namespace trajflow {

SpeedLaw greenshields_law(const GreenshieldsDiagram<double>& d) {
  return {[d](double rho) { return greenshields_speed(rho, d); }, d.rho_max, d.u_max, d.u_max};
}

SpeedLaw cgarz_law(const CgarzDiagram<double>& d, double w) {
  w = detail::clamp_to_range(w, d.w_l, d.w_r, "w");
  return {[d, w](double rho) { return cgarz_speed(rho, w, d); }, d.rho_max, d.v_max,
          cgarz_slope_bound(d)};
}

namespace {

CellInfluence influence_for(double x, double t, const Fleet& fleet, const CutoffShape<double>& shape,
                            EmbeddingMode mode) {
  if (mode == EmbeddingMode::None) return {};
  return influence_at(snapshot(fleet, t), x, shape, mode);
}

CriticalPoint critical_point(const CellInfluence& infl, const SpeedLaw& law,
                             const FluxSamplingConfig& sampling) {
  sampling.validate();
  return critical_density([&](double r) { return r * embedded_speed(infl, law.speed(r)); },
                          law.rho_max, sampling.n_rho_samples);
}

}  // namespace

double embedded_speed(double x, double t, double rho, const Fleet& fleet, const SpeedLaw& law,
                      const CutoffShape<double>& shape, EmbeddingMode mode) {
  return embedded_speed(influence_for(x, t, fleet, shape, mode), law.speed(rho));
}

double embedded_flux(double x, double t, double rho, const Fleet& fleet, const SpeedLaw& law,
                     const CutoffShape<double>& shape, EmbeddingMode mode) {
  return rho * embedded_speed(x, t, rho, fleet, law, shape, mode);
}

CriticalPoint critical_density(double x, double t, const Fleet& fleet, const SpeedLaw& law,
                               const CutoffShape<double>& shape, EmbeddingMode mode,
                               const FluxSamplingConfig& sampling) {
  return critical_point(influence_for(x, t, fleet, shape, mode), law, sampling);
}

double sending(double x, double t, double rho, const Fleet& fleet, const SpeedLaw& law,
               const CutoffShape<double>& shape, EmbeddingMode mode,
               const FluxSamplingConfig& sampling) {
  const CellInfluence infl = influence_for(x, t, fleet, shape, mode);
  return sending(rho, rho * embedded_speed(infl, law.speed(rho)), critical_point(infl, law, sampling));
}

double receiving(double x, double t, double rho, const Fleet& fleet, const SpeedLaw& law,
                 const CutoffShape<double>& shape, EmbeddingMode mode,
                 const FluxSamplingConfig& sampling) {
  const CellInfluence infl = influence_for(x, t, fleet, shape, mode);
  return receiving(rho, rho * embedded_speed(infl, law.speed(rho)),
                   critical_point(infl, law, sampling));
}

std::vector<CellInfluence> cell_influences(const SpatialGrid& grid, const FleetSnapshot& snap,
                                           const CutoffShape<double>& shape, EmbeddingMode mode) {
  std::vector<CellInfluence> out(grid.size());
  if (mode == EmbeddingMode::None || snap.empty()) return out;
  for (std::size_t j = 0; j < grid.size(); ++j) out[j] = influence_at(snap, grid.center(j), shape, mode);
  return out;
}

double cfl_bound(double dx, double u_max, double slope_bound, double fleet_speed, bool fleet_moving) {
  const double slope = (fleet_moving ? 2.0 : 1.0) * slope_bound;
  return dx / std::max({fleet_speed, u_max, slope});
}

LwrSolver::LwrSolver(SpatialGrid grid, LwrConfig cfg) : grid_(grid), cfg_(std::move(cfg)) {
  cfg_.sampling.validate();
  if (!cfg_.law.speed) throw ConfigError("lwr: speed law missing");
}

double LwrSolver::max_dt(const Fleet& fleet) const {
  double v = 0.0;
  if (cfg_.mode != EmbeddingMode::None)
    for (const auto& tr : fleet) v = std::max(v, tr.max_speed());
  return cfl_bound(grid_.dx(), cfg_.law.u_max, cfg_.law.slope_bound, v, v > 0.0);
}

double LwrSolver::step_bound(const FleetSnapshot& snap) const {
  const double v = cfg_.mode == EmbeddingMode::None ? 0.0 : snap.max_speed();
  return cfl_bound(grid_.dx(), cfg_.law.u_max, cfg_.law.slope_bound, v, v > 0.0);
}

CellFluxTable LwrSolver::tabulate(const Field& rho, const FleetSnapshot& snap) const {
  const auto infl = cell_influences(grid_, snap, cfg_.shape, cfg_.mode);
  return tabulate_fluxes(
      rho, cfg_.law.rho_max, cfg_.sampling,
      [&](std::size_t j, double r) { return embedded_speed(infl[j], cfg_.law.speed(r)); },
      [&](std::size_t j) -> std::optional<double> {
        if (infl[j].empty()) return 0.0;
        return std::nullopt;
      });
}

namespace {
void check_step(double dt, double bound, double t) {
  if (!(dt > 0.0) || dt > bound * (1.0 + 1e-12)) {
    std::ostringstream msg;
    msg.precision(17);
    msg << "CFL violation at t=" << t << " h: dt=" << dt << " h exceeds bound " << bound << " h";
    throw NumericalError(msg.str());
  }
}
}  // namespace

MacroState1 LwrSolver::step(const MacroState1& state, double t, const Fleet& fleet, double dt) const {
  return step(state, snapshot(fleet, t), dt);
}

MacroState1 LwrSolver::step(const MacroState1& state, const FleetSnapshot& snap, double dt) const {
  if (static_cast<std::size_t>(state.rho.size()) != grid_.size())
    throw ConfigError("lwr: state size does not match the grid");
  check_step(dt, step_bound(snap), snap.t);
  const CellFluxTable table = tabulate(state.rho, snap);
  const double fl = left_face_flux(cfg_.left, table);
  const double fr = right_face_flux(cfg_.right, table);
  return {conservative_update(state.rho, table, fl, fr, dt, grid_.dx(), cfg_.law.rho_max)};
}

}  // namespace trajflow
