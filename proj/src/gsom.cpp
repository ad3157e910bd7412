#include "trajflow/gsom.hpp"

#include <algorithm>
#include <sstream>

namespace trajflow {

double embedded_speed_2(double x, double t, double rho, double w, const Fleet& fleet,
                        const CgarzDiagram<double>& diag, const CutoffShape<double>& shape,
                        EmbeddingMode mode) {
  return embedded_speed(x, t, rho, fleet, cgarz_law(diag, w), shape, mode);
}

GsomSolver::GsomSolver(SpatialGrid grid, GsomConfig cfg) : grid_(grid), cfg_(std::move(cfg)) {
  cfg_.sampling.validate();
}

double GsomSolver::max_dt(const Fleet& fleet) const {
  double v = 0.0;
  if (cfg_.mode != EmbeddingMode::None)
    for (const auto& tr : fleet) v = std::max(v, tr.max_speed());
  const auto& d = cfg_.diagram;
  return cfl_bound(grid_.dx(), d.v_max, cgarz_slope_bound(d), v, v > 0.0);
}

double GsomSolver::step_bound(const FleetSnapshot& snap) const {
  const double v = cfg_.mode == EmbeddingMode::None ? 0.0 : snap.max_speed();
  const auto& d = cfg_.diagram;
  return cfl_bound(grid_.dx(), d.v_max, cgarz_slope_bound(d), v, v > 0.0);
}

CellFluxTable GsomSolver::tabulate(const MacroState2& state, const FleetSnapshot& snap) const {
  if (static_cast<std::size_t>(state.rho.size()) != grid_.size() || state.w.size() != state.rho.size())
    throw ConfigError("gsom: state size does not match the grid");
  const auto infl = cell_influences(grid_, snap, cfg_.shape, cfg_.mode);
  const auto& d = cfg_.diagram;
  Field w(state.w.size());
  for (Eigen::Index j = 0; j < w.size(); ++j) w(j) = detail::clamp_to_range(state.w(j), d.w_l, d.w_r, "w");
  return tabulate_fluxes(
      state.rho, d.rho_max, cfg_.sampling,
      [&](std::size_t j, double r) {
        return embedded_speed(infl[j], cgarz_speed(r, w(static_cast<Eigen::Index>(j)), d));
      },
      [&](std::size_t j) -> std::optional<double> {
        if (infl[j].empty()) return w(static_cast<Eigen::Index>(j));
        return std::nullopt;
      });
}

MacroState2 GsomSolver::step(const MacroState2& state, double t, const Fleet& fleet, double dt,
                             std::optional<double> w_in) const {
  return step(state, snapshot(fleet, t), dt, w_in);
}

MacroState2 GsomSolver::step(const MacroState2& state, const FleetSnapshot& snap, double dt,
                             std::optional<double> w_in) const {
  const CellFluxTable table = tabulate(state, snap);
  const double fl = left_face_flux(cfg_.left, table);
  const double fr = right_face_flux(cfg_.right, table);
  return advance(state, snap, table, fl, fr, w_in.value_or(state.w(0)), dt);
}

MacroState2 GsomSolver::advance(const MacroState2& state, const FleetSnapshot& snap,
                                const CellFluxTable& table, double left_flux, double right_flux,
                                double w_in, double dt) const {
  const double bound = step_bound(snap);
  if (!(dt > 0.0) || dt > bound * (1.0 + 1e-12)) {
    std::ostringstream msg;
    msg.precision(17);
    msg << "CFL violation at t=" << snap.t << " h: dt=" << dt << " h exceeds bound " << bound << " h";
    throw NumericalError(msg.str());
  }
  const auto& d = cfg_.diagram;
  const double lambda = dt / grid_.dx();
  MacroState2 next;
  next.rho = conservative_update(state.rho, table, left_flux, right_flux, dt, grid_.dx(), d.rho_max);

  const Eigen::Index n = state.w.size();
  next.w.resize(n);
  const double ghost = detail::clamp_to_range(w_in, d.w_l, d.w_r, "w_in");
  for (Eigen::Index j = 0; j < n; ++j) {
    const double upstream = j == 0 ? ghost : state.w(j - 1);
    const double w = state.w(j) - lambda * table.speed(j) * (state.w(j) - upstream);
    next.w(j) = detail::clamp_to_range(w, d.w_l, d.w_r, "w");
  }
  return next;
}

namespace {

struct Partials {
  double v_rho;   // d V / d rho
  double v_t;     // explicit time derivative
  double v_x;     // explicit space derivative
  bool singular;  // some p_dot + v = 0
};

Partials partials(const CellInfluence& infl, double v, double v_rho) {
  if (infl.empty()) return {v_rho, 0.0, 0.0, false};
  Partials out{0.0, 0.0, 0.0, false};
  for (const auto& k : infl.vehicles) {
    const double s = k.p_dot + v;
    if (s == 0.0) return {0.0, 0.0, 0.0, true};
    const double s2 = s * s;
    out.v_rho += k.chi * 2.0 * v_rho * k.p_dot * k.p_dot / s2 + (1.0 - k.chi) * v_rho;
    out.v_t += k.chi_prime * k.p_dot * v * (v - k.p_dot) / s + k.chi * 2.0 * k.p_ddot * v * v / s2;
    out.v_x += k.chi_prime * v * (k.p_dot - v) / s;
  }
  const auto m = static_cast<double>(infl.vehicles.size());
  out.v_rho /= m;
  out.v_t /= m;
  out.v_x /= m;
  return out;
}

}  // namespace

Field acceleration_field(const GsomSolver& solver, const MacroState2& state,
                         const FleetSnapshot& snap) {
  return acceleration_field(solver, state, snap, solver.tabulate(state, snap));
}

Field acceleration_field(const GsomSolver& solver, const MacroState2& state,
                         const FleetSnapshot& snap, const CellFluxTable& table) {
  const auto& cfg = solver.config();
  const auto& d = cfg.diagram;
  const auto infl = cell_influences(solver.grid(), snap, cfg.shape, cfg.mode);
  const Eigen::Index n = state.rho.size();
  const double dx = solver.grid().dx();
  const Field& speed = table.speed;

  Field a = Field::Zero(n);
  for (Eigen::Index j = 0; j < n; ++j) {
    const double rho = state.rho(j);
    const double w = state.w(j);
    const double v = cgarz_speed(rho, w, d);
    const Partials p = partials(infl[static_cast<std::size_t>(j)], v, cgarz_speed_drho(rho, w, d));
    if (p.singular) continue;
    double dvdx = 0.0;
    if (n > 1) {
      if (j == 0)
        dvdx = (speed(1) - speed(0)) / dx;
      else if (j == n - 1)
        dvdx = (speed(n - 1) - speed(n - 2)) / dx;
      else
        dvdx = (speed(j + 1) - speed(j - 1)) / (2.0 * dx);
    }
    a(j) = p.v_t - rho * p.v_rho * dvdx + speed(j) * p.v_x;
  }
  return a;
}

}  // namespace trajflow
