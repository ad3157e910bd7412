#include "trajflow/ctm.hpp"

#include <limits>

namespace trajflow {

CellInfluence influence_at(const FleetSnapshot& snap, double x, const CutoffShape<double>& shape,
                           EmbeddingMode mode) {
  CellInfluence out;
  if (mode == EmbeddingMode::None || snap.empty()) return out;

  auto make = [&](const ActiveVehicle& v) {
    const double xi = x - v.state.p;
    return Influence{cutoff(xi, shape), cutoff_derivative(xi, shape), v.state.p_dot, v.state.p_ddot};
  };

  if (mode == EmbeddingMode::ClosestVehicle) {
    const ActiveVehicle* best = nullptr;
    double best_dist = std::numeric_limits<double>::infinity();
    for (const auto& v : snap.vehicles) {
      const double d = std::abs(x - v.state.p);
      if (d < best_dist) {
        best_dist = d;
        best = &v;
      }
    }
    if (best != nullptr) {
      const Influence infl = make(*best);
      if (infl.chi > 0.0) out.vehicles.push_back(infl);
    }
    return out;
  }

  for (const auto& v : snap.vehicles) {
    const Influence infl = make(v);
    if (infl.chi > 0.0) out.vehicles.push_back(infl);
  }
  return out;
}

double left_face_flux(const Boundary& b, const CellFluxTable& table) {
  switch (b.kind) {
    case Boundary::Kind::Wall:
      return 0.0;
    case Boundary::Kind::Neumann:
      return numerical_flux(table.sending(0), table.receiving(0));
    case Boundary::Kind::Demand:
      return numerical_flux(std::max(0.0, b.value), table.receiving(0));
    case Boundary::Kind::Fixed:
      return b.value;
    case Boundary::Kind::Supply:
      break;
  }
  throw ConfigError("left boundary cannot be a supply condition");
}

double right_face_flux(const Boundary& b, const CellFluxTable& table) {
  const Eigen::Index last = table.sending.size() - 1;
  switch (b.kind) {
    case Boundary::Kind::Wall:
      return 0.0;
    case Boundary::Kind::Neumann:
      return numerical_flux(table.sending(last), table.receiving(last));
    case Boundary::Kind::Supply:
      return numerical_flux(table.sending(last), std::max(0.0, b.value));
    case Boundary::Kind::Fixed:
      return b.value;
    case Boundary::Kind::Demand:
      break;
  }
  throw ConfigError("right boundary cannot be a demand condition");
}

Field conservative_update(const Field& rho, const CellFluxTable& table, double left_flux,
                          double right_flux, double dt, double dx, double rho_max) {
  const Eigen::Index n = rho.size();
  Field faces(n + 1);
  faces(0) = left_flux;
  faces(n) = right_flux;
  if (n > 1)
    faces.segment(1, n - 1) =
        table.sending.head(n - 1).min(table.receiving.tail(n - 1));

  const double lambda = dt / dx;
  Field next = rho - lambda * (faces.tail(n) - faces.head(n));
  const double band = 1e-12 * rho_max;
  for (Eigen::Index j = 0; j < n; ++j) {
    if (next(j) < 0.0 && next(j) > -band) next(j) = 0.0;
    if (next(j) > rho_max && next(j) < rho_max + band) next(j) = rho_max;
  }
  return next;
}

}  // namespace trajflow
