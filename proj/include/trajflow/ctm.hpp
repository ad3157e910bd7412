#pragma once

#include <algorithm>
#include <cstddef>
#include <unordered_map>
#include <vector>

#include "trajflow/diagrams.hpp"
#include "trajflow/grid.hpp"
#include "trajflow/trajectory.hpp"

namespace trajflow {

enum class EmbeddingMode {
  None,                    // plain analytical speed law
  ClosestVehicle,          // blend with the nearest tracked vehicle only
  AverageClosestVehicles,  // mean of blends over every vehicle whose cutoff covers x
};

/// Contribution of one tracked vehicle to the speed law at a point.
struct Influence {
  double chi;
  double chi_prime;
  double p_dot;
  double p_ddot;
};

/// Vehicles acting on one cell. Empty means the analytical law applies unchanged.
struct CellInfluence {
  std::vector<Influence> vehicles;
  bool empty() const { return vehicles.empty(); }
};

/// Vehicles influencing point x under the given mode. ClosestVehicle yields at
/// most one entry (the nearest vehicle, if its cutoff is positive at x).
CellInfluence influence_at(const FleetSnapshot& snap, double x, const CutoffShape<double>& shape,
                           EmbeddingMode mode);

/// chi * 2 p u / (p + u) + (1 - chi) u, and 0 when p + u = 0.
inline double harmonic_blend(double chi, double p_dot, double u) {
  const double sum = p_dot + u;
  if (sum == 0.0) return 0.0;
  return chi * (2.0 * p_dot * u / sum) + (1.0 - chi) * u;
}

/// Embedded speed given the analytical speed u at the current density.
inline double embedded_speed(const CellInfluence& infl, double u) {
  if (infl.empty()) return u;
  double sum = 0.0;
  for (const auto& v : infl.vehicles) sum += harmonic_blend(v.chi, v.p_dot, u);
  return sum / static_cast<double>(infl.vehicles.size());
}

struct FluxSamplingConfig {
  std::size_t n_rho_samples = 256;
  void validate() const {
    if (n_rho_samples < 16) throw ConfigError("flux sampling: need at least 16 density samples");
  }
};

struct CriticalPoint {
  double sigma;
  double flux_max;
};

/// Density sample l of n on [0, rho_max].
inline double density_sample(double rho_max, std::size_t l, std::size_t n) {
  return rho_max * static_cast<double>(l) / static_cast<double>(n - 1);
}

/// Argmax of a sampled flux over n equispaced densities; the first maximum wins,
/// so an identically zero flux gives sigma = 0.
template <class Flux>
CriticalPoint critical_density(Flux&& flux, double rho_max, std::size_t n) {
  CriticalPoint best{0.0, flux(0.0)};
  for (std::size_t l = 1; l < n; ++l) {
    const double rho = density_sample(rho_max, l, n);
    const double f = flux(rho);
    if (f > best.flux_max) best = {rho, f};
  }
  return best;
}

/// Demand. Capped at the sampled maximum so that it stays non-decreasing in rho
/// even when the true maximizer falls between two samples.
inline double sending(double rho, double flux_at_rho, const CriticalPoint& c) {
  return rho <= c.sigma ? std::min(flux_at_rho, c.flux_max) : c.flux_max;
}

/// Supply; non-increasing in rho.
inline double receiving(double rho, double flux_at_rho, const CriticalPoint& c) {
  return rho <= c.sigma ? c.flux_max : std::min(flux_at_rho, c.flux_max);
}

inline double numerical_flux(double sending_upstream, double receiving_downstream) {
  return std::min(sending_upstream, receiving_downstream);
}

/// Per-cell quantities a CTM step needs.
struct CellFluxTable {
  Field sigma;
  Field flux_max;
  Field flux;       // F(rho_j) at the current density
  Field sending;
  Field receiving;
  Field speed;      // embedded speed at the current density
};

/// Road-end condition for a CTM step.
struct Boundary {
  enum class Kind {
    Wall,     // zero flux
    Neumann,  // ghost cell copies the boundary cell
    Demand,   // upstream offers `value` (left end only): flux = min(value, R_0)
    Supply,   // downstream accepts `value` (right end only): flux = min(S_last, value)
    Fixed,    // flux imposed exactly (junction coupling)
  };
  Kind kind = Kind::Wall;
  double value = 0.0;

  static Boundary wall() { return {Kind::Wall, 0.0}; }
  static Boundary neumann() { return {Kind::Neumann, 0.0}; }
  static Boundary demand(double q) { return {Kind::Demand, q}; }
  static Boundary supply(double q) { return {Kind::Supply, q}; }
  static Boundary fixed(double q) { return {Kind::Fixed, q}; }
};

/// Flux through the left face of cell 0.
double left_face_flux(const Boundary& b, const CellFluxTable& table);
/// Flux through the right face of the last cell.
double right_face_flux(const Boundary& b, const CellFluxTable& table);

/// rho_j - dt/dx (F_{j+1/2} - F_{j-1/2}) with the given boundary faces. Values
/// that drift past [0, rho_max] by less than 1e-12 rho_max are clamped.
Field conservative_update(const Field& rho, const CellFluxTable& table, double left_flux,
                          double right_flux, double dt, double dx, double rho_max);

/// Builds the flux table for one step.
///
/// `speed(j, rho)` is the (embedded) speed law at cell j. `shared_key(j)` returns
/// a key when cell j carries no trajectory influence; cells with equal keys have
/// the same law, so their critical point is sampled once per step.
template <class CellSpeed, class Shared>
CellFluxTable tabulate_fluxes(const Field& rho, double rho_max, const FluxSamplingConfig& sampling,
                              CellSpeed&& speed, Shared&& shared_key) {
  const Eigen::Index n = rho.size();
  CellFluxTable t{Field(n), Field(n), Field(n), Field(n), Field(n), Field(n)};
  std::unordered_map<double, CriticalPoint> cache;
  for (Eigen::Index j = 0; j < n; ++j) {
    const auto jj = static_cast<std::size_t>(j);
    auto flux = [&](double r) { return r * speed(jj, r); };
    CriticalPoint cp{};
    if (auto key = shared_key(jj)) {
      auto it = cache.find(*key);
      if (it == cache.end())
        it = cache.emplace(*key, critical_density(flux, rho_max, sampling.n_rho_samples)).first;
      cp = it->second;
    } else {
      cp = critical_density(flux, rho_max, sampling.n_rho_samples);
    }
    const double r = rho(j);
    t.speed(j) = speed(jj, r);
    t.flux(j) = r * t.speed(j);
    t.sigma(j) = cp.sigma;
    t.flux_max(j) = cp.flux_max;
    t.sending(j) = sending(r, t.flux(j), cp);
    t.receiving(j) = receiving(r, t.flux(j), cp);
  }
  return t;
}

}  // namespace trajflow
