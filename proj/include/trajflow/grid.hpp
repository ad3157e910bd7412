#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>

#include "trajflow/errors.hpp"

namespace trajflow {

template <typename Scalar>
using FieldT = Eigen::Array<Scalar, Eigen::Dynamic, 1>;

/// Per-cell scalar field on a 1D road grid.
using Field = FieldT<double>;

// Internal units are km, h, veh/km, veh/h. Emission laws take SI.
namespace units {
inline constexpr double kKmhPerMs = 3.6;
inline constexpr double kKmh2PerMs2 = 3600.0 * 3600.0 / 1000.0;  // 12960
inline constexpr double kSecondsPerHour = 3600.0;

inline double kmh_to_ms(double v) { return v / kKmhPerMs; }
inline double kmh2_to_ms2(double a) { return a / kKmh2PerMs2; }
inline double ms2_to_kmh2(double a) { return a * kKmh2PerMs2; }
}  // namespace units

/// Uniform partition of [a, b] into n_cells finite volumes.
class SpatialGrid {
public:
  SpatialGrid(double a, double b, std::size_t n_cells) : a_(a), b_(b), n_(n_cells) {
    if (!(b > a)) throw ConfigError("SpatialGrid: b must exceed a");
    if (n_cells == 0) throw ConfigError("SpatialGrid: n_cells must be positive");
  }

  /// Grid with spacing dx over [a, b]; (b - a)/dx must be an integer up to rounding.
  static SpatialGrid with_spacing(double a, double b, double dx) {
    if (!(dx > 0.0)) throw ConfigError("SpatialGrid: dx must be positive");
    const double cells = (b - a) / dx;
    const double rounded = std::round(cells);
    if (rounded < 1.0 || std::abs(cells - rounded) > 1e-9 * std::max(1.0, cells))
      throw ConfigError("SpatialGrid: (b - a) is not a multiple of dx");
    return {a, b, static_cast<std::size_t>(rounded)};
  }

  double a() const { return a_; }
  double b() const { return b_; }
  std::size_t size() const { return n_; }
  double dx() const { return (b_ - a_) / static_cast<double>(n_); }
  double center(std::size_t j) const { return a_ + (static_cast<double>(j) + 0.5) * dx(); }

  Field centers() const {
    Field x(static_cast<Eigen::Index>(n_));
    for (std::size_t j = 0; j < n_; ++j) x(static_cast<Eigen::Index>(j)) = center(j);
    return x;
  }

private:
  double a_;
  double b_;
  std::size_t n_;
};

struct TimeGrid {
  double horizon;  // h
  double dt;       // h
  std::size_t n_steps;

  static TimeGrid covering(double horizon, double dt) {
    if (!(dt > 0.0)) throw ConfigError("TimeGrid: dt must be positive");
    if (!(horizon >= 0.0)) throw ConfigError("TimeGrid: horizon must be non-negative");
    auto n = static_cast<std::size_t>(std::ceil(horizon / dt - 1e-9));
    return {horizon, dt, n};
  }
};

struct MacroState1 {
  Field rho;
};

struct MacroState2 {
  Field rho;
  Field w;
};

}  // namespace trajflow
