#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <string>

#include "trajflow/grid.hpp"

namespace trajflow {

/// Polynomial emission law with two acceleration regimes and a floor.
/// Coefficients multiply [1, v, v^2, a, a^2, v a] with v in m/s, a in m/s^2.
template <typename Scalar = double>
struct EmissionCoefficients {
  Scalar regime_threshold = Scalar(-0.5);  // m/s^2
  std::array<Scalar, 6> high{};            // a >= threshold
  std::array<Scalar, 6> low{};             // a < threshold
  Scalar e0_floor = Scalar(0);             // g/s

  /// NOx, petrol passenger car.
  static EmissionCoefficients petrol_car_nox() {
    EmissionCoefficients c;
    c.high = {Scalar(6.19e-4), Scalar(8e-5), Scalar(-4.03e-6), Scalar(-4.13e-4), Scalar(3.80e-4),
              Scalar(1.77e-4)};
    c.low = {Scalar(2.17e-4), Scalar(0), Scalar(0), Scalar(0), Scalar(0), Scalar(0)};
    return c;
  }
};

/// 4x4 matrix of the exponential law E = exp([1 v v^2 v^3] P [1 a a^2 a^3]^T).
template <typename Scalar = double>
struct ExpMatrix {
  Eigen::Matrix<Scalar, 4, 4> p;

  static ExpMatrix nox_default() {
    ExpMatrix m;
    m.p << Scalar(-1488.31), Scalar(83.4524), Scalar(9.5433), Scalar(-3.3549),  //
        Scalar(15.2306), Scalar(16.6647), Scalar(10.1565), Scalar(-3.7076),     //
        Scalar(-0.1830), Scalar(-0.4591), Scalar(-0.6836), Scalar(0.0737),      //
        Scalar(0.0020), Scalar(0.0038), Scalar(0.0091), Scalar(-0.0016);
    m.p *= Scalar(0.01);
    return m;
  }
};

template <typename Scalar>
Scalar emission_max_micro(Scalar v, Scalar a, const EmissionCoefficients<Scalar>& c) {
  if (!(v >= 0)) throw DomainError("emission_max_micro: negative speed");
  const auto& f = a >= c.regime_threshold ? c.high : c.low;
  const Scalar e = f[0] + f[1] * v + f[2] * v * v + f[3] * a + f[4] * a * a + f[5] * v * a;
  return std::max(c.e0_floor, e);
}

/// Largest exponent before the exponential law saturates.
inline constexpr double kMaxEmissionExponent = 700.0;

/// Exponent of the exponential law.
template <typename Scalar>
Scalar emission_exp_exponent(Scalar v, Scalar a, const ExpMatrix<Scalar>& m) {
  if (!(v >= 0)) throw DomainError("emission_exp_micro: negative speed");
  Eigen::Matrix<Scalar, 4, 1> vv;
  Eigen::Matrix<Scalar, 4, 1> aa;
  vv << Scalar(1), v, v * v, v * v * v;
  aa << Scalar(1), a, a * a, a * a * a;
  return vv.dot(m.p * aa);
}

/// Exponential law. Exponents beyond +-700 are clamped there; `saturated`
/// (if given) reports whether that happened.
template <typename Scalar>
Scalar emission_exp_micro(Scalar v, Scalar a, const ExpMatrix<Scalar>& m, bool* saturated = nullptr) {
  Scalar x = emission_exp_exponent(v, a, m);
  const bool sat = std::abs(x) > Scalar(kMaxEmissionExponent);
  if (sat) x = std::clamp(x, Scalar(-kMaxEmissionExponent), Scalar(kMaxEmissionExponent));
  if (saturated != nullptr) *saturated = sat;
  return std::exp(x);
}

/// Rate of the rho * dx vehicles in one cell.
template <typename Scalar>
Scalar emission_max_macro(Scalar rho, Scalar v, Scalar a, Scalar dx, const EmissionCoefficients<Scalar>& c) {
  return rho * dx * emission_max_micro(v, a, c);
}

template <typename Scalar>
Scalar emission_exp_macro(Scalar rho, Scalar v, Scalar a, Scalar dx, const ExpMatrix<Scalar>& m,
                          bool* saturated = nullptr) {
  return rho * dx * emission_exp_micro(v, a, m, saturated);
}

template <typename Derived>
typename Derived::Scalar total_emission(const Eigen::ArrayBase<Derived>& field) {
  return field.sum();
}

enum class EmissionFormula { Max, Exp };

/// Everything needed to turn solver fields into per-cell emission rates.
struct EmissionModel {
  EmissionFormula formula = EmissionFormula::Max;
  EmissionCoefficients<double> coefficients = EmissionCoefficients<double>::petrol_car_nox();
  ExpMatrix<double> matrix = ExpMatrix<double>::nox_default();
  double accel_clamp = 10.0;  // m/s^2, applied before evaluating either law

  double micro(double v_ms, double a_ms2, bool* saturated = nullptr) const;
};

struct EmissionFieldResult {
  Field rate;                   // g/s per cell
  std::size_t clamped = 0;      // cells whose acceleration hit the clamp
  std::size_t saturated = 0;    // cells where the exponential law saturated
};

/// Per-cell rates from density (veh/km), speed (km/h) and acceleration (km/h^2).
EmissionFieldResult emission_field(const Field& rho, const Field& speed_kmh, const Field& accel_kmh2,
                                   double dx, const EmissionModel& model);

/// Reads a coefficient table. Lines (comma separated, '#' comments):
///   threshold,<m/s^2>
///   high,f1,f2,f3,f4,f5,f6
///   low,f1,f2,f3,f4,f5,f6
///   e0,<g/s>
/// Missing lines keep the petrol-car values.
EmissionCoefficients<double> load_emission_coefficients(const std::string& path);

}  // namespace trajflow
