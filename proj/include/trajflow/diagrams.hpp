#pragma once

#include <algorithm>
#include <cmath>
#include <string>

#include "trajflow/errors.hpp"

namespace trajflow {

namespace detail {

// Values within a 1e-12 band outside [lo, hi] are floating-point drift and get clamped.
template <typename Scalar>
Scalar clamp_to_range(Scalar value, Scalar lo, Scalar hi, const char* what) {
  const Scalar band = Scalar(1e-12) * std::max({Scalar(1), std::abs(lo), std::abs(hi)});
  if (!(value >= lo - band && value <= hi + band))
    throw DomainError(std::string(what) + " = " + std::to_string(static_cast<double>(value)) +
                      " outside [" + std::to_string(static_cast<double>(lo)) + ", " +
                      std::to_string(static_cast<double>(hi)) + "]");
  return std::clamp(value, lo, hi);
}

}  // namespace detail

template <typename Scalar = double>
struct GreenshieldsDiagram {
  Scalar rho_max;
  Scalar u_max;

  GreenshieldsDiagram(Scalar rho_max_, Scalar u_max_) : rho_max(rho_max_), u_max(u_max_) {
    if (!(rho_max > 0) || !(u_max > 0))
      throw ConfigError("GreenshieldsDiagram: rho_max and u_max must be positive");
  }
};

/// u(rho) = u_max (rho_max - rho) / rho_max
template <typename Scalar>
Scalar greenshields_speed(Scalar rho, const GreenshieldsDiagram<Scalar>& d) {
  rho = detail::clamp_to_range(rho, Scalar(0), d.rho_max, "rho");
  return d.u_max * (d.rho_max - rho) / d.rho_max;
}

template <typename Scalar>
Scalar greenshields_speed_drho(const GreenshieldsDiagram<Scalar>& d) {
  return -d.u_max / d.rho_max;
}

/// Collapsed generalized ARZ fundamental diagram.
///
/// Free flow (rho <= rho_f) follows g(rho) for every w; the congested branch
/// interpolates between f (at w_l) and g (at w_r) linearly in w.
template <typename Scalar = double>
struct CgarzDiagram {
  Scalar rho_max;
  Scalar rho_f;
  Scalar v_max;
  Scalar w_l;
  Scalar w_r;

  CgarzDiagram(Scalar rho_max_, Scalar rho_f_, Scalar v_max_, Scalar w_l_, Scalar w_r_)
      : rho_max(rho_max_), rho_f(rho_f_), v_max(v_max_), w_l(w_l_), w_r(w_r_) {
    if (!(rho_f > 0 && rho_f < rho_max)) throw ConfigError("CgarzDiagram: need 0 < rho_f < rho_max");
    if (!(v_max > 0)) throw ConfigError("CgarzDiagram: v_max must be positive");
    if (!(w_l < w_r)) throw ConfigError("CgarzDiagram: need w_l < w_r");
  }

  /// w_l = g(rho_f), w_r = g(rho_max / 2).
  static CgarzDiagram with_default_bounds(Scalar rho_max, Scalar rho_f, Scalar v_max) {
    const Scalar k = v_max / rho_max;
    return {rho_max, rho_f, v_max, k * rho_f * (rho_max - rho_f),
            k * (rho_max / 2) * (rho_max - rho_max / 2)};
  }

  Scalar w_mid() const { return (w_l + w_r) / 2; }
};

template <typename Scalar>
Scalar cgarz_f(Scalar rho, const CgarzDiagram<Scalar>& d) {
  return d.v_max / d.rho_max * d.rho_f * (d.rho_max - rho);
}

template <typename Scalar>
Scalar cgarz_g(Scalar rho, const CgarzDiagram<Scalar>& d) {
  return d.v_max / d.rho_max * rho * (d.rho_max - rho);
}

template <typename Scalar>
Scalar cgarz_theta(Scalar w, const CgarzDiagram<Scalar>& d) {
  return (w - d.w_l) / (d.w_r - d.w_l);
}

template <typename Scalar>
Scalar cgarz_flux(Scalar rho, Scalar w, const CgarzDiagram<Scalar>& d) {
  rho = detail::clamp_to_range(rho, Scalar(0), d.rho_max, "rho");
  w = detail::clamp_to_range(w, d.w_l, d.w_r, "w");
  if (rho <= d.rho_f) return cgarz_g(rho, d);
  const Scalar theta = cgarz_theta(w, d);
  return (1 - theta) * cgarz_f(rho, d) + theta * cgarz_g(rho, d);
}

/// v(rho, w) = Q(rho, w) / rho, with the free-flow limit v_max at rho = 0.
template <typename Scalar>
Scalar cgarz_speed(Scalar rho, Scalar w, const CgarzDiagram<Scalar>& d) {
  rho = detail::clamp_to_range(rho, Scalar(0), d.rho_max, "rho");
  w = detail::clamp_to_range(w, d.w_l, d.w_r, "w");
  const Scalar k = d.v_max / d.rho_max;
  if (rho <= d.rho_f) return k * (d.rho_max - rho);
  const Scalar theta = cgarz_theta(w, d);
  return (1 - theta) * k * d.rho_f * (d.rho_max - rho) / rho + theta * k * (d.rho_max - rho);
}

template <typename Scalar>
Scalar cgarz_speed_drho(Scalar rho, Scalar w, const CgarzDiagram<Scalar>& d) {
  rho = detail::clamp_to_range(rho, Scalar(0), d.rho_max, "rho");
  w = detail::clamp_to_range(w, d.w_l, d.w_r, "w");
  const Scalar k = d.v_max / d.rho_max;
  if (rho <= d.rho_f) return -k;
  const Scalar theta = cgarz_theta(w, d);
  return -(1 - theta) * k * d.rho_f * d.rho_max / (rho * rho) - theta * k;
}

/// sup over (rho, w) of |rho * dv/drho|. The congested term is convex in rho, so
/// the supremum sits at rho_f (w = w_l) or rho_max (w = w_r); both equal v_max.
template <typename Scalar>
Scalar cgarz_slope_bound(const CgarzDiagram<Scalar>& d) {
  return d.v_max;
}

/// Finds w in [w_l, w_r] with v(rho, w) = v_target by bisection; clamps to the
/// nearest endpoint when the target is unreachable. Where v does not depend on w
/// (free flow, or rho = rho_max) the midpoint (w_l + w_r) / 2 is returned.
template <typename Scalar>
Scalar invert_speed_in_w(Scalar rho, Scalar v_target, const CgarzDiagram<Scalar>& d,
                         Scalar speed_tol = Scalar(1e-9)) {
  rho = detail::clamp_to_range(rho, Scalar(0), d.rho_max, "rho");
  if (rho <= d.rho_f || rho >= d.rho_max) return d.w_mid();
  Scalar lo = d.w_l;
  Scalar hi = d.w_r;
  if (cgarz_speed(rho, lo, d) >= v_target) return lo;
  if (cgarz_speed(rho, hi, d) <= v_target) return hi;
  for (int it = 0; it < 200; ++it) {
    const Scalar mid = (lo + hi) / 2;
    const Scalar v = cgarz_speed(rho, mid, d);
    if (std::abs(v - v_target) <= speed_tol) return mid;
    (v < v_target ? lo : hi) = mid;
  }
  return (lo + hi) / 2;
}

/// Trapezoidal cutoff: 1 on |xi| <= ell, linear ramp to 0 at |xi| = big_l.
template <typename Scalar = double>
struct CutoffShape {
  Scalar ell;
  Scalar big_l;

  CutoffShape(Scalar ell_, Scalar big_l_) : ell(ell_), big_l(big_l_) {
    if (!(ell > 0 && ell < big_l)) throw ConfigError("CutoffShape: need 0 < ell < L");
  }
};

template <typename Scalar>
Scalar cutoff(Scalar xi, const CutoffShape<Scalar>& s) {
  const Scalar a = std::abs(xi);
  if (a <= s.ell) return Scalar(1);
  if (a >= s.big_l) return Scalar(0);
  return (a - s.big_l) / (s.ell - s.big_l);
}

/// d chi / d xi; zero on the plateau and outside the support.
template <typename Scalar>
Scalar cutoff_derivative(Scalar xi, const CutoffShape<Scalar>& s) {
  const Scalar a = std::abs(xi);
  if (a <= s.ell || a >= s.big_l) return Scalar(0);
  const Scalar slope = Scalar(1) / (s.big_l - s.ell);
  return xi < 0 ? slope : -slope;
}

}  // namespace trajflow
