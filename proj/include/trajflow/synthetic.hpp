#pragma once

#include <cstddef>
#include <cstdint>

#include "trajflow/grid.hpp"
#include "trajflow/trajectory.hpp"

namespace trajflow {

/// Which acceleration the oscillating platoon reports.
enum class PlatoonAcceleration {
  SpeedDerivative,  // dv/dt, consistent with the speed law
  Verbatim,         // c V (T / (k pi)) cos(k pi t / T), kept for comparison
};

/// N vehicles starting 50 m apart, each oscillating with its own frequency:
///   x_i(t) = c V (t - T/(k_i pi) cos(k_i pi t / T) + T/(k_i pi)) + x0_i
///   v_i(t) = c V (sin(k_i pi t / T) + 1)
/// with k_i = 20 + 5 (i-1)/(N-1) and x0_i = 1 + 0.05 (i-1) (1-based i).
class SyntheticPlatoon {
public:
  SyntheticPlatoon(std::size_t n, double c, double horizon, double v_max,
                   PlatoonAcceleration accel = PlatoonAcceleration::SpeedDerivative);

  std::size_t size() const { return n_; }
  double horizon() const { return horizon_; }

  double wave_number(std::size_t i) const;  // k_i, 0-based i
  double start(std::size_t i) const;        // x0_i
  double position(std::size_t i, double t) const;
  double speed(std::size_t i, double t) const;
  double acceleration(std::size_t i, double t) const;

  /// Samples every vehicle on [0, horizon] at spacing sample_dt (positions and speeds).
  Fleet sample(double sample_dt, int road_id = 0) const;

private:
  std::size_t n_;
  double c_;
  double horizon_;
  double v_max_;
  PlatoonAcceleration accel_;
};

/// Sampled fleet from SyntheticPlatoon; the sample spacing defaults to one second.
Fleet generate_synthetic(std::size_t n, double c, double horizon, double v_max,
                         double sample_dt = 1.0 / units::kSecondsPerHour);

/// Follow-the-leader parameters. The last vehicle leads at constant speed; the
/// others follow
///   dV_i/dt = accel_gain (V_{i+1} - V_i) + (V_opt(gap_i) - V_i) / relaxation_time
/// with V_opt(s) = leader_speed (tanh(s / preferred_gap - 1) + tanh 1) / tanh 1,
/// so that the uniform flow at preferred_gap and leader_speed is an equilibrium.
struct FtlConfig {
  std::size_t n_vehicles = 50;
  double accel_gain = 360.0;                 // 1/h
  double preferred_gap = 0.025;              // km
  double leader_speed = 50.0;                // km/h
  double relaxation_time = 1.0 / 3600.0;     // h

  void validate() const;
  double optimal_speed(double gap) const;
};

struct FtlState {
  Field positions;  // increasing, leader last
  Field speeds;
};

/// One explicit Euler step. Throws NumericalError if any gap closes.
FtlState step_ftl(const FtlState& state, const FtlConfig& cfg, double dt);

/// Uniform platoon at the equilibrium gap with the tail at x_tail.
FtlState ftl_equilibrium(const FtlConfig& cfg, double x_tail);

/// Integrates from `initial` for n_steps and records every vehicle each
/// `record_every` steps as a trajectory with speeds.
Fleet simulate_ftl(const FtlState& initial, const FtlConfig& cfg, double dt, std::size_t n_steps,
                   std::size_t record_every = 1, int road_id = 0);

/// Equilibrium platoon with a seeded random slowdown on a few vehicles; used to
/// trigger stop-and-go waves.
FtlState ftl_perturbed_platoon(const FtlConfig& cfg, double x_tail, std::uint64_t seed,
                               double slowdown_fraction = 0.5);

}  // namespace trajflow
