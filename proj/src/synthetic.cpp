#include "trajflow/synthetic.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <string>

#include "trajflow/errors.hpp"

namespace trajflow {

SyntheticPlatoon::SyntheticPlatoon(std::size_t n, double c, double horizon, double v_max,
                                   PlatoonAcceleration accel)
    : n_(n), c_(c), horizon_(horizon), v_max_(v_max), accel_(accel) {
  if (n < 2) throw ConfigError("synthetic platoon: need at least two vehicles");
  if (!(horizon > 0.0) || !(v_max > 0.0) || !(c > 0.0))
    throw ConfigError("synthetic platoon: c, T and v_max must be positive");
}

double SyntheticPlatoon::wave_number(std::size_t i) const {
  return 20.0 + 5.0 * static_cast<double>(i) / static_cast<double>(n_ - 1);
}

double SyntheticPlatoon::start(std::size_t i) const { return 1.0 + 0.05 * static_cast<double>(i); }

double SyntheticPlatoon::position(std::size_t i, double t) const {
  const double omega = wave_number(i) * std::numbers::pi / horizon_;
  return c_ * v_max_ * (t - std::cos(omega * t) / omega + 1.0 / omega) + start(i);
}

double SyntheticPlatoon::speed(std::size_t i, double t) const {
  const double omega = wave_number(i) * std::numbers::pi / horizon_;
  return c_ * v_max_ * (std::sin(omega * t) + 1.0);
}

double SyntheticPlatoon::acceleration(std::size_t i, double t) const {
  const double omega = wave_number(i) * std::numbers::pi / horizon_;
  if (accel_ == PlatoonAcceleration::Verbatim) return c_ * v_max_ / omega * std::cos(omega * t);
  return c_ * v_max_ * omega * std::cos(omega * t);
}

Fleet SyntheticPlatoon::sample(double sample_dt, int road_id) const {
  if (!(sample_dt > 0.0)) throw ConfigError("synthetic platoon: sample_dt must be positive");
  const auto n_samples = static_cast<std::size_t>(std::ceil(horizon_ / sample_dt - 1e-9)) + 1;
  Fleet fleet;
  fleet.reserve(n_);
  for (std::size_t i = 0; i < n_; ++i) {
    std::vector<TrajectorySample> s;
    s.reserve(n_samples);
    for (std::size_t k = 0; k < n_samples; ++k) {
      const double t = std::min(horizon_, static_cast<double>(k) * sample_dt);
      if (!s.empty() && t <= s.back().t) break;
      s.push_back({t, position(i, t), speed(i, t)});
    }
    fleet.emplace_back("synthetic-" + std::to_string(i + 1), std::move(s), road_id);
  }
  return fleet;
}

Fleet generate_synthetic(std::size_t n, double c, double horizon, double v_max, double sample_dt) {
  return SyntheticPlatoon(n, c, horizon, v_max).sample(sample_dt);
}

void FtlConfig::validate() const {
  if (n_vehicles < 2) throw ConfigError("ftl: n_vehicles must be at least 2");
  if (!(accel_gain > 0.0) || !(preferred_gap > 0.0) || !(leader_speed > 0.0) ||
      !(relaxation_time > 0.0))
    throw ConfigError("ftl: accel_gain, preferred_gap, leader_speed, relaxation_time must be positive");
}

double FtlConfig::optimal_speed(double gap) const {
  const double t1 = std::tanh(1.0);
  return leader_speed * (std::tanh(gap / preferred_gap - 1.0) + t1) / t1;
}

FtlState step_ftl(const FtlState& state, const FtlConfig& cfg, double dt) {
  const Eigen::Index n = state.positions.size();
  FtlState next{state.positions + dt * state.speeds, state.speeds};
  for (Eigen::Index i = 0; i + 1 < n; ++i) {
    const double gap = state.positions(i + 1) - state.positions(i);
    const double accel = cfg.accel_gain * (state.speeds(i + 1) - state.speeds(i)) +
                         (cfg.optimal_speed(gap) - state.speeds(i)) / cfg.relaxation_time;
    next.speeds(i) = std::max(0.0, state.speeds(i) + dt * accel);
  }
  for (Eigen::Index i = 0; i + 1 < n; ++i)
    if (!(next.positions(i + 1) - next.positions(i) > 0.0))
      throw NumericalError("ftl: collision between vehicles " + std::to_string(i) + " and " +
                           std::to_string(i + 1));
  return next;
}

FtlState ftl_equilibrium(const FtlConfig& cfg, double x_tail) {
  cfg.validate();
  const auto n = static_cast<Eigen::Index>(cfg.n_vehicles);
  FtlState s{Field(n), Field::Constant(n, cfg.leader_speed)};
  for (Eigen::Index i = 0; i < n; ++i) s.positions(i) = x_tail + static_cast<double>(i) * cfg.preferred_gap;
  return s;
}

FtlState ftl_perturbed_platoon(const FtlConfig& cfg, double x_tail, std::uint64_t seed,
                               double slowdown_fraction) {
  FtlState s = ftl_equilibrium(cfg, x_tail);
  std::mt19937_64 rng(seed);
  const auto n = static_cast<Eigen::Index>(cfg.n_vehicles);
  // Slow down a few vehicles in the front half so the wave has room to travel upstream.
  std::uniform_int_distribution<Eigen::Index> pick(n / 2, n - 2);
  for (int k = 0; k < 3; ++k) s.speeds(pick(rng)) *= (1.0 - slowdown_fraction);
  return s;
}

Fleet simulate_ftl(const FtlState& initial, const FtlConfig& cfg, double dt, std::size_t n_steps,
                   std::size_t record_every, int road_id) {
  cfg.validate();
  if (!(dt > 0.0) || dt > cfg.relaxation_time / 4.0 * (1.0 + 1e-12))
    throw NumericalError("ftl: dt must be positive and at most relaxation_time / 4");
  if (record_every == 0) throw ConfigError("ftl: record_every must be positive");
  const auto n = static_cast<std::size_t>(initial.positions.size());
  std::vector<std::vector<TrajectorySample>> samples(n);
  FtlState s = initial;
  auto record = [&](double t) {
    for (std::size_t i = 0; i < n; ++i)
      samples[i].push_back({t, s.positions(static_cast<Eigen::Index>(i)),
                            s.speeds(static_cast<Eigen::Index>(i))});
  };
  record(0.0);
  for (std::size_t k = 1; k <= n_steps; ++k) {
    s = step_ftl(s, cfg, dt);
    if (k % record_every == 0 || k == n_steps) record(static_cast<double>(k) * dt);
  }
  Fleet fleet;
  for (std::size_t i = 0; i < n; ++i)
    fleet.emplace_back("ftl-" + std::to_string(i + 1), std::move(samples[i]), road_id);
  return fleet;
}

}  // namespace trajflow
