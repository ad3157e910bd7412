#include "trajflow/network.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <set>

namespace trajflow {

DivergeFlows diverge_fluxes(double s_in, double r_main, double r_side, double alpha) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw ConfigError("diverge: alpha must lie in [0, 1]");
  if (s_in < 0.0 || r_main < 0.0 || r_side < 0.0) throw DomainError("diverge: negative demand or supply");
  const double d_main = alpha * s_in;
  const double d_side = (1.0 - alpha) * s_in;
  double scale = 1.0;
  if (d_main > 0.0) scale = std::min(scale, r_main / d_main);
  if (d_side > 0.0) scale = std::min(scale, r_side / d_side);
  return {scale * d_main, scale * d_side};
}

MergeFlows merge_fluxes(double s_main, double s_side, double r_out, double beta) {
  if (!(beta >= 0.0 && beta <= 1.0)) throw ConfigError("merge: beta must lie in [0, 1]");
  if (s_main < 0.0 || s_side < 0.0 || r_out < 0.0) throw DomainError("merge: negative demand or supply");
  if (s_main + s_side <= r_out) return {s_main, s_side};
  std::array<double, 3> c{s_main, r_out - s_side, beta * r_out};
  std::sort(c.begin(), c.end());
  const double q_main = std::clamp(c[1], 0.0, s_main);
  const double q_side = std::clamp(r_out - q_main, 0.0, s_side);
  return {q_main, q_side};
}

std::optional<SensorSeries::Record> sensor_at(const SensorSeries& series, double t) {
  const auto minute = static_cast<long long>(std::floor(60.0 * t + 1e-9));
  const long long k = minute - series.first_minute;
  if (k < 0 || k >= static_cast<long long>(series.records.size())) return std::nullopt;
  return series.records[static_cast<std::size_t>(k)];
}

double sensor_inflow(const SensorSeries::Record& rec, double r0) {
  return numerical_flux(std::max(0.0, rec.flux), r0);
}

SensorSeries synthetic_sensor_series(int road_id, std::size_t n_minutes, double mean_flux,
                                     double speed, std::uint64_t seed, double amplitude) {
  if (mean_flux < 0.0 || speed < 0.0) throw ConfigError("synthetic sensors: flux and speed must be >= 0");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, 0.05 * mean_flux);
  SensorSeries s{road_id, 0, {}};
  s.records.reserve(n_minutes);
  for (std::size_t k = 0; k < n_minutes; ++k) {
    const double phase = 2.0 * std::numbers::pi * static_cast<double>(k) / 60.0;
    const double q = mean_flux * (1.0 + amplitude * std::sin(phase)) + noise(rng);
    s.records.push_back({std::max(0.0, q), speed});
  }
  return s;
}

double NetworkStepReport::balance_error() const {
  const double scale = std::max({1.0, mass_before, mass_after});
  return std::abs(mass_after - mass_before - (inflow - outflow) * dt) / scale;
}

Network::Network(NetworkParameters params, const std::vector<std::pair<int, double>>& roads,
                 std::vector<DivergeJunction> diverges, std::vector<MergeJunction> merges,
                 const std::map<int, Outlet>& road_outlets)
    : params_(std::move(params)), diverges_(std::move(diverges)), merges_(std::move(merges)) {
  for (const auto& [id, length] : roads) {
    if (index_.count(id)) throw ConfigError("network: duplicate road id " + std::to_string(id));
    GsomConfig cfg{params_.diagram, params_.shape, params_.mode, params_.sampling};
    auto grid = SpatialGrid::with_spacing(0.0, length, params_.dx);
    const auto n = static_cast<Eigen::Index>(grid.size());
    MacroState2 st{Field::Zero(n), Field::Constant(n, params_.diagram.w_mid())};
    index_[id] = roads_.size();
    roads_.push_back(Road{id, length, GsomSolver(grid, cfg), st, {}, std::nullopt});
  }

  std::set<int> fed;  // roads whose left end is driven by a junction
  std::set<std::pair<std::size_t, Slot>> slots;
  std::set<int> drained;  // roads whose right end feeds a junction
  auto claim_outlet = [&](const Outlet& o, const std::string& who) {
    if (o.kind == Outlet::Kind::Road) {
      if (!index_.count(o.id)) throw ConfigError(who + ": unknown road " + std::to_string(o.id));
      if (!fed.insert(o.id).second)
        throw ConfigError(who + ": road " + std::to_string(o.id) + " already has an upstream junction");
    } else {
      if (o.id < 0 || static_cast<std::size_t>(o.id) >= merges_.size())
        throw ConfigError(who + ": unknown merge " + std::to_string(o.id));
      if (!slots.insert({static_cast<std::size_t>(o.id), o.slot}).second)
        throw ConfigError(who + ": merge slot already taken");
    }
  };

  for (const auto& d : diverges_) {
    if (!index_.count(d.in_road)) throw ConfigError(d.name + ": unknown input road");
    if (!(d.alpha >= 0.0 && d.alpha <= 1.0)) throw ConfigError(d.name + ": alpha must lie in [0, 1]");
    if (!drained.insert(d.in_road).second) throw ConfigError(d.name + ": input road already drained");
    claim_outlet(d.out_main, d.name);
    claim_outlet(d.out_side, d.name);
  }
  for (const auto& [id, o] : road_outlets) {
    if (!index_.count(id)) throw ConfigError("network: outlet for unknown road " + std::to_string(id));
    if (o.kind != Outlet::Kind::Merge) throw ConfigError("network: a road can only end in a merge slot");
    if (!drained.insert(id).second) throw ConfigError("network: road " + std::to_string(id) + " drained twice");
    claim_outlet(o, "road " + std::to_string(id));
    roads_[index_[id]].outlet = o;
  }
  for (const auto& m : merges_) {
    if (!index_.count(m.out_road)) throw ConfigError(m.name + ": unknown output road");
    if (!(m.beta >= 0.0 && m.beta <= 1.0)) throw ConfigError(m.name + ": beta must lie in [0, 1]");
    if (!fed.insert(m.out_road).second) throw ConfigError(m.name + ": output road already fed");
  }
  for (const auto& r : roads_) {
    if (!fed.count(r.id)) entries_.push_back(r.id);
    if (!drained.count(r.id)) exits_.push_back(r.id);
  }
}

Road& Network::road(int id) {
  auto it = index_.find(id);
  if (it == index_.end()) throw ConfigError("network: unknown road " + std::to_string(id));
  return roads_[it->second];
}

const Road& Network::road(int id) const {
  auto it = index_.find(id);
  if (it == index_.end()) throw ConfigError("network: unknown road " + std::to_string(id));
  return roads_[it->second];
}

void Network::set_sensor(SensorSeries series) {
  if (std::find(entries_.begin(), entries_.end(), series.road_id) == entries_.end())
    throw ConfigError("network: sensor on road " + std::to_string(series.road_id) +
                      ", which is not a network entry");
  for (const auto& r : series.records)
    if (r.flux < 0.0 || r.speed < 0.0) throw ConfigError("network: negative sensor record");
  sensors_[series.road_id] = std::move(series);
}

void Network::set_fleet(int road_id, Fleet fleet) { road(road_id).fleet = std::move(fleet); }

void Network::reset_empty() {
  for (auto& r : roads_) {
    r.state.rho.setZero();
    r.state.w.setConstant(params_.diagram.w_mid());
  }
}

double Network::total_mass() const {
  double m = 0.0;
  for (const auto& r : roads_) m += r.state.rho.sum() * r.solver.grid().dx();
  return m;
}

double Network::max_dt() const {
  double dt = std::numeric_limits<double>::infinity();
  for (const auto& r : roads_) dt = std::min(dt, r.solver.max_dt(r.fleet));
  return dt;
}

NetworkStepReport Network::step(double t, double dt) {
  const std::size_t nr = roads_.size();
  NetworkStepReport rep;
  rep.t = t;
  rep.dt = dt;
  rep.mass_before = total_mass();

  std::vector<FleetSnapshot> snaps(nr);
  std::vector<CellFluxTable> tables(nr);
  for (std::size_t i = 0; i < nr; ++i) {
    snaps[i] = snapshot(roads_[i].fleet, t);
    tables[i] = roads_[i].solver.tabulate(roads_[i].state, snaps[i]);
  }
  auto last = [&](std::size_t i) { return tables[i].sending.size() - 1; };
  auto s_last = [&](std::size_t i) { return tables[i].sending(last(i)); };
  auto r_first = [&](std::size_t i) { return tables[i].receiving(0); };
  auto w_last = [&](std::size_t i) { return roads_[i].state.w(roads_[i].state.w.size() - 1); };

  std::vector<double> left(nr, 0.0);
  std::vector<double> right(nr, 0.0);
  std::vector<double> w_in(nr);
  for (std::size_t i = 0; i < nr; ++i) w_in[i] = roads_[i].state.w(0);

  // Demands arriving at each merge slot.
  const std::size_t nm = merges_.size();
  std::vector<std::array<double, 2>> slot_demand(nm, {0.0, 0.0});
  auto slot_index = [](Slot s) { return s == Slot::Main ? 0 : 1; };
  for (const auto& d : diverges_) {
    const double s = s_last(index_.at(d.in_road));
    if (d.out_main.kind == Outlet::Kind::Merge)
      slot_demand[static_cast<std::size_t>(d.out_main.id)][slot_index(d.out_main.slot)] = d.alpha * s;
    if (d.out_side.kind == Outlet::Kind::Merge)
      slot_demand[static_cast<std::size_t>(d.out_side.id)][slot_index(d.out_side.slot)] = (1.0 - d.alpha) * s;
  }
  for (std::size_t i = 0; i < nr; ++i)
    if (const auto& o = roads_[i].outlet; o && o->kind == Outlet::Kind::Merge)
      slot_demand[static_cast<std::size_t>(o->id)][slot_index(o->slot)] = s_last(i);

  std::vector<MergeFlows> alloc(nm);
  for (std::size_t m = 0; m < nm; ++m) {
    const double r_out = r_first(index_.at(merges_[m].out_road));
    alloc[m] = merge_fluxes(slot_demand[m][0], slot_demand[m][1], r_out, merges_[m].beta);
  }
  auto alloc_of = [&](const Outlet& o) {
    const auto& a = alloc[static_cast<std::size_t>(o.id)];
    return o.slot == Slot::Main ? a.main : a.side;
  };

  // Flow and w actually delivered into each merge.
  std::vector<double> merge_in(nm, 0.0);
  std::vector<double> merge_w(nm, 0.0);
  auto deliver = [&](const Outlet& o, double q, double w) {
    if (o.kind == Outlet::Kind::Road) {
      const std::size_t k = index_.at(o.id);
      left[k] = q;
      w_in[k] = w;
    } else {
      merge_in[static_cast<std::size_t>(o.id)] += q;
      merge_w[static_cast<std::size_t>(o.id)] += q * w;
    }
  };
  auto capacity = [&](const Outlet& o) {
    return o.kind == Outlet::Kind::Road ? r_first(index_.at(o.id)) : alloc_of(o);
  };

  for (const auto& d : diverges_) {
    const std::size_t i = index_.at(d.in_road);
    const DivergeFlows f = diverge_fluxes(s_last(i), capacity(d.out_main), capacity(d.out_side), d.alpha);
    rep.diverge_flows.push_back(f);
    right[i] = f.main + f.side;
    deliver(d.out_main, f.main, w_last(i));
    deliver(d.out_side, f.side, w_last(i));
  }
  for (std::size_t i = 0; i < nr; ++i)
    if (const auto& o = roads_[i].outlet; o && o->kind == Outlet::Kind::Merge) {
      const double q = alloc_of(*o);
      right[i] = q;
      deliver(*o, q, w_last(i));
    }

  for (std::size_t m = 0; m < nm; ++m) {
    const std::size_t k = index_.at(merges_[m].out_road);
    left[k] = merge_in[m];
    if (merge_in[m] > 0.0) w_in[k] = merge_w[m] / merge_in[m];
    rep.merge_flows.push_back(alloc[m]);
  }

  std::map<int, SensorSeries::Record> applied;
  for (int id : entries_) {
    const std::size_t k = index_.at(id);
    auto it = sensors_.find(id);
    std::optional<SensorSeries::Record> rec;
    if (it != sensors_.end()) rec = sensor_at(it->second, t);
    if (!rec && !warned_[id]) {
      warned_[id] = true;
      if (warn_)
        warn_("road " + std::to_string(id) +
              (it == sensors_.end() ? ": no sensor series" : ": no sensor record at t=" + std::to_string(t) + " h") +
              "; inflow set to zero");
    }
    left[k] = rec ? sensor_inflow(*rec, r_first(k)) : 0.0;
    if (rec) applied[id] = *rec;
    rep.inflow += left[k];
  }
  for (int id : exits_) {
    const std::size_t k = index_.at(id);
    right[k] = right_face_flux(Boundary::neumann(), tables[k]);
    rep.outflow += right[k];
  }

  for (std::size_t i = 0; i < nr; ++i) {
    auto& r = roads_[i];
    r.state = r.solver.advance(r.state, snaps[i], tables[i], left[i], right[i], w_in[i], dt);
  }
  for (const auto& [id, rec] : applied) {
    auto& r = road(id);
    r.state.w(0) = invert_speed_in_w(r.state.rho(0), rec.speed, params_.diagram);
  }

  rep.mass_after = total_mass();
  return rep;
}

Network highway_network(const NetworkParameters& params, const std::map<int, double>& lengths,
                        double alpha_d1, double alpha_d2, double alpha_d3, double beta_m1,
                        double beta_m2, double beta_m3) {
  std::vector<std::pair<int, double>> roads;
  for (int id = 1; id <= 6; ++id) {
    auto it = lengths.find(id);
    if (it == lengths.end()) throw ConfigError("highway network: missing length of road " + std::to_string(id));
    roads.emplace_back(id, it->second);
  }
  // Merge indices: 0 = M1 (into road 2), 1 = M2 (into road 4), 2 = M3 (into road 6).
  std::vector<MergeJunction> merges{{"M1", 2, beta_m1}, {"M2", 4, beta_m2}, {"M3", 6, beta_m3}};
  std::vector<DivergeJunction> diverges{
      {"D1", 1, Outlet::merge(0, Slot::Main), Outlet::merge(2, Slot::Main), alpha_d1},
      {"D2", 3, Outlet::merge(1, Slot::Main), Outlet::merge(2, Slot::Side), alpha_d2},
      {"D3", 5, Outlet::merge(1, Slot::Side), Outlet::merge(0, Slot::Side), alpha_d3},
  };
  return {params, roads, std::move(diverges), std::move(merges)};
}

double warm_start(Network& net, double duration, double dt, double t0) {
  if (!(duration > 0.0)) throw ConfigError("warm start: duration must be positive");
  net.reset_empty();
  const TimeGrid tg = TimeGrid::covering(duration, dt);
  const double h = duration / static_cast<double>(tg.n_steps);
  double t = t0;
  for (std::size_t n = 0; n < tg.n_steps; ++n) {
    net.step(t, h);
    t = t0 + static_cast<double>(n + 1) * h;
  }
  return t;
}

}  // namespace trajflow
