#include <doctest.h>

#include <random>

#include "trajflow/network.hpp"

using namespace trajflow;

namespace {

const std::map<int, double> kShortRoads{{1, 3.0}, {2, 2.0}, {3, 2.5}, {4, 3.0}, {5, 2.0}, {6, 2.5}};

SensorSeries constant_sensor(int road, std::size_t minutes, double q, double v) {
  SensorSeries s{road, 0, {}};
  for (std::size_t k = 0; k < minutes; ++k) s.records.push_back({q, v});
  return s;
}

}  // namespace

TEST_CASE("diverge split") {
  auto f = diverge_fluxes(1000.0, 5000.0, 5000.0, 0.78);
  CHECK(f.main == doctest::Approx(780.0));
  CHECK(f.side == doctest::Approx(220.0));
  f = diverge_fluxes(1000.0, 5000.0, 0.0, 0.78);
  CHECK(f.main == 0.0);
  CHECK(f.side == 0.0);
  f = diverge_fluxes(1000.0, 5000.0, 0.0, 1.0);
  CHECK(f.main == 1000.0);
  CHECK(f.side == 0.0);
  f = diverge_fluxes(1000.0, 390.0, 5000.0, 0.78);
  CHECK(f.main == doctest::Approx(390.0));
  CHECK(f.side == doctest::Approx(110.0));
  CHECK_THROWS_AS(diverge_fluxes(1.0, 1.0, 1.0, 1.5), ConfigError);
}

TEST_CASE("merge rule") {
  auto m = merge_fluxes(300.0, 200.0, 1000.0, 0.2);
  CHECK(m.main == 300.0);
  CHECK(m.side == 200.0);
  m = merge_fluxes(600.0, 600.0, 1000.0, 0.5);
  CHECK(m.main == doctest::Approx(500.0));
  CHECK(m.side == doctest::Approx(500.0));
  m = merge_fluxes(600.0, 100.0, 500.0, 0.2);
  CHECK(m.main == doctest::Approx(400.0));
  CHECK(m.side == doctest::Approx(100.0));
}

TEST_CASE("randomized junction states") {
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> q(0.0, 2500.0);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int k = 0; k < 2000; ++k) {
    const double s = q(rng), r1 = q(rng), r2 = q(rng), alpha = u(rng);
    const auto d = diverge_fluxes(s, r1, r2, alpha);
    CHECK(d.main <= r1 * (1 + 1e-12));
    CHECK(d.side <= r2 * (1 + 1e-12));
    CHECK(d.main + d.side <= s * (1 + 1e-12));
    if (alpha * s <= r1 && (1 - alpha) * s <= r2) CHECK(d.main + d.side == doctest::Approx(s));
    if (d.main > 0.0 && alpha > 0.0 && alpha < 1.0)
      CHECK(d.side / d.main == doctest::Approx((1 - alpha) / alpha).epsilon(1e-12));

    const double sm = q(rng), ss = q(rng), ro = q(rng), beta = u(rng);
    const auto m = merge_fluxes(sm, ss, ro, beta);
    CHECK(m.main + m.side <= ro * (1 + 1e-12));
    CHECK(m.main + m.side <= (sm + ss) * (1 + 1e-12));
    CHECK(m.main <= sm);
    CHECK(m.side <= ss);
    CHECK(m.main + m.side == doctest::Approx(std::min(ro, sm + ss)));
  }
}

TEST_CASE("sensor lookup and inflow") {
  SensorSeries s = constant_sensor(1, 3, 600.0, 80.0);
  s.first_minute = 2;
  CHECK_FALSE(sensor_at(s, 1.0 / 60.0));
  REQUIRE(sensor_at(s, 2.0 / 60.0));
  CHECK(sensor_at(s, 4.99 / 60.0)->flux == 600.0);
  CHECK_FALSE(sensor_at(s, 5.0 / 60.0));
  CHECK(sensor_inflow({0.0, 80.0}, 1000.0) == 0.0);
  CHECK(sensor_inflow({3000.0, 80.0}, 1260.0) == 1260.0);
  CHECK(sensor_inflow({500.0, 80.0}, 1260.0) == 500.0);

  const auto a = synthetic_sensor_series(3, 90, 700.0, 80.0, 5);
  const auto b = synthetic_sensor_series(3, 90, 700.0, 80.0, 5);
  CHECK(a.records.size() == 90);
  for (std::size_t k = 0; k < 90; ++k) CHECK(a.records[k].flux == b.records[k].flux);
}

TEST_CASE("highway topology") {
  const Network net = highway_network({}, kShortRoads);
  CHECK(net.entry_roads() == std::vector<int>{1, 3, 5});
  CHECK(net.exit_roads() == std::vector<int>{2, 4, 6});
  CHECK(net.road(1).state.rho.size() == 30);
  CHECK_THROWS_AS(highway_network({}, {{1, 3.0}}), ConfigError);
  Network copy = highway_network({}, kShortRoads);
  CHECK_THROWS_AS(copy.set_sensor(constant_sensor(2, 5, 100.0, 80.0)), ConfigError);
}

TEST_CASE("network validation") {
  const NetworkParameters p{};
  CHECK_THROWS_AS(Network(p, {{1, 1.0}, {1, 2.0}}, {}, {}), ConfigError);
  CHECK_THROWS_AS(Network(p, {{1, 1.0}, {2, 1.0}}, {{"D", 1, Outlet::road(2), Outlet::road(2), 0.5}}, {}),
                  ConfigError);
  CHECK_THROWS_AS(Network(p, {{1, 1.0}}, {{"D", 1, Outlet::road(7), Outlet::road(1), 0.5}}, {}), ConfigError);
  CHECK_THROWS_AS(Network(p, {{1, 1.0}, {2, 1.0}, {3, 1.0}},
                          {{"D", 1, Outlet::road(2), Outlet::road(3), 1.5}}, {}),
                  ConfigError);
}

TEST_CASE("empty network stays empty") {
  Network net = highway_network({}, kShortRoads);
  const double dt = net.max_dt();
  for (int n = 0; n < 50; ++n) net.step(n * dt, dt);
  CHECK(net.total_mass() == 0.0);
  for (int id : {1, 3, 5}) net.set_sensor(constant_sensor(id, 60, 0.0, 80.0));
  const double t = warm_start(net, 0.05, dt);
  CHECK(t == doctest::Approx(0.05));
  CHECK(net.total_mass() == 0.0);
}

TEST_CASE("single road network matches a standalone solver") {
  const NetworkParameters p{};
  Network net(p, {{1, 3.0}}, {}, {});
  net.set_sensor(constant_sensor(1, 30, 300.0, 80.0));
  GsomSolver solo(SpatialGrid::with_spacing(0.0, 3.0, p.dx),
                  GsomConfig{p.diagram, p.shape, p.mode, p.sampling, Boundary::demand(300.0), Boundary::neumann()});
  MacroState2 st = net.road(1).state;
  const double dt = net.max_dt();
  for (int n = 0; n < 200; ++n) {
    net.step(n * dt, dt);
    st = solo.step(st, n * dt, Fleet{}, dt);
  }
  CHECK((net.road(1).state.rho - st.rho).abs().maxCoeff() <= 1e-12);
  CHECK((net.road(1).state.w - st.w).abs().maxCoeff() <= 1e-12);
  CHECK(st.rho.maxCoeff() > 1.0);
}

TEST_CASE("constant sensor settles at q / V") {
  // V = 80 km/h is the free-flow speed at rho = 56 (1 - 80/90); q = rho V.
  const NetworkParameters p{};
  const double v = 80.0;
  const double rho = 56.0 * (1.0 - v / 90.0);
  const double q = rho * v;
  Network net(p, {{1, 2.0}}, {}, {});
  net.set_sensor(constant_sensor(1, 30, q, v));
  const double dt = net.max_dt();
  for (int n = 0; n < 400; ++n) net.step(n * dt, dt);
  CHECK(net.road(1).state.rho(0) == doctest::Approx(q / v).epsilon(1e-9));
  CHECK(net.road(1).state.rho(19) == doctest::Approx(q / v).epsilon(1e-9));
}

TEST_CASE("sensor flux above capacity is clamped to the first cell's supply") {
  const NetworkParameters p{};
  Network net(p, {{1, 2.0}}, {}, {});
  net.set_sensor(constant_sensor(1, 30, 5000.0, 80.0));
  const double dt = net.max_dt();
  const auto& road = net.road(1);
  const double r0 = road.solver.tabulate(road.state, snapshot(road.fleet, 0.0)).receiving(0);
  const auto rep = net.step(0.0, dt);
  CHECK(rep.inflow == r0);
  CHECK(r0 < 5000.0);
}

TEST_CASE("missing sensor time produces zero inflow and one warning") {
  Network net = highway_network({}, kShortRoads);
  net.set_sensor(constant_sensor(1, 1, 600.0, 80.0));
  std::vector<std::string> warnings;
  net.set_warning_sink([&](const std::string& m) { warnings.push_back(m); });
  const double dt = net.max_dt();
  for (int n = 0; n < 60; ++n) net.step(n * dt, dt);
  CHECK(warnings.size() == 3);  // roads 1 (past its span), 3 and 5 (no series)
  const double before = net.total_mass();
  const auto rep = net.step(60 * dt, dt);
  CHECK(rep.inflow == 0.0);
  CHECK(net.total_mass() <= before + 1e-12);
}

TEST_CASE("inflow on road 1 reaches only roads 1, 2 and 6") {
  Network net = highway_network({}, kShortRoads);
  net.set_sensor(constant_sensor(1, 60, 800.0, 80.0));
  warm_start(net, 0.25, net.max_dt());
  for (int id : {1, 2, 6}) CHECK(net.road(id).state.rho.maxCoeff() > 0.0);
  for (int id : {3, 4, 5}) CHECK(net.road(id).state.rho.maxCoeff() == 0.0);
}

TEST_CASE("junctions conserve vehicles and keep the split ratio") {
  Network net = highway_network({}, kShortRoads);
  net.set_sensor(synthetic_sensor_series(1, 60, 1500.0, 80.0, 1));
  net.set_sensor(synthetic_sensor_series(3, 60, 1200.0, 80.0, 2));
  net.set_sensor(synthetic_sensor_series(5, 60, 900.0, 80.0, 3));
  const Fleet slow{Trajectory("s", {{0.0, 0.5, 15.0}, {0.2, 3.0, 15.0}}, 2)};
  net.set_fleet(2, slow);
  const double dt = net.max_dt();
  for (int n = 0; n < 400; ++n) {
    const auto rep = net.step(n * dt, dt);
    REQUIRE(rep.balance_error() <= 1e-10);
    for (std::size_t k = 0; k < 3; ++k) {
      const auto& d = rep.diverge_flows[k];
      const double alpha = net.diverges()[k].alpha;
      if (d.main > 0.0) CHECK(d.side / d.main == doctest::Approx((1 - alpha) / alpha).epsilon(1e-12));
    }
    for (const auto& r : net.roads()) {
      REQUIRE(r.state.rho.minCoeff() >= 0.0);
      REQUIRE(r.state.rho.maxCoeff() <= 56.0);
      REQUIRE(r.state.w.minCoeff() >= net.parameters().diagram.w_l);
      REQUIRE(r.state.w.maxCoeff() <= net.parameters().diagram.w_r);
    }
  }
  CHECK(net.road(2).state.rho.maxCoeff() > 10.0);
}
