#include <doctest.h>

#include <random>

#include "trajflow/gsom.hpp"
#include "trajflow/lwr.hpp"

using namespace trajflow;

namespace {

const auto kDiag = CgarzDiagram<double>::with_default_bounds(56.0, 10.0, 90.0);
const CutoffShape<double> kShape(0.2, 0.6);

Trajectory cruising(const std::string& id, double x0, double v) {
  return Trajectory(id, {{0.0, x0, v}, {1.0, x0 + v, v}});
}

GsomConfig config(EmbeddingMode mode = EmbeddingMode::ClosestVehicle, Boundary left = Boundary::demand(0.0),
                  Boundary right = Boundary::neumann()) {
  return {kDiag, kShape, mode, {}, left, right};
}

MacroState2 random_state(std::mt19937_64& rng, Eigen::Index n) {
  std::uniform_real_distribution<double> dens(0.0, kDiag.rho_max);
  std::uniform_real_distribution<double> inv(kDiag.w_l, kDiag.w_r);
  MacroState2 s{Field(n), Field(n)};
  for (Eigen::Index j = 0; j < n; ++j) {
    s.rho(j) = dens(rng);
    s.w(j) = inv(rng);
  }
  return s;
}

Fleet random_fleet(std::mt19937_64& rng, double a, double b) {
  std::uniform_real_distribution<double> pos(a, b);
  std::uniform_real_distribution<double> speed(0.0, 110.0);
  std::uniform_int_distribution<int> count(1, 5);
  Fleet f;
  const int n = count(rng);
  for (int i = 0; i < n; ++i) f.push_back(cruising("v" + std::to_string(i), pos(rng), speed(rng)));
  return f;
}

}  // namespace

TEST_CASE("embedded speed of the second-order model") {
  const Fleet one{cruising("a", 1.0, 15.0)};
  CHECK(embedded_speed_2(3.0, 0.0, 28.0, kDiag.w_r, one, kDiag, kShape) == doctest::Approx(45.0));
  CHECK(embedded_speed_2(1.0, 0.0, 28.0, kDiag.w_r, one, kDiag, kShape) == doctest::Approx(22.5));
  const Fleet matched{cruising("b", 1.0, 45.0)};
  CHECK(embedded_speed_2(1.0, 0.0, 28.0, kDiag.w_r, matched, kDiag, kShape) == doctest::Approx(45.0));
}

TEST_CASE("time step bound") {
  const auto grid = SpatialGrid::with_spacing(0.0, 3.0, 0.1);
  GsomSolver solver(grid, config());
  CHECK(solver.max_dt(Fleet{}) * 3600.0 == doctest::Approx(4.0));
  CHECK(solver.max_dt(Fleet{cruising("a", 1.0, 20.0)}) * 3600.0 == doctest::Approx(2.0));
  CHECK(solver.max_dt(Fleet{cruising("a", 1.0, 100.0)}) * 3600.0 == doctest::Approx(2.0));
  MacroState2 st{Field::Constant(30, 20.0), Field::Constant(30, kDiag.w_mid())};
  CHECK_THROWS_AS(solver.step(st, 0.0, Fleet{}, 4.5 / 3600.0), NumericalError);
}

TEST_CASE("constant state without vehicles is steady") {
  const auto grid = SpatialGrid::with_spacing(0.0, 3.0, 0.1);
  for (double rho : {5.0, 20.0, 40.0}) {
    const double w = kDiag.w_mid();
    MacroState2 st{Field::Constant(30, rho), Field::Constant(30, w)};
    GsomSolver probe(grid, config());
    const auto table = probe.tabulate(st, snapshot(Fleet{}, 0.0));
    GsomSolver solver(grid, config(EmbeddingMode::ClosestVehicle, Boundary::demand(table.flux(0))));
    const double dt = solver.max_dt(Fleet{});
    for (int n = 0; n < 50; ++n) st = solver.step(st, n * dt, Fleet{}, dt);
    CHECK((st.rho - rho).abs().maxCoeff() < 1e-12);
    CHECK((st.w - w).abs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("constant w reduces to the first-order solver") {
  std::mt19937_64 rng(21);
  const auto grid = SpatialGrid::with_spacing(0.0, 4.0, 0.1);
  for (double w : {kDiag.w_l, 1000.0, kDiag.w_r}) {
    const Fleet f{cruising("a", 0.8, 25.0), cruising("b", 2.0, 60.0)};
    GsomSolver second(grid, config(EmbeddingMode::ClosestVehicle, Boundary::demand(800.0)));
    LwrSolver first(grid, LwrConfig{cgarz_law(kDiag, w), kShape, EmbeddingMode::ClosestVehicle, {},
                                    Boundary::demand(800.0), Boundary::neumann()});
    MacroState2 s2 = random_state(rng, 40);
    s2.w.setConstant(w);
    MacroState1 s1{s2.rho};
    const double dt = second.max_dt(f);
    for (int n = 0; n < 200; ++n) {
      s2 = second.step(s2, n * dt, f, dt);
      s1 = first.step(s1, n * dt, f, dt);
    }
    CHECK((s2.rho - s1.rho).abs().maxCoeff() <= 1e-12);
    CHECK((s2.w - w).abs().maxCoeff() == 0.0);
  }
}

TEST_CASE("w obeys a min-max principle and rho stays in bounds") {
  std::mt19937_64 rng(23);
  const auto grid = SpatialGrid::with_spacing(0.0, 3.0, 0.1);
  for (int trial = 0; trial < 40; ++trial) {
    const Fleet f = random_fleet(rng, 0.0, 2.5);
    GsomSolver solver(grid, config(trial % 2 ? EmbeddingMode::ClosestVehicle : EmbeddingMode::AverageClosestVehicles,
                                   Boundary::demand(500.0)));
    MacroState2 st = random_state(rng, 30);
    const double dt = solver.max_dt(f);
    for (int n = 0; n < 100; ++n) {
      const auto next = solver.step(st, n * dt, f, dt);
      REQUIRE(next.w.minCoeff() >= st.w.minCoeff() - 1e-9);
      REQUIRE(next.w.maxCoeff() <= st.w.maxCoeff() + 1e-9);
      REQUIRE(next.rho.minCoeff() >= 0.0);
      REQUIRE(next.rho.maxCoeff() <= kDiag.rho_max);
      st = next;
    }
  }
}

TEST_CASE("inflow w enters through the first cell") {
  const auto grid = SpatialGrid::with_spacing(0.0, 2.0, 0.1);
  GsomSolver solver(grid, config(EmbeddingMode::None, Boundary::demand(600.0)));
  MacroState2 st{Field::Constant(20, 20.0), Field::Constant(20, kDiag.w_l)};
  const double dt = solver.max_dt(Fleet{});
  for (int n = 0; n < 60; ++n) st = solver.step(st, n * dt, Fleet{}, dt, kDiag.w_r);
  CHECK(st.w(0) == doctest::Approx(kDiag.w_r));
  CHECK(st.w(19) < kDiag.w_r);
}

TEST_CASE("vehicles only perturb density inside their cones of influence") {
  const auto grid = SpatialGrid::with_spacing(0.0, 20.0, 0.1);
  const Fleet slow{cruising("a", 9.0, 10.0), cruising("b", 11.0, 15.0)};
  MacroState2 init{Field::Constant(200, 30.0), Field(200)};
  for (Eigen::Index j = 0; j < 200; ++j) init.w(j) = grid.center(static_cast<std::size_t>(j)) < 10.0 ? kDiag.w_r : kDiag.w_l;
  GsomSolver solver(grid, config(EmbeddingMode::ClosestVehicle, Boundary::neumann()));
  MacroState2 with = init;
  MacroState2 without = init;
  const double dt = solver.max_dt(slow);
  const int steps = 15;  // 30 s
  for (int n = 0; n < steps; ++n) {
    with = solver.step(with, n * dt, slow, dt);
    without = solver.step(without, n * dt, Fleet{}, dt);
  }
  const double t = steps * dt;
  const double reach = kShape.big_l + 2.0 * kDiag.v_max * t + grid.dx();
  const double lo = 9.0 - reach;
  const double hi = 11.0 + 15.0 * t + reach;
  double inside = 0.0;
  for (Eigen::Index j = 0; j < 200; ++j) {
    const double x = grid.center(static_cast<std::size_t>(j));
    const double diff = std::abs(with.rho(j) - without.rho(j));
    if (x < lo || x > hi) CHECK(diff == 0.0);
    else inside = std::max(inside, diff);
  }
  CHECK(inside > 1.0);
}

TEST_CASE("acceleration of a constant state without vehicles vanishes") {
  const auto grid = SpatialGrid::with_spacing(0.0, 3.0, 0.1);
  GsomSolver solver(grid, config());
  const MacroState2 st{Field::Constant(30, 25.0), Field::Constant(30, 1000.0)};
  CHECK(acceleration_field(solver, st, snapshot(Fleet{}, 0.0)).abs().maxCoeff() == 0.0);
}

TEST_CASE("decelerating vehicle on its plateau") {
  // Speed 40 -> 30 -> 20 km/h over two 36 s segments: p_ddot = -1000 km/h^2.
  const Trajectory braking("a", {{0.0, 1.5, 40.0}, {0.01, 1.85, 30.0}, {0.02, 2.1, 20.0}});
  const auto grid = SpatialGrid::with_spacing(0.0, 3.0, 0.1);
  GsomSolver solver(grid, config());
  const MacroState2 st{Field::Constant(30, 28.0), Field::Constant(30, kDiag.w_r)};
  const double t = 0.005;
  const auto k = interpolate(braking, t);
  REQUIRE(k);
  CHECK(k->p_ddot == doctest::Approx(-1000.0));
  const auto cell = static_cast<Eigen::Index>(k->p / grid.dx());
  const Field a = acceleration_field(solver, st, snapshot(Fleet{braking}, t));
  const double v = 45.0;
  const double expected = 2.0 * k->p_ddot * v * v / ((k->p_dot + v) * (k->p_dot + v));
  CHECK(a(cell) == doctest::Approx(expected).epsilon(1e-9));
  CHECK(a(cell) < 0.0);
}

TEST_CASE("acceleration is the rate of change of the speed along the flow") {
  // One-cell check on a smooth ramp, no vehicles.
  const auto grid = SpatialGrid::with_spacing(0.0, 4.0, 0.02);
  GsomSolver solver(grid, config(EmbeddingMode::None, Boundary::neumann()));
  MacroState2 st{Field(200), Field::Constant(200, kDiag.w_mid())};
  for (Eigen::Index j = 0; j < 200; ++j) st.rho(j) = 20.0 + 10.0 * std::tanh(grid.center(static_cast<std::size_t>(j)) - 2.0);
  const FleetSnapshot none = snapshot(Fleet{}, 0.0);
  const auto table = solver.tabulate(st, none);
  const Field a = acceleration_field(solver, st, none, table);
  const double dt = solver.max_dt(Fleet{}) / 4.0;
  const MacroState2 next = solver.step(st, none, dt);
  const auto next_table = solver.tabulate(next, none);
  const Field x = grid.centers();
  for (Eigen::Index j : {90, 100, 110}) {
    const double xp = x(j) + table.speed(j) * dt;
    const auto k = static_cast<Eigen::Index>(std::floor((xp - x(0)) / grid.dx()));
    const double s = (xp - x(k)) / grid.dx();
    const double v_new = (1 - s) * next_table.speed(k) + s * next_table.speed(k + 1);
    const double probe = (v_new - table.speed(j)) / dt;
    CHECK(a(j) == doctest::Approx(probe).epsilon(0.05));
  }
}
