#include <doctest.h>

#include <cmath>
#include <random>

#include "trajflow/kde.hpp"
#include "trajflow/synthetic.hpp"
#include "trajflow/trajectory.hpp"

using namespace trajflow;

namespace {
Trajectory at_rest(const std::string& id, double x) { return Trajectory(id, {{0.0, x, 0.0}, {1.0, x, 0.0}}); }
Trajectory cruising(const std::string& id, double x0, double v) {
  return Trajectory(id, {{0.0, x0, v}, {1.0, x0 + v, v}});
}
}  // namespace

TEST_CASE("interpolate") {
  const Trajectory plain("a", {{0.0, 0.0, std::nullopt}, {1.0, 10.0, std::nullopt}});
  auto k = interpolate(plain, 0.5);
  REQUIRE(k);
  CHECK(k->p == doctest::Approx(5.0));
  CHECK(k->p_dot == doctest::Approx(10.0));
  k = interpolate(plain, 1.0);
  REQUIRE(k);
  CHECK(k->p == 10.0);
  CHECK_FALSE(interpolate(plain, 1.5));

  const Trajectory ramp("b", {{0.0, 0.0, 0.0}, {1.0, 10.0, 20.0}});
  k = interpolate(ramp, 0.5);
  REQUIRE(k);
  CHECK(k->p_dot == doctest::Approx(10.0));
  CHECK(k->p_ddot == doctest::Approx(20.0));
  k = interpolate(ramp, 0.0);
  CHECK(k->p == 0.0);
  CHECK(k->p_dot == 0.0);
}

TEST_CASE("trajectory invariants") {
  CHECK_THROWS_AS(Trajectory("x", {}), ConfigError);
  CHECK_THROWS_AS(Trajectory("x", {{0.0, 1.0, {}}, {0.0, 2.0, {}}}), ConfigError);
  CHECK_THROWS_AS(Trajectory("x", {{0.0, 2.0, {}}, {1.0, 1.0, {}}}), ConfigError);
}

TEST_CASE("closest vehicle") {
  CHECK(closest_vehicle(Fleet{at_rest("a", 2.0)}, 3.0, 0.5) == 0u);
  CHECK(closest_vehicle(Fleet{at_rest("a", 1.0), at_rest("b", 5.0)}, 2.9, 0.5) == 0u);
  CHECK(closest_vehicle(Fleet{at_rest("a", 5.0), at_rest("b", 1.0)}, 2.9, 0.5) == 1u);
  CHECK(closest_vehicle(Fleet{at_rest("a", 1.0), at_rest("b", 3.0)}, 2.0, 0.5) == 0u);
  CHECK_FALSE(closest_vehicle(Fleet{}, 2.0, 0.5));
}

TEST_CASE("closest vehicle agrees with a linear scan; coverage iff distance < L") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> pos(0.0, 5.0);
  std::uniform_int_distribution<int> count(1, 8);
  const CutoffShape<double> shape(0.2, 0.6);
  for (int trial = 0; trial < 300; ++trial) {
    Fleet f;
    const int n = count(rng);
    for (int i = 0; i < n; ++i) f.push_back(at_rest("v" + std::to_string(i), pos(rng)));
    const double x = pos(rng);
    std::size_t best = 0;
    for (std::size_t i = 1; i < f.size(); ++i)
      if (std::abs(x - f[i].samples()[0].x) < std::abs(x - f[best].samples()[0].x)) best = i;
    const auto got = closest_vehicle(f, x, 0.5);
    REQUIRE(got);
    CHECK(*got == best);
    const double dist = std::abs(x - f[best].samples()[0].x);
    CHECK((coverage_count(f, x, 0.5, shape) >= 1) == (dist < shape.big_l));
  }
}

TEST_CASE("coverage count") {
  const CutoffShape<double> shape(0.2, 0.6);
  CHECK(coverage_count(Fleet{}, 1.0, 0.0, shape) == 0);
  CHECK(coverage_count(Fleet{at_rest("a", 1.3)}, 1.0, 0.0, shape) == 1);
  const Fleet trio{cruising("1", 1.0, 10.0), cruising("2", 1.001, 25.0), cruising("3", 1.002, 50.0)};
  CHECK(coverage_count(trio, 1.0, 0.0, shape) == 3);
}

TEST_CASE("synthetic platoon") {
  const double T = 20.0 / 60.0;
  const SyntheticPlatoon p(41, 0.3, T, 90.0);
  for (std::size_t i = 0; i < 41; ++i) CHECK(p.speed(i, 0.0) == doctest::Approx(0.3 * 90.0));
  CHECK(p.position(0, 0.0) == doctest::Approx(1.0));
  CHECK(p.position(40, 0.0) == doctest::Approx(3.0));
  double peak = 0.0;
  for (double t = 0.0; t <= T; t += T / 20000.0) peak = std::max(peak, p.speed(0, t));
  CHECK(peak == doctest::Approx(54.0).epsilon(1e-6));
  CHECK(p.wave_number(0) == doctest::Approx(20.0));
  CHECK(p.wave_number(40) == doctest::Approx(25.0));

  // Position and speed are a consistent pair.
  const double h = 1e-7;
  for (std::size_t i : {0u, 17u, 40u})
    for (double t : {0.01, 0.1, 0.2, 0.3}) {
      const double fd = (p.position(i, t + h) - p.position(i, t - h)) / (2 * h);
      CHECK(fd == doctest::Approx(p.speed(i, t)).epsilon(1e-6));
      const double fa = (p.speed(i, t + h) - p.speed(i, t - h)) / (2 * h);
      CHECK(fa == doctest::Approx(p.acceleration(i, t)).epsilon(1e-5));
    }

  const Fleet f = generate_synthetic(41, 0.3, T, 90.0);
  CHECK(f.size() == 41);
  CHECK(f[0].samples().size() == 1201);
  CHECK(f[0].has_speeds());
}

TEST_CASE("ftl equilibrium and response") {
  const FtlConfig cfg;
  const double dt = cfg.relaxation_time / 4.0;
  const FtlState eq = ftl_equilibrium(cfg, 0.5);
  const FtlState next = step_ftl(eq, cfg, dt);
  for (Eigen::Index i = 0; i < eq.speeds.size(); ++i) CHECK(next.speeds(i) == doctest::Approx(eq.speeds(i)));

  FtlConfig two = cfg;
  two.n_vehicles = 2;
  FtlState s{Field(2), Field(2)};
  s.positions << 0.0, 0.2;
  s.speeds << 20.0, cfg.leader_speed;
  const FtlState s1 = step_ftl(s, two, dt);
  CHECK(s1.speeds(0) > s.speeds(0));
  CHECK(s1.speeds(1) == cfg.leader_speed);
}

TEST_CASE("ftl perturbed platoon develops a growing stop and go wave") {
  // The instability is convective: the wave grows while it travels back through
  // the platoon and leaves through the tail after about 100 s.
  const FtlConfig cfg;
  const double dt = cfg.relaxation_time / 4.0;
  FtlState s = ftl_perturbed_platoon(cfg, 0.5, 3);
  auto spread = [](const FtlState& st) {
    const Field v = st.speeds.head(st.speeds.size() - 1);
    return std::sqrt((v - v.mean()).square().mean());
  };
  std::vector<double> spreads;  // every 10 s
  std::vector<double> probe;    // vehicle 10, every second
  for (int n = 1; n <= 4 * 90; ++n) {
    s = step_ftl(s, cfg, dt);
    for (Eigen::Index i = 1; i < s.positions.size(); ++i) REQUIRE(s.positions(i) > s.positions(i - 1));
    if (n % 4 == 0) probe.push_back(s.speeds(10));
    if (n % 40 == 0) spreads.push_back(spread(s));
  }
  const double settled = spreads[0];  // after the initial kinks smooth out
  const double peak = *std::max_element(spreads.begin(), spreads.end());
  CHECK(peak > 2.0 * settled);
  for (std::size_t k = 1; k < 8; ++k) CHECK(spreads[k] > settled);
  int turns = 0;
  for (std::size_t k = 2; k < probe.size(); ++k)
    if ((probe[k] - probe[k - 1]) * (probe[k - 1] - probe[k - 2]) < 0) ++turns;
  CHECK(turns >= 2);
}

TEST_CASE("kde density") {
  const auto grid = SpatialGrid::with_spacing(0.0, 5.0, 0.01);
  const KdeConfig std_kde{0.1, KernelNormalization::Standard};
  CHECK((kde_density(Fleet{}, 0.0, std_kde, grid) == 0.0).all());

  const Field single = kde_density(Fleet{at_rest("a", 2.505)}, 0.0, std_kde, grid);
  Eigen::Index arg = 0;
  single.maxCoeff(&arg);
  CHECK(arg == 250);
  for (Eigen::Index k = 1; k < 200; ++k) CHECK(single(250 - k) == doctest::Approx(single(250 + k)).epsilon(1e-12));

  Fleet platoon;
  for (int i = 0; i < 41; ++i) platoon.push_back(at_rest("p" + std::to_string(i), 1.0 + 0.05 * i));
  const Field rho = kde_density(platoon, 0.0, std_kde, grid);
  // Interior away from the platoon edges.
  const Field inner = rho.segment(150, 101);
  CHECK(inner.maxCoeff() / inner.minCoeff() < 1.05);
  CHECK(rho.sum() * grid.dx() == doctest::Approx(41.0).epsilon(0.01));

  const KdeConfig literal{0.1, KernelNormalization::Literal};
  const Field lit = kde_density(platoon, 0.0, literal, grid);
  CHECK(lit.sum() * grid.dx() == doctest::Approx(41.0 / std::sqrt(2.0 * M_PI)).epsilon(0.01));
  CHECK(literal.kernel(0.0) == doctest::Approx(1.0 / (2.0 * M_PI * 0.1)));
}

TEST_CASE("kde velocity") {
  const auto grid = SpatialGrid::with_spacing(0.0, 4.0, 0.1);
  const KdeConfig kde{0.1, KernelNormalization::Literal};
  const Field same = kde_velocity(Fleet{cruising("a", 1.0, 40.0), cruising("b", 2.0, 40.0)}, 0.0, kde, grid);
  for (Eigen::Index j = 0; j < same.size(); ++j) CHECK(same(j) == doctest::Approx(40.0));
  const Field one = kde_velocity(Fleet{cruising("a", 1.0, 20.0)}, 0.0, kde, grid);
  for (Eigen::Index j = 0; j < one.size(); ++j) CHECK(one(j) == doctest::Approx(20.0));
  const Field two = kde_velocity(Fleet{cruising("a", 1.0, 10.0), cruising("b", 3.0, 30.0)}, 0.0, kde, grid);
  CHECK(two(19) + two(20) == doctest::Approx(40.0));  // mirror cells around x = 2
  const auto mid = SpatialGrid(1.5, 2.5, 1);
  CHECK(kde_velocity(Fleet{cruising("a", 1.0, 10.0), cruising("b", 3.0, 30.0)}, 0.0, kde, mid)(0) ==
        doctest::Approx(20.0));
}

TEST_CASE("fleet helpers") {
  Fleet f;
  for (int i = 0; i < 10; ++i) f.emplace_back("v" + std::to_string(i), std::vector<TrajectorySample>{{0.0, 1.0 * i, {}}, {1.0, 1.0 * i + 1, {}}}, i % 2);
  CHECK(fleet_for_road(f, 1).size() == 5);
  CHECK(subsample(f, 2).size() == 5);
  CHECK(subsample(f, 4).size() == 3);
  CHECK(subsample(f, 4)[1].vehicle_id() == "v4");
}
