#include "trajflow/scenario.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>

#include "trajflow/io.hpp"

namespace trajflow {

using nlohmann::json;

namespace {

// Typed access to one JSON object with field paths in error messages.
class Node {
public:
  Node(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError("config: '" + path_ + "' must be an object");
  }

  bool has(const std::string& k) const { return j_.contains(k) && !j_.at(k).is_null(); }
  std::string field(const std::string& k) const { return path_.empty() ? k : path_ + "." + k; }

  void allow(std::initializer_list<const char*> keys) const {
    std::set<std::string> ok(keys.begin(), keys.end());
    for (const auto& [k, v] : j_.items())
      if (!ok.count(k)) throw ConfigError("config: unknown field '" + field(k) + "'");
  }

  double num(const std::string& k) const {
    if (!has(k)) throw ConfigError("config: missing field '" + field(k) + "'");
    if (!j_.at(k).is_number()) throw ConfigError("config: field '" + field(k) + "' must be a number");
    return j_.at(k).get<double>();
  }
  double num(const std::string& k, double dflt) const { return has(k) ? num(k) : dflt; }
  std::optional<double> opt(const std::string& k) const {
    return has(k) ? std::optional<double>(num(k)) : std::nullopt;
  }
  double positive(const std::string& k, double dflt) const {
    const double v = num(k, dflt);
    if (!(v > 0.0)) throw ConfigError("config: field '" + field(k) + "' must be positive");
    return v;
  }

  std::size_t count(const std::string& k, std::size_t dflt) const {
    if (!has(k)) return dflt;
    const auto& v = j_.at(k);
    if (!v.is_number_integer() || v.get<long long>() < 1)
      throw ConfigError("config: field '" + field(k) + "' must be a positive integer");
    return v.get<std::size_t>();
  }

  std::string str(const std::string& k, const std::string& dflt) const {
    if (!has(k)) return dflt;
    if (!j_.at(k).is_string()) throw ConfigError("config: field '" + field(k) + "' must be a string");
    return j_.at(k).get<std::string>();
  }

  bool flag(const std::string& k, bool dflt) const {
    if (!has(k)) return dflt;
    if (!j_.at(k).is_boolean()) throw ConfigError("config: field '" + field(k) + "' must be true or false");
    return j_.at(k).get<bool>();
  }

  Node sub(const std::string& k) const { return {j_.at(k), field(k)}; }
  const json& raw(const std::string& k) const { return j_.at(k); }

  /// Duration given as <base>_h, <base>_min or <base>_s; returned in hours.
  std::optional<double> duration(const std::string& base) const {
    std::optional<double> out;
    int found = 0;
    if (has(base + "_h")) out = num(base + "_h"), ++found;
    if (has(base + "_min")) out = num(base + "_min") / 60.0, ++found;
    if (has(base + "_s")) out = num(base + "_s") / 3600.0, ++found;
    if (found > 1) throw ConfigError("config: '" + field(base) + "' given in more than one unit");
    if (out && !(*out > 0.0)) throw ConfigError("config: '" + field(base) + "' must be positive");
    return out;
  }

private:
  const json& j_;
  std::string path_;
};

template <class E>
E choose(const Node& n, const std::string& k, const std::string& dflt,
         std::initializer_list<std::pair<const char*, E>> options) {
  const std::string v = n.str(k, dflt);
  for (const auto& [name, e] : options)
    if (v == name) return e;
  std::string names;
  for (const auto& [name, e] : options) names += (names.empty() ? "" : "|") + std::string(name);
  throw ConfigError("config: field '" + n.field(k) + "' must be one of " + names + ", got '" + v + "'");
}

std::string resolve(const std::string& base, const std::string& p) {
  if (p.empty()) return p;
  std::filesystem::path path(p);
  if (path.is_absolute()) return p;
  return std::filesystem::absolute(std::filesystem::path(base) / path).lexically_normal().string();
}

void parse_trajectories(const Node& n, TrajectorySpec& t) {
  n.allow({"source", "file", "road_id", "stride", "take", "n", "c", "horizon_h", "horizon_min",
           "horizon_s", "v_max", "sample_h", "sample_min", "sample_s", "acceleration", "ftl"});
  t.source = choose<TrajectorySpec::Source>(n, "source", "none",
                                            {{"none", TrajectorySpec::Source::None},
                                             {"file", TrajectorySpec::Source::File},
                                             {"synthetic", TrajectorySpec::Source::Synthetic},
                                             {"ftl", TrajectorySpec::Source::Ftl}});
  t.file = n.str("file", "");
  if (t.source == TrajectorySpec::Source::File && t.file.empty())
    throw ConfigError("config: field 'trajectories.file' is required for source 'file'");
  t.road_id = static_cast<int>(n.num("road_id", 0));
  t.stride = n.count("stride", 1);
  if (n.has("take")) t.take = n.count("take", 1);
  t.n = n.count("n", t.n);
  if (t.n < 2) throw ConfigError("config: field 'trajectories.n' must be at least 2");
  t.c = n.positive("c", t.c);
  t.horizon = n.duration("horizon").value_or(t.horizon);
  t.v_max = n.positive("v_max", t.v_max);
  t.sample_dt = n.duration("sample").value_or(t.sample_dt);
  t.accel = choose<PlatoonAcceleration>(n, "acceleration", "derivative",
                                        {{"derivative", PlatoonAcceleration::SpeedDerivative},
                                         {"verbatim", PlatoonAcceleration::Verbatim}});
  if (n.has("ftl")) {
    const Node f = n.sub("ftl");
    f.allow({"n_vehicles", "accel_gain", "preferred_gap", "leader_speed", "relaxation_time_h",
             "relaxation_time_min", "relaxation_time_s", "x_tail", "dt_h", "dt_min", "dt_s", "duration_h",
             "duration_min", "duration_s", "record_every", "slowdown"});
    t.ftl.n_vehicles = f.count("n_vehicles", t.ftl.n_vehicles);
    t.ftl.accel_gain = f.positive("accel_gain", t.ftl.accel_gain);
    t.ftl.preferred_gap = f.positive("preferred_gap", t.ftl.preferred_gap);
    t.ftl.leader_speed = f.positive("leader_speed", t.ftl.leader_speed);
    t.ftl.relaxation_time = f.duration("relaxation_time").value_or(t.ftl.relaxation_time);
    t.ftl_x_tail = f.num("x_tail", t.ftl_x_tail);
    t.ftl_dt = f.duration("dt").value_or(t.ftl.relaxation_time / 4.0);
    t.ftl_duration = f.duration("duration").value_or(t.ftl_duration);
    t.ftl_record_every = f.count("record_every", t.ftl_record_every);
    t.ftl_slowdown = f.num("slowdown", t.ftl_slowdown);
    if (!(t.ftl_slowdown >= 0.0 && t.ftl_slowdown < 1.0))
      throw ConfigError("config: field 'trajectories.ftl.slowdown' must lie in [0, 1)");
    t.ftl.validate();
  }
}

Boundary parse_boundary(const Node& n, bool left, bool& from_left_state) {
  n.allow({"type", "value"});
  const std::string type = n.str("type", left ? "demand" : "neumann");
  from_left_state = false;
  if (type == "wall") return Boundary::wall();
  if (type == "neumann") return Boundary::neumann();
  if (type == "fixed") return Boundary::fixed(n.num("value"));
  if (left && type == "demand") {
    const double q = n.num("value", 0.0);
    if (q < 0.0) throw ConfigError("config: field '" + n.field("value") + "' must be non-negative");
    return Boundary::demand(q);
  }
  if (left && type == "left_state") {
    from_left_state = true;
    return Boundary::demand(0.0);
  }
  if (!left && type == "supply") {
    const double q = n.num("value");
    if (q < 0.0) throw ConfigError("config: field '" + n.field("value") + "' must be non-negative");
    return Boundary::supply(q);
  }
  throw ConfigError("config: field '" + n.field("type") + "' has unsupported value '" + type + "'");
}

}  // namespace

CgarzDiagram<double> DiagramSpec::cgarz_diagram() const {
  auto d = CgarzDiagram<double>::with_default_bounds(rho_max, rho_f, v_max);
  return {rho_max, rho_f, v_max, w_l.value_or(d.w_l), w_r.value_or(d.w_r)};
}

ScenarioConfig parse_config(const json& doc, const std::string& base_dir) {
  ScenarioConfig c;
  c.raw = doc;
  c.base_dir = base_dir;
  const Node root(doc, "");
  root.allow({"model", "embedding", "diagram", "cutoff", "sampling", "grid", "time", "initial", "boundary",
              "trajectories", "emissions", "diffusion", "network", "output", "seed", "description"});

  c.model = choose<ModelKind>(root, "model", "lwr",
                              {{"lwr", ModelKind::Lwr}, {"gsom", ModelKind::Gsom}, {"network", ModelKind::Network}});
  c.embedding = choose<EmbeddingMode>(root, "embedding", "cv",
                                      {{"cv", EmbeddingMode::ClosestVehicle},
                                       {"acv", EmbeddingMode::AverageClosestVehicles},
                                       {"none", EmbeddingMode::None}});
  if (root.has("seed")) {
    if (!root.raw("seed").is_number_unsigned()) throw ConfigError("config: field 'seed' must be a non-negative integer");
    c.seed = root.raw("seed").get<std::uint64_t>();
  }

  if (root.has("diagram")) {
    const Node d = root.sub("diagram");
    d.allow({"type", "rho_max", "u_max", "v_max", "rho_f", "w_l", "w_r"});
    c.diagram.cgarz = choose<bool>(d, "type", c.model == ModelKind::Lwr ? "greenshields" : "cgarz",
                                   {{"greenshields", false}, {"cgarz", true}});
    c.diagram.rho_max = d.positive("rho_max", c.model == ModelKind::Network ? 56.0 : 100.0);
    c.diagram.v_max = d.positive(d.has("u_max") ? "u_max" : "v_max", 90.0);
    c.diagram.rho_f = d.positive("rho_f", 10.0);
    c.diagram.w_l = d.opt("w_l");
    c.diagram.w_r = d.opt("w_r");
  } else {
    c.diagram.cgarz = c.model != ModelKind::Lwr;
    if (c.model == ModelKind::Network) c.diagram.rho_max = 56.0;
  }
  if (c.model != ModelKind::Lwr && !c.diagram.cgarz)
    throw ConfigError("config: field 'diagram.type' must be 'cgarz' for second-order models");
  if (c.diagram.cgarz) (void)c.diagram.cgarz_diagram();
  else (void)c.diagram.greenshields();

  if (root.has("cutoff")) {
    const Node n = root.sub("cutoff");
    n.allow({"ell", "L"});
    c.cutoff = CutoffShape<double>(n.num("ell", 0.2), n.num("L", 0.6));
  }
  if (root.has("sampling")) {
    const Node n = root.sub("sampling");
    n.allow({"n_rho"});
    c.sampling.n_rho_samples = n.count("n_rho", 256);
    c.sampling.validate();
  }
  if (root.has("grid")) {
    const Node n = root.sub("grid");
    n.allow({"a", "b", "dx"});
    c.a = n.num("a", c.a);
    c.b = n.num("b", c.b);
    c.dx = n.positive("dx", c.dx);
  }
  if (c.model != ModelKind::Network) (void)SpatialGrid::with_spacing(c.a, c.b, c.dx);

  if (root.has("time")) {
    const Node n = root.sub("time");
    n.allow({"horizon_h", "horizon_min", "horizon_s", "dt_h", "dt_min", "dt_s"});
    c.horizon = n.duration("horizon").value_or(c.horizon);
    c.dt = n.duration("dt");
  }

  if (root.has("initial")) {
    const Node n = root.sub("initial");
    n.allow({"type", "rho", "w", "x0", "rho_left", "rho_right", "w_left", "w_right", "bandwidth_km",
             "normalization"});
    auto& in = c.initial;
    in.kind = choose<InitialSpec::Kind>(n, "type", "constant",
                                        {{"constant", InitialSpec::Kind::Constant},
                                         {"riemann", InitialSpec::Kind::Riemann},
                                         {"kde", InitialSpec::Kind::Kde}});
    in.rho = n.num("rho", 0.0);
    in.w = n.opt("w");
    in.x0 = n.num("x0", 0.5 * (c.a + c.b));
    in.rho_left = n.num("rho_left", 0.0);
    in.rho_right = n.num("rho_right", 0.0);
    in.w_left = n.opt("w_left");
    in.w_right = n.opt("w_right");
    in.kde.bandwidth = n.positive("bandwidth_km", 0.1);
    in.kde.normalization = choose<KernelNormalization>(
        n, "normalization", "literal",
        {{"literal", KernelNormalization::Literal}, {"standard", KernelNormalization::Standard}});
    for (double r : {in.rho, in.rho_left, in.rho_right})
      if (r < 0.0 || r > c.diagram.rho_max)
        throw ConfigError("config: initial densities must lie in [0, diagram.rho_max]");
  }

  if (root.has("boundary")) {
    const Node n = root.sub("boundary");
    n.allow({"left", "right"});
    if (n.has("left")) c.left.boundary = parse_boundary(n.sub("left"), true, c.left.from_left_state);
    if (n.has("right")) c.right.boundary = parse_boundary(n.sub("right"), false, c.right.from_left_state);
  }

  if (root.has("trajectories")) parse_trajectories(root.sub("trajectories"), c.trajectories);
  if (c.trajectories.source == TrajectorySpec::Source::File)
    c.trajectories.file = resolve(base_dir, c.trajectories.file);

  c.emissions.enabled = c.model != ModelKind::Lwr;
  if (root.has("emissions")) {
    const Node n = root.sub("emissions");
    n.allow({"enabled", "formula", "coefficients", "e0", "accel_clamp", "stretch"});
    c.emissions.enabled = n.flag("enabled", c.emissions.enabled);
    auto& m = c.emissions.model;
    m.formula = choose<EmissionFormula>(n, "formula", "max",
                                        {{"max", EmissionFormula::Max}, {"exp", EmissionFormula::Exp}});
    if (n.has("coefficients")) m.coefficients = load_emission_coefficients(resolve(base_dir, n.str("coefficients", "")));
    if (n.has("e0")) {
      m.coefficients.e0_floor = n.num("e0");
      if (m.coefficients.e0_floor < 0.0) throw ConfigError("config: field 'emissions.e0' must be non-negative");
    }
    m.accel_clamp = n.positive("accel_clamp", m.accel_clamp);
    if (n.has("stretch")) {
      const auto& s = n.raw("stretch");
      if (!s.is_array() || s.size() != 2 || !s[0].is_number() || !s[1].is_number() ||
          !(s[0].get<double>() < s[1].get<double>()))
        throw ConfigError("config: field 'emissions.stretch' must be [a, b] with a < b");
      c.emissions.stretch_a = s[0].get<double>();
      c.emissions.stretch_b = s[1].get<double>();
    }
  }
  if (c.model == ModelKind::Lwr) c.emissions.enabled = false;

  if (root.has("diffusion")) {
    const Node n = root.sub("diffusion");
    n.allow({"enabled", "mu", "lx", "ly", "dx", "dy", "scaling", "mixing_height", "record_every", "roads"});
    auto& d = c.diffusion;
    d.enabled = n.flag("enabled", true);
    d.mu = n.num("mu", d.mu);
    if (d.mu < 0.0) throw ConfigError("config: field 'diffusion.mu' must be non-negative");
    d.lx = n.positive("lx", d.lx);
    d.ly = n.positive("ly", d.ly);
    d.dx = n.positive("dx", d.dx);
    d.dy = n.positive("dy", d.dy);
    d.source.scaling = choose<SourceScaling>(n, "scaling", "cubic",
                                             {{"cubic", SourceScaling::CubicCell},
                                              {"mixing_height", SourceScaling::MixingHeight}});
    d.source.mixing_height = n.num("mixing_height", 0.0);
    if (d.source.scaling == SourceScaling::MixingHeight && !(d.source.mixing_height > 0.0))
      throw ConfigError("config: field 'diffusion.mixing_height' must be positive");
    d.record_every = n.count("record_every", d.record_every);
    if (n.has("roads")) {
      const auto& arr = n.raw("roads");
      if (!arr.is_array()) throw ConfigError("config: field 'diffusion.roads' must be an array");
      for (std::size_t k = 0; k < arr.size(); ++k) {
        const Node r(arr[k], "diffusion.roads[" + std::to_string(k) + "]");
        r.allow({"road", "x_origin", "direction", "y"});
        const double dir = r.num("direction", 1.0);
        if (dir != 1.0 && dir != -1.0) throw ConfigError("config: field '" + r.field("direction") + "' must be 1 or -1");
        d.roads.push_back({static_cast<int>(r.num("road", 0.0)), r.num("x_origin"), static_cast<int>(dir),
                           r.num("y", 0.0)});
      }
    }
    if (d.enabled && !c.emissions.enabled)
      throw ConfigError("config: 'diffusion' needs emissions, which are unavailable for this model");
  }

  if (c.model == ModelKind::Network) {
    auto& nw = c.network;
    nw.lengths = {{1, 41.0}, {2, 36.0}, {3, 36.0}, {4, 41.0}, {5, 36.0}, {6, 36.0}};
    for (int r : {1, 3, 5}) nw.sensor_mean_flux[r] = 300.0;
    if (root.has("network")) {
      const Node n = root.sub("network");
      n.allow({"roads", "alpha", "beta", "sensors", "synthetic_sensors", "warm_start_h", "warm_start_min"});
      if (n.has("roads")) {
        const auto& arr = n.raw("roads");
        if (!arr.is_array()) throw ConfigError("config: field 'network.roads' must be an array");
        for (std::size_t k = 0; k < arr.size(); ++k) {
          const Node r(arr[k], "network.roads[" + std::to_string(k) + "]");
          r.allow({"id", "length"});
          const int id = static_cast<int>(r.num("id"));
          if (id < 1 || id > 6) throw ConfigError("config: field '" + r.field("id") + "' must be 1..6");
          nw.lengths[id] = r.positive("length", 1.0);
        }
      }
      auto fractions = [&](const char* key, const char* prefix, double* out) {
        if (!n.has(key)) return;
        const Node f = n.sub(key);
        const std::string p(prefix);
        f.allow({(p == "D" ? "D1" : "M1"), (p == "D" ? "D2" : "M2"), (p == "D" ? "D3" : "M3")});
        for (int k = 0; k < 3; ++k) {
          const std::string name = p + std::to_string(k + 1);
          out[k] = f.num(name, out[k]);
          if (!(out[k] >= 0.0 && out[k] <= 1.0)) throw ConfigError("config: field '" + f.field(name) + "' must lie in [0, 1]");
        }
      };
      fractions("alpha", "D", nw.alpha);
      fractions("beta", "M", nw.beta);
      if (n.has("sensors")) nw.sensors_file = resolve(base_dir, n.str("sensors", ""));
      if (n.has("synthetic_sensors")) {
        const Node s = n.sub("synthetic_sensors");
        s.allow({"speed", "mean_flux"});
        nw.sensor_speed = s.num("speed", nw.sensor_speed);
        if (s.has("mean_flux")) {
          const Node m = s.sub("mean_flux");
          m.allow({"1", "3", "5"});
          for (int r : {1, 3, 5}) nw.sensor_mean_flux[r] = m.num(std::to_string(r), nw.sensor_mean_flux[r]);
        }
      }
      nw.warm_start = n.duration("warm_start").value_or(nw.warm_start);
    }
  }

  if (root.has("output")) {
    const Node n = root.sub("output");
    n.allow({"dir", "record_every"});
    c.output_dir = n.str("dir", c.output_dir);
    c.record_every = n.count("record_every", c.record_every);
  }
  c.output_dir = resolve(base_dir, c.output_dir);
  return c;
}

ScenarioConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path);
  json doc;
  try {
    doc = json::parse(in, nullptr, true, true);
  } catch (const json::exception& e) {
    throw ConfigError("config " + path + ": " + e.what());
  }
  const auto dir = std::filesystem::path(path).parent_path().string();
  return parse_config(doc, dir.empty() ? "." : dir);
}

std::string fnv1a_hex(const std::string& bytes) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char ch : bytes) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

Fleet build_fleet(const TrajectorySpec& spec, const std::string& base_dir, std::uint64_t seed,
                  std::vector<std::string>* warnings) {
  switch (spec.source) {
    case TrajectorySpec::Source::None:
      return {};
    case TrajectorySpec::Source::File: {
      const std::string path = resolve(base_dir, spec.file);
      if (!std::filesystem::exists(path)) throw IoError("trajectory file not found: " + path);
      return load_trajectories(path, warnings);
    }
    case TrajectorySpec::Source::Synthetic:
      return SyntheticPlatoon(spec.n, spec.c, spec.horizon, spec.v_max, spec.accel)
          .sample(spec.sample_dt, spec.road_id);
    case TrajectorySpec::Source::Ftl: {
      const FtlState s0 = ftl_perturbed_platoon(spec.ftl, spec.ftl_x_tail, seed, spec.ftl_slowdown);
      const TimeGrid tg = TimeGrid::covering(spec.ftl_duration, spec.ftl_dt);
      return simulate_ftl(s0, spec.ftl, spec.ftl_dt, tg.n_steps, spec.ftl_record_every, spec.road_id);
    }
  }
  return {};
}

namespace {

Fleet select_vehicles(const Fleet& fleet, const TrajectorySpec& spec) {
  Fleet out = subsample(fleet, spec.stride);
  if (spec.take && out.size() > *spec.take) out.erase(out.begin() + static_cast<std::ptrdiff_t>(*spec.take), out.end());
  return out;
}

struct Recorder {
  std::string dir;
  std::vector<std::pair<std::string, std::string>> files;  // (key, file name)

  void write(const std::string& key, const FieldDump& d) {
    const std::string name = key + ".csv";
    write_field((std::filesystem::path(dir) / name).string(), d);
    files.emplace_back(key, name);
  }
};

FieldDump make_dump(const std::string& q, const std::string& units, const SpatialGrid& g, double dt,
                    std::size_t every) {
  FieldDump d;
  d.quantity = q;
  d.units = units;
  d.a = g.a();
  d.b = g.b();
  d.dx = g.dx();
  d.dt = dt;
  d.n_cells = g.size();
  d.record_every = every;
  return d;
}

double stretch_sum(const Field& e, const SpatialGrid& g, const EmissionSpec& spec) {
  if (!spec.stretch_a) return e.sum();
  double s = 0.0;
  for (std::size_t j = 0; j < g.size(); ++j) {
    const double x = g.center(j);
    if (x >= *spec.stretch_a && x <= *spec.stretch_b) s += e(static_cast<Eigen::Index>(j));
  }
  return s;
}

Field flatten(const Field2D& f) { return Eigen::Map<const Field>(f.data(), f.size()); }

struct DiffusionRun {
  Domain2D domain;
  DiffusionSpec spec;
  Field2D psi;
  double injected = 0.0;  // integral of the source over time
  std::size_t steps = 0;
  std::size_t negative = 0;
  FieldDump dump;

  DiffusionRun(const DiffusionSpec& s, const std::map<int, double>& lengths, double traffic_dx)
      : domain(s.lx, s.ly, s.dx, s.dy), spec(s) {
    for (const auto& strip : s.roads) {
      auto it = lengths.find(strip.road_id);
      if (it == lengths.end())
        throw ConfigError("diffusion: road " + std::to_string(strip.road_id) + " is not simulated");
      domain.add_road(strip, it->second);
    }
    (void)refine_emissions(Field::Zero(1), traffic_dx, s.dx);
    psi = Field2D::Zero(domain.nx(), domain.ny());
    dump.quantity = "psi";
    dump.units = "g/km^3";
    dump.a = -s.lx;
    dump.b = s.lx;
    dump.dx = s.dx;
    dump.n_cells = static_cast<std::size_t>(domain.nx() * domain.ny());
    dump.record_every = s.record_every;
    dump.extra = {{"nx", std::to_string(domain.nx())},
                  {"ny", std::to_string(domain.ny())},
                  {"dy", std::to_string(s.dy)},
                  {"layout", "x_fastest"}};
  }

  void step(const std::map<int, Field>& emissions, double traffic_dx, double dt) {
    std::map<int, Field> fine;
    for (const auto& [id, e] : emissions) fine[id] = refine_emissions(e, traffic_dx, spec.dx);
    const Field2D src = build_source(fine, domain, spec.source);
    psi = diffusion_step(psi, src, spec.mu, dt, domain);
    injected += field_integral(src, domain) * dt;
    negative += static_cast<std::size_t>((psi < 0.0).count());
    ++steps;
  }

  void record(double t) { dump.append(t, flatten(psi)); }

  json summary() const {
    const double mass = field_integral(psi, domain);
    return {{"steps", steps},
            {"integral", mass},
            {"injected", injected},
            {"relative_balance_error", std::abs(mass - injected) / std::max(1e-300, std::abs(injected))},
            {"negative_cells", negative},
            {"stable_dt_h", stable_dt(spec.mu, spec.dx, spec.dy)}};
  }
};

void write_totals(const std::string& path, const std::vector<std::string>& header,
                  const std::vector<std::vector<double>>& rows) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  for (std::size_t k = 0; k < header.size(); ++k) out << (k ? "," : "") << header[k];
  out << '\n';
  char buf[40];
  for (const auto& r : rows) {
    for (std::size_t k = 0; k < r.size(); ++k) {
      std::snprintf(buf, sizeof buf, "%.17g", r[k]);
      out << (k ? "," : "") << buf;
    }
    out << '\n';
  }
  if (!out) throw IoError("failed writing " + path);
}

std::string config_hash(const ScenarioConfig& cfg, std::uint64_t seed, std::size_t every) {
  return "fnv1a64:" + fnv1a_hex(cfg.raw.dump() + "|seed=" + std::to_string(seed) +
                                "|record_every=" + std::to_string(every));
}

struct SingleRoad {
  SpatialGrid grid;
  Fleet full;      // every vehicle, used for KDE
  Fleet embedded;  // vehicles seen by the solver
};

SingleRoad single_road_setup(const ScenarioConfig& cfg, std::uint64_t seed, std::vector<std::string>& warnings) {
  SingleRoad s{SpatialGrid::with_spacing(cfg.a, cfg.b, cfg.dx), {}, {}};
  s.full = build_fleet(cfg.trajectories, cfg.base_dir, seed, &warnings);
  if (cfg.trajectories.source == TrajectorySpec::Source::File)
    s.full = fleet_for_road(s.full, cfg.trajectories.road_id);
  s.embedded = select_vehicles(s.full, cfg.trajectories);
  return s;
}

Boundary resolve_left(const ScenarioConfig& cfg, const SpeedLaw& plain_left) {
  if (!cfg.left.from_left_state) return cfg.left.boundary;
  const double rho_l = cfg.initial.kind == InitialSpec::Kind::Riemann ? cfg.initial.rho_left : cfg.initial.rho;
  return Boundary::demand(sending(cfg.a, 0.0, rho_l, Fleet{}, plain_left, cfg.cutoff, EmbeddingMode::None,
                                  cfg.sampling));
}

MacroState2 initial_state2(const ScenarioConfig& cfg, const SingleRoad& road) {
  const auto d = cfg.diagram.cgarz_diagram();
  const auto n = static_cast<Eigen::Index>(road.grid.size());
  MacroState2 st{Field(n), Field(n)};
  const auto& in = cfg.initial;
  switch (in.kind) {
    case InitialSpec::Kind::Constant:
      st.rho.setConstant(in.rho);
      st.w.setConstant(in.w.value_or(d.w_mid()));
      break;
    case InitialSpec::Kind::Riemann:
      for (Eigen::Index j = 0; j < n; ++j) {
        const bool left = road.grid.center(static_cast<std::size_t>(j)) < in.x0;
        st.rho(j) = left ? in.rho_left : in.rho_right;
        st.w(j) = (left ? in.w_left : in.w_right).value_or(in.w.value_or(d.w_mid()));
      }
      break;
    case InitialSpec::Kind::Kde: {
      const FleetSnapshot snap = snapshot(road.full, 0.0);
      if (snap.empty()) throw ConfigError("config: KDE initial state needs vehicles at t=0");
      st.rho = kde_density(snap, in.kde, road.grid).min(d.rho_max);
      const Field nu = kde_velocity(snap, in.kde, road.grid);
      for (Eigen::Index j = 0; j < n; ++j) st.w(j) = invert_speed_in_w(st.rho(j), nu(j), d);
      break;
    }
  }
  for (Eigen::Index j = 0; j < n; ++j)
    if (st.w(j) < d.w_l || st.w(j) > d.w_r) throw ConfigError("config: initial w outside [w_l, w_r]");
  return st;
}

json run_single(const ScenarioConfig& cfg, const std::string& out, std::uint64_t seed, std::size_t every,
                std::vector<std::string>& warnings, Recorder& rec) {
  SingleRoad road = single_road_setup(cfg, seed, warnings);
  const auto& g = road.grid;
  json info;

  if (cfg.model == ModelKind::Lwr) {
    if (cfg.initial.kind == InitialSpec::Kind::Kde && cfg.diagram.cgarz)
      throw ConfigError("config: lwr runs use a Greenshields diagram");
    const SpeedLaw law = cfg.diagram.cgarz ? cgarz_law(cfg.diagram.cgarz_diagram(),
                                                        cfg.initial.w.value_or(cfg.diagram.cgarz_diagram().w_mid()))
                                           : greenshields_law(cfg.diagram.greenshields());
    LwrConfig lc{law, cfg.cutoff, cfg.embedding, cfg.sampling, resolve_left(cfg, law), cfg.right.boundary};
    LwrSolver solver(g, lc);
    const double bound = solver.max_dt(road.embedded);
    const double dt_req = cfg.dt.value_or(bound);
    const TimeGrid tg = TimeGrid::covering(cfg.horizon, dt_req);
    const double dt = cfg.horizon / static_cast<double>(tg.n_steps);

    MacroState1 st{Field(static_cast<Eigen::Index>(g.size()))};
    const MacroState2 init = [&] {
      if (cfg.initial.kind == InitialSpec::Kind::Kde) {
        MacroState2 s;
        s.rho = kde_density(road.full, 0.0, cfg.initial.kde, g).min(law.rho_max);
        return s;
      }
      ScenarioConfig tmp = cfg;
      tmp.diagram.cgarz = true;
      MacroState2 s;
      s.rho = initial_state2(tmp, road).rho;
      return s;
    }();
    st.rho = init.rho;

    auto rho = make_dump("rho", "veh/km", g, dt, every);
    auto speed = make_dump("speed", "km/h", g, dt, every);
    for (std::size_t n = 0; n <= tg.n_steps; ++n) {
      const double t = static_cast<double>(n) * dt;
      const FleetSnapshot snap = snapshot(road.embedded, t);
      if (n % every == 0 || n == tg.n_steps) {
        rho.append(t, st.rho);
        speed.append(t, solver.tabulate(st.rho, snap).speed);
      }
      if (n < tg.n_steps) st = solver.step(st, snap, dt);
    }
    rec.write("rho", rho);
    rec.write("speed", speed);
    info = {{"dt_h", dt}, {"max_dt_h", bound}, {"n_steps", tg.n_steps}};
    return info;
  }

  const auto d = cfg.diagram.cgarz_diagram();
  MacroState2 st = initial_state2(cfg, road);
  const double w_left = cfg.initial.kind == InitialSpec::Kind::Riemann
                            ? cfg.initial.w_left.value_or(cfg.initial.w.value_or(d.w_mid()))
                            : cfg.initial.w.value_or(d.w_mid());
  GsomConfig gc{d, cfg.cutoff, cfg.embedding, cfg.sampling, resolve_left(cfg, cgarz_law(d, w_left)),
                cfg.right.boundary};
  GsomSolver solver(g, gc);
  const double bound = solver.max_dt(road.embedded);
  const TimeGrid tg = TimeGrid::covering(cfg.horizon, cfg.dt.value_or(bound));
  const double dt = cfg.horizon / static_cast<double>(tg.n_steps);

  auto rho = make_dump("rho", "veh/km", g, dt, every);
  auto w = make_dump("w", "veh/h", g, dt, every);
  auto speed = make_dump("speed", "km/h", g, dt, every);
  auto accel = make_dump("accel", "km/h^2", g, dt, every);
  auto emis = make_dump("emission", "g/s", g, dt, every);
  std::vector<std::vector<double>> totals;
  std::size_t clamped = 0;
  std::size_t saturated = 0;
  DiffusionRun* diff = nullptr;
  std::optional<DiffusionRun> diff_store;
  if (cfg.diffusion.enabled) {
    diff_store.emplace(cfg.diffusion, std::map<int, double>{{cfg.trajectories.road_id, cfg.b - cfg.a}}, g.dx());
    diff = &*diff_store;
  }

  for (std::size_t n = 0; n <= tg.n_steps; ++n) {
    const double t = static_cast<double>(n) * dt;
    const FleetSnapshot snap = snapshot(road.embedded, t);
    const CellFluxTable table = solver.tabulate(st, snap);
    const bool record = n % every == 0 || n == tg.n_steps;
    const bool need_emission = cfg.emissions.enabled && (record || diff != nullptr);
    if (record) {
      rho.append(t, st.rho);
      w.append(t, st.w);
      speed.append(t, table.speed);
    }
    if (need_emission) {
      const Field a = acceleration_field(solver, st, snap, table);
      const auto e = emission_field(st.rho, table.speed, a, g.dx(), cfg.emissions.model);
      if (record) {
        accel.append(t, a);
        emis.append(t, e.rate);
        totals.push_back({t, e.rate.sum(), stretch_sum(e.rate, g, cfg.emissions)});
        clamped += e.clamped;
        saturated += e.saturated;
      }
      if (diff != nullptr && n < tg.n_steps) {
        if (diff->steps % diff->spec.record_every == 0) diff->record(t);
        diff->step({{cfg.trajectories.road_id, e.rate}}, g.dx(), dt);
      }
    } else if (record && cfg.emissions.enabled == false) {
      // Acceleration is still useful without emissions.
      accel.append(t, acceleration_field(solver, st, snap, table));
    }
    if (n < tg.n_steps) {
      const double fl = left_face_flux(gc.left, table);
      const double fr = right_face_flux(gc.right, table);
      st = solver.advance(st, snap, table, fl, fr, st.w(0), dt);
    }
  }
  rec.write("rho", rho);
  rec.write("w", w);
  rec.write("speed", speed);
  rec.write("accel", accel);
  if (cfg.emissions.enabled) {
    rec.write("emission", emis);
    write_totals((std::filesystem::path(out) / "totals.csv").string(), {"t_h", "E_total", "E_stretch"}, totals);
    rec.files.emplace_back("totals", "totals.csv");
  }
  info = {{"dt_h", dt},
          {"max_dt_h", bound},
          {"n_steps", tg.n_steps},
          {"accel_clamped_cells", clamped},
          {"exp_saturated_cells", saturated}};
  if (diff != nullptr) {
    diff->record(cfg.horizon);
    rec.write("psi", diff->dump);
    info["diffusion"] = diff->summary();
  }
  return info;
}

Network build_network(const ScenarioConfig& cfg, std::uint64_t seed, std::vector<std::string>& warnings) {
  NetworkParameters p{cfg.diagram.cgarz_diagram(), cfg.dx, cfg.cutoff, cfg.embedding, cfg.sampling};
  const auto& nw = cfg.network;
  Network net = highway_network(p, nw.lengths, nw.alpha[0], nw.alpha[1], nw.alpha[2], nw.beta[0], nw.beta[1],
                                nw.beta[2]);
  net.set_warning_sink([&warnings](const std::string& m) { warnings.push_back(m); });
  if (!nw.sensors_file.empty()) {
    if (!std::filesystem::exists(nw.sensors_file)) throw IoError("sensor file not found: " + nw.sensors_file);
    for (auto& s : load_sensors(nw.sensors_file)) net.set_sensor(std::move(s));
  } else {
    const auto minutes = static_cast<std::size_t>(std::ceil(60.0 * (nw.warm_start + cfg.horizon))) + 1;
    for (const auto& [road, q] : nw.sensor_mean_flux)
      net.set_sensor(synthetic_sensor_series(road, minutes, q, nw.sensor_speed, seed + static_cast<std::uint64_t>(road)));
  }
  const Fleet fleet = build_fleet(cfg.trajectories, cfg.base_dir, seed, &warnings);
  for (auto& r : net.roads()) {
    Fleet f = cfg.trajectories.source == TrajectorySpec::Source::File
                  ? fleet_for_road(fleet, r.id)
                  : (r.id == cfg.trajectories.road_id ? fleet : Fleet{});
    net.set_fleet(r.id, select_vehicles(f, cfg.trajectories));
  }
  return net;
}

json run_network(const ScenarioConfig& cfg, const std::string& out, std::uint64_t seed, std::size_t every,
                 std::vector<std::string>& warnings, Recorder& rec) {
  Network net = build_network(cfg, seed, warnings);
  const double bound = net.max_dt();
  const double t0 = cfg.network.warm_start;
  const TimeGrid tg = TimeGrid::covering(cfg.horizon, cfg.dt.value_or(bound));
  const double dt = cfg.horizon / static_cast<double>(tg.n_steps);
  if (t0 > 0.0) warm_start(net, t0, dt);

  struct RoadDumps {
    FieldDump rho, w, speed, accel, emission;
  };
  std::map<int, RoadDumps> dumps;
  std::map<int, double> lengths;
  for (const auto& r : net.roads()) {
    const auto& g = r.solver.grid();
    dumps[r.id] = {make_dump("rho", "veh/km", g, dt, every), make_dump("w", "veh/h", g, dt, every),
                   make_dump("speed", "km/h", g, dt, every), make_dump("accel", "km/h^2", g, dt, every),
                   make_dump("emission", "g/s", g, dt, every)};
    lengths[r.id] = r.length;
  }
  std::optional<DiffusionRun> diff;
  if (cfg.diffusion.enabled) diff.emplace(cfg.diffusion, lengths, cfg.dx);

  std::vector<std::vector<double>> totals;
  double worst_balance = 0.0;
  std::size_t clamped = 0;
  for (std::size_t n = 0; n <= tg.n_steps; ++n) {
    const double t = t0 + static_cast<double>(n) * dt;
    const bool record = n % every == 0 || n == tg.n_steps;
    if (record || diff) {
      std::map<int, Field> emissions;
      std::vector<double> row{t};
      for (const auto& r : net.roads()) {
        const FleetSnapshot snap = snapshot(r.fleet, t);
        const CellFluxTable table = r.solver.tabulate(r.state, snap);
        const Field a = acceleration_field(r.solver, r.state, snap, table);
        Field e = Field::Zero(r.state.rho.size());
        if (cfg.emissions.enabled) {
          const auto res = emission_field(r.state.rho, table.speed, a, r.solver.grid().dx(), cfg.emissions.model);
          e = res.rate;
          if (record) clamped += res.clamped;
        }
        emissions[r.id] = e;
        row.push_back(e.sum());
        if (record) {
          auto& d = dumps[r.id];
          d.rho.append(t, r.state.rho);
          d.w.append(t, r.state.w);
          d.speed.append(t, table.speed);
          d.accel.append(t, a);
          d.emission.append(t, e);
        }
      }
      if (record) totals.push_back(row);
      if (diff && n < tg.n_steps) {
        if (diff->steps % diff->spec.record_every == 0) diff->record(t);
        diff->step(emissions, cfg.dx, dt);
      }
    }
    if (n < tg.n_steps) worst_balance = std::max(worst_balance, net.step(t, dt).balance_error());
  }

  std::vector<std::string> header{"t_h"};
  for (const auto& r : net.roads()) {
    const std::string s = "_road" + std::to_string(r.id);
    auto& d = dumps[r.id];
    rec.write("rho" + s, d.rho);
    rec.write("w" + s, d.w);
    rec.write("speed" + s, d.speed);
    rec.write("accel" + s, d.accel);
    if (cfg.emissions.enabled) rec.write("emission" + s, d.emission);
    header.push_back("E_road" + std::to_string(r.id));
  }
  if (cfg.emissions.enabled) {
    write_totals((std::filesystem::path(out) / "totals.csv").string(), header, totals);
    rec.files.emplace_back("totals", "totals.csv");
  }
  json info = {{"dt_h", dt},
               {"max_dt_h", bound},
               {"n_steps", tg.n_steps},
               {"warm_start_h", t0},
               {"max_mass_balance_error", worst_balance},
               {"accel_clamped_cells", clamped}};
  if (diff) {
    diff->record(t0 + cfg.horizon);
    rec.write("psi", diff->dump);
    info["diffusion"] = diff->summary();
  }
  return info;
}

}  // namespace

std::vector<std::string> validate_scenario(const ScenarioConfig& cfg) {
  std::vector<std::string> notes;
  std::vector<std::string> warnings;
  if (cfg.model == ModelKind::Network) {
    Network net = build_network(cfg, cfg.seed, warnings);
    const double bound = net.max_dt();
    notes.push_back("network: " + std::to_string(net.roads().size()) + " roads, max_dt " +
                    std::to_string(bound * 3600.0) + " s");
    if (cfg.dt && *cfg.dt > bound * (1.0 + 1e-12))
      throw NumericalError("time.dt exceeds the CFL bound of " + std::to_string(bound * 3600.0) + " s");
    if (cfg.diffusion.enabled) {
      std::map<int, double> lengths;
      for (const auto& r : net.roads()) lengths[r.id] = r.length;
      DiffusionRun probe(cfg.diffusion, lengths, cfg.dx);
      notes.push_back("diffusion grid " + std::to_string(probe.domain.nx()) + " x " + std::to_string(probe.domain.ny()));
    }
  } else {
    SingleRoad road = single_road_setup(cfg, cfg.seed, warnings);
    double bound = 0.0;
    if (cfg.model == ModelKind::Lwr) {
      const SpeedLaw law = cfg.diagram.cgarz ? cgarz_law(cfg.diagram.cgarz_diagram(), cfg.diagram.cgarz_diagram().w_mid())
                                             : greenshields_law(cfg.diagram.greenshields());
      bound = LwrSolver(road.grid, LwrConfig{law, cfg.cutoff, cfg.embedding, cfg.sampling}).max_dt(road.embedded);
    } else {
      (void)initial_state2(cfg, road);
      bound = GsomSolver(road.grid, GsomConfig{cfg.diagram.cgarz_diagram(), cfg.cutoff, cfg.embedding, cfg.sampling})
                  .max_dt(road.embedded);
      if (cfg.diffusion.enabled)
        DiffusionRun probe(cfg.diffusion, {{cfg.trajectories.road_id, cfg.b - cfg.a}}, cfg.dx);
    }
    notes.push_back(std::to_string(road.grid.size()) + " cells, " + std::to_string(road.embedded.size()) +
                    " embedded vehicles, max_dt " + std::to_string(bound * 3600.0) + " s");
    if (cfg.dt && *cfg.dt > bound * (1.0 + 1e-12))
      throw NumericalError("time.dt exceeds the CFL bound of " + std::to_string(bound * 3600.0) + " s");
  }
  for (auto& w : warnings) notes.push_back("warning: " + w);
  return notes;
}

json run_scenario(const ScenarioConfig& cfg, const RunOptions& opts) {
  const auto started = std::chrono::steady_clock::now();
  const std::string out = opts.out_dir.value_or(cfg.output_dir);
  const std::uint64_t seed = opts.seed.value_or(cfg.seed);
  const std::size_t every = opts.record_every.value_or(cfg.record_every);
  if (every == 0) throw ConfigError("record_every must be positive");
  ensure_directory(out);

  std::vector<std::string> warnings;
  Recorder rec{out, {}};
  json info = cfg.model == ModelKind::Network ? run_network(cfg, out, seed, every, warnings, rec)
                                              : run_single(cfg, out, seed, every, warnings, rec);
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();

  json files = json::object();
  for (const auto& [k, f] : rec.files) files[k] = f;
  json manifest = {{"config_hash", config_hash(cfg, seed, every)},
                   {"model", cfg.model == ModelKind::Lwr ? "lwr" : cfg.model == ModelKind::Gsom ? "gsom" : "network"},
                   {"seed", seed},
                   {"record_every", every},
                   {"wall_clock_s", wall},
                   {"files", files},
                   {"warnings", warnings}};
  manifest.update(info);
  std::ofstream mf(std::filesystem::path(out) / "manifest.json");
  if (!mf) throw IoError("cannot write manifest in " + out);
  mf << manifest.dump(2) << '\n';
  if (!opts.quiet)
    for (const auto& w : warnings) std::cerr << "warning: " << w << '\n';
  return manifest;
}

namespace {

std::vector<std::string> dump_suffixes(const ScenarioConfig& cfg) {
  if (cfg.model != ModelKind::Network) return {""};
  std::vector<std::string> out;
  for (const auto& [id, len] : cfg.network.lengths) out.push_back("_road" + std::to_string(id));
  return out;
}

FieldDump read_dump(const std::string& dir, const std::string& name) {
  const auto path = (std::filesystem::path(dir) / (name + ".csv")).string();
  if (!std::filesystem::exists(path)) throw IoError("missing field dump " + path);
  return read_field(path);
}

}  // namespace

json postprocess_emissions(const ScenarioConfig& cfg, const std::string& input_dir, const std::string& out_dir) {
  if (cfg.model == ModelKind::Lwr) throw ConfigError("emissions need an acceleration field, which lwr runs do not produce");
  ensure_directory(out_dir);
  json files = json::object();
  std::size_t clamped = 0;
  for (const auto& s : dump_suffixes(cfg)) {
    const FieldDump rho = read_dump(input_dir, "rho" + s);
    const FieldDump speed = read_dump(input_dir, "speed" + s);
    const FieldDump accel = read_dump(input_dir, "accel" + s);
    if (rho.rows.size() != speed.rows.size() || rho.rows.size() != accel.rows.size())
      throw IoError("field dumps in " + input_dir + " have different row counts");
    FieldDump e = rho;
    e.quantity = "emission";
    e.units = "g/s";
    std::vector<std::vector<double>> totals;
    const SpatialGrid g(rho.a, rho.b, rho.n_cells);
    for (std::size_t k = 0; k < rho.rows.size(); ++k) {
      const auto res = emission_field(rho.rows[k], speed.rows[k], accel.rows[k], rho.dx, cfg.emissions.model);
      e.rows[k] = res.rate;
      clamped += res.clamped;
      totals.push_back({rho.times[k], res.rate.sum(), stretch_sum(res.rate, g, cfg.emissions)});
    }
    write_field((std::filesystem::path(out_dir) / ("emission" + s + ".csv")).string(), e);
    write_totals((std::filesystem::path(out_dir) / ("totals" + s + ".csv")).string(), {"t_h", "E_total", "E_stretch"},
                 totals);
    files["emission" + s] = "emission" + s + ".csv";
    files["totals" + s] = "totals" + s + ".csv";
  }
  json manifest = {{"files", files}, {"accel_clamped_cells", clamped}, {"input", input_dir}};
  std::ofstream mf(std::filesystem::path(out_dir) / "manifest.json");
  if (!mf) throw IoError("cannot write manifest in " + out_dir);
  mf << manifest.dump(2) << '\n';
  return manifest;
}

json run_diffusion(const ScenarioConfig& cfg, const std::string& input_dir, const std::string& out_dir,
                   std::optional<std::size_t> record_every) {
  if (cfg.diffusion.roads.empty()) throw ConfigError("config: 'diffusion.roads' is empty");
  ensure_directory(out_dir);
  std::map<int, FieldDump> dumps;
  for (const auto& strip : cfg.diffusion.roads) {
    const std::string name = cfg.model == ModelKind::Network ? "emission_road" + std::to_string(strip.road_id) : "emission";
    dumps[strip.road_id] = read_dump(input_dir, name);
  }
  const FieldDump& first = dumps.begin()->second;
  std::map<int, double> lengths;
  for (const auto& [id, d] : dumps) {
    if (d.times != first.times) throw IoError("emission dumps are not recorded at the same times");
    lengths[id] = d.b - d.a;
  }
  DiffusionSpec spec = cfg.diffusion;
  if (record_every) spec.record_every = *record_every;
  DiffusionRun run(spec, lengths, first.dx);
  for (std::size_t k = 0; k + 1 < first.times.size(); ++k) {
    std::map<int, Field> e;
    for (const auto& [id, d] : dumps) e[id] = d.rows[k];
    if (run.steps % spec.record_every == 0) run.record(first.times[k]);
    run.step(e, first.dx, first.times[k + 1] - first.times[k]);
  }
  if (!first.times.empty()) run.record(first.times.back());
  write_field((std::filesystem::path(out_dir) / "psi.csv").string(), run.dump);
  json manifest = {{"files", {{"psi", "psi.csv"}}}, {"input", input_dir}, {"diffusion", run.summary()}};
  std::ofstream mf(std::filesystem::path(out_dir) / "manifest.json");
  if (!mf) throw IoError("cannot write manifest in " + out_dir);
  mf << manifest.dump(2) << '\n';
  return manifest;
}

}  // namespace trajflow
