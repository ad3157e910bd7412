#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "trajflow/io.hpp"
#include "trajflow/scenario.hpp"

namespace {

enum Exit { kOk = 0, kConfig = 2, kNumerical = 3, kIo = 4 };

struct Common {
  std::string config;
  std::optional<std::string> out;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> record_every;
};

void add_common(CLI::App* cmd, Common& c, bool need_config) {
  auto* opt = cmd->add_option("--config", c.config, "scenario config (JSON)");
  if (need_config) opt->required()->check(CLI::ExistingFile);
  cmd->add_option("--out", c.out, "output directory");
  cmd->add_option("--seed", c.seed, "random seed");
  cmd->add_option("--record-every", c.record_every, "record every k-th step")->check(CLI::PositiveNumber);
}

trajflow::RunOptions options(const Common& c) {
  trajflow::RunOptions o;
  o.out_dir = c.out;
  o.seed = c.seed;
  o.record_every = c.record_every;
  o.quiet = false;
  return o;
}

int simulate(const Common& c) {
  const auto cfg = trajflow::load_config(c.config);
  const auto manifest = trajflow::run_scenario(cfg, options(c));
  std::cout << "wrote " << manifest["files"].size() << " files to " << c.out.value_or(cfg.output_dir)
            << " (" << manifest["n_steps"] << " steps, dt=" << manifest["dt_h"].get<double>() * 3600.0 << " s)\n";
  return kOk;
}

int generate(const Common& c, const std::string& kind) {
  trajflow::ScenarioConfig cfg;
  if (!c.config.empty()) cfg = trajflow::load_config(c.config);
  auto spec = cfg.trajectories;
  if (kind == "synthetic") spec.source = trajflow::TrajectorySpec::Source::Synthetic;
  else if (kind == "ftl") spec.source = trajflow::TrajectorySpec::Source::Ftl;
  if (spec.source != trajflow::TrajectorySpec::Source::Synthetic &&
      spec.source != trajflow::TrajectorySpec::Source::Ftl)
    throw trajflow::ConfigError("generate-trajectories: choose --kind synthetic|ftl or a generating trajectory block");
  const auto fleet = trajflow::build_fleet(spec, cfg.base_dir, c.seed.value_or(cfg.seed));
  const std::string dir = c.out.value_or(cfg.output_dir);
  trajflow::ensure_directory(dir);
  const auto path = (std::filesystem::path(dir) / "trajectories.csv").string();
  trajflow::write_trajectories(path, fleet);
  std::cout << "wrote " << fleet.size() << " trajectories to " << path << '\n';
  return kOk;
}

int emissions(const Common& c, const std::string& input) {
  const auto cfg = trajflow::load_config(c.config);
  const std::string in = input.empty() ? cfg.output_dir : input;
  const auto m = trajflow::postprocess_emissions(cfg, in, c.out.value_or(in));
  std::cout << "wrote " << m["files"].size() << " files\n";
  return kOk;
}

int diffuse(const Common& c, const std::string& input) {
  const auto cfg = trajflow::load_config(c.config);
  const std::string in = input.empty() ? cfg.output_dir : input;
  const auto m = trajflow::run_diffusion(cfg, in, c.out.value_or(in), c.record_every);
  std::cout << "diffusion: " << m["diffusion"]["steps"] << " steps, integral "
            << m["diffusion"]["integral"].get<double>() << '\n';
  return kOk;
}

int validate(const Common& c) {
  const auto cfg = trajflow::load_config(c.config);
  for (const auto& line : trajflow::validate_scenario(cfg)) std::cout << line << '\n';
  std::cout << "ok\n";
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Trajectory-embedded macroscopic traffic, emissions and diffusion"};
  app.require_subcommand(1);

  Common sim, gen, emi, dif, val;
  std::string gen_kind, emi_input, dif_input;
  auto* c_sim = app.add_subcommand("simulate", "run a scenario");
  add_common(c_sim, sim, true);
  auto* c_gen = app.add_subcommand("generate-trajectories", "write a synthetic or FTL fleet");
  add_common(c_gen, gen, false);
  c_gen->add_option("--kind", gen_kind, "synthetic or ftl")->check(CLI::IsMember({"synthetic", "ftl"}));
  auto* c_emi = app.add_subcommand("emissions", "emission fields from dumped rho/speed/accel");
  add_common(c_emi, emi, true);
  c_emi->add_option("--input", emi_input, "directory with dumps (default: config output dir)");
  auto* c_dif = app.add_subcommand("diffuse", "diffuse dumped emissions");
  add_common(c_dif, dif, true);
  c_dif->add_option("--input", dif_input, "directory with emission dumps (default: config output dir)");
  auto* c_val = app.add_subcommand("validate", "check a config and its files");
  add_common(c_val, val, true);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kConfig;
  }

  try {
    if (c_sim->parsed()) return simulate(sim);
    if (c_gen->parsed()) return generate(gen, gen_kind);
    if (c_emi->parsed()) return emissions(emi, emi_input);
    if (c_dif->parsed()) return diffuse(dif, dif_input);
    if (c_val->parsed()) return validate(val);
  } catch (const trajflow::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfig;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfig;
  } catch (const trajflow::NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << '\n';
    return kNumerical;
  } catch (const trajflow::DomainError& e) {
    std::cerr << "numerical error: " << e.what() << '\n';
    return kNumerical;
  } catch (const trajflow::IoError& e) {
    std::cerr << "i/o error: " << e.what() << '\n';
    return kIo;
  }
  return kOk;
}
