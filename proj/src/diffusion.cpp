#include "trajflow/diffusion.hpp"

#include <cmath>
#include <limits>
#include <string>

namespace trajflow {

namespace {
Eigen::Index cells_along(double extent, double step, const char* what) {
  if (!(step > 0.0)) throw ConfigError(std::string("diffusion: ") + what + " step must be positive");
  const double n = extent / step;
  const double r = std::round(n);
  if (r < 1.0 || std::abs(n - r) > 1e-9 * std::max(1.0, n))
    throw ConfigError(std::string("diffusion: domain ") + what + " extent is not a multiple of the step");
  return static_cast<Eigen::Index>(r);
}
}  // namespace

Domain2D::Domain2D(double lx, double ly, double dx2, double dy2)
    : lx_(lx), ly_(ly), dx_(dx2), dy_(dy2) {
  if (!(lx > 0.0) || !(ly > 0.0)) throw ConfigError("diffusion: half-lengths must be positive");
  nx_ = cells_along(2.0 * lx, dx2, "x");
  ny_ = cells_along(2.0 * ly, dy2, "y");
}

Eigen::Index Domain2D::column_of(double x) const {
  return static_cast<Eigen::Index>(std::floor((x + lx_) / dx_));
}

Eigen::Index Domain2D::row_of(double y) const {
  return static_cast<Eigen::Index>(std::floor((y + ly_) / dy_));
}

Eigen::Index Domain2D::column_of_road_cell(const RoadStrip& strip, Eigen::Index k) const {
  const double x = strip.x_origin + strip.direction * (static_cast<double>(k) + 0.5) * dx_;
  return column_of(x);
}

void Domain2D::add_road(const RoadStrip& strip, double length) {
  if (strip.direction != 1 && strip.direction != -1)
    throw ConfigError("diffusion: road direction must be +1 or -1");
  const Eigen::Index row = row_of(strip.y);
  if (row < 0 || row >= ny_)
    throw ConfigError("diffusion: road " + std::to_string(strip.road_id) + " lies outside the domain in y");
  const Eigen::Index n = cells_along(length, dx_, "road length");
  const Eigen::Index first = column_of_road_cell(strip, 0);
  const Eigen::Index last = column_of_road_cell(strip, n - 1);
  if (std::min(first, last) < 0 || std::max(first, last) >= nx_)
    throw ConfigError("diffusion: road " + std::to_string(strip.road_id) + " lies outside the domain in x");
  for (const auto& s : strips_)
    if (s.road_id == strip.road_id)
      throw ConfigError("diffusion: road " + std::to_string(strip.road_id) + " registered twice");
  strips_.push_back(strip);
}

Field refine_emissions(const Field& traffic, double traffic_dx, double fine_dx) {
  if (!(fine_dx > 0.0) || !(traffic_dx > 0.0)) throw ConfigError("refine: steps must be positive");
  const double ratio = traffic_dx / fine_dx;
  const double r = std::round(ratio);
  if (r < 1.0 || std::abs(ratio - r) > 1e-9 * ratio)
    throw ConfigError("refine: traffic dx is not a multiple of the fine dx");
  const auto k = static_cast<Eigen::Index>(r);
  Field fine(traffic.size() * k);
  for (Eigen::Index j = 0; j < traffic.size(); ++j) fine.segment(j * k, k).setConstant(traffic(j));
  return fine;
}

Field2D build_source(const std::map<int, Field>& fine_emissions, const Domain2D& domain,
                     const SourceConfig& cfg) {
  double volume = 0.0;
  if (cfg.scaling == SourceScaling::CubicCell) {
    volume = domain.dx() * domain.dx() * domain.dx();
  } else {
    if (!(cfg.mixing_height > 0.0)) throw ConfigError("diffusion: mixing height must be positive");
    volume = domain.cell_area() * cfg.mixing_height;
  }
  Field2D s = Field2D::Zero(domain.nx(), domain.ny());
  for (const auto& strip : domain.roads()) {
    auto it = fine_emissions.find(strip.road_id);
    if (it == fine_emissions.end()) continue;
    const Eigen::Index row = domain.row_of(strip.y);
    const Field& e = it->second;
    for (Eigen::Index k = 0; k < e.size(); ++k) {
      const Eigen::Index col = domain.column_of_road_cell(strip, k);
      if (col < 0 || col >= domain.nx())
        throw ConfigError("diffusion: emissions of road " + std::to_string(strip.road_id) +
                          " extend past the domain");
      s(col, row) += e(k) / volume;
    }
  }
  return s;
}

double stable_dt(double mu, double dx, double dy) {
  if (mu < 0.0) throw ConfigError("diffusion: mu must be non-negative");
  if (mu == 0.0) return std::numeric_limits<double>::infinity();
  return 1.0 / (2.0 * mu * (1.0 / (dx * dx) + 1.0 / (dy * dy)));
}

Field2D diffusion_step(const Field2D& psi, const Field2D& source, double mu, double dt,
                       const Domain2D& domain) {
  const Eigen::Index nx = domain.nx();
  const Eigen::Index ny = domain.ny();
  if (psi.rows() != nx || psi.cols() != ny || source.rows() != nx || source.cols() != ny)
    throw ConfigError("diffusion: field shape does not match the domain");
  const double bound = stable_dt(mu, domain.dx(), domain.dy());
  if (!(dt > 0.0) || dt > bound * (1.0 + 1e-12))
    throw NumericalError("diffusion: dt=" + std::to_string(dt) + " h exceeds the stable bound " +
                         std::to_string(bound) + " h");

  Field2D next = psi + dt * source;
  if (mu == 0.0) return next;

  // Face fluxes; wall faces carry nothing, so the sum of updates telescopes.
  const double cx = mu * dt / (domain.dx() * domain.dx());
  const double cy = mu * dt / (domain.dy() * domain.dy());
  if (nx > 1) {
    const Field2D fx = cx * (psi.bottomRows(nx - 1) - psi.topRows(nx - 1));
    next.topRows(nx - 1) += fx;
    next.bottomRows(nx - 1) -= fx;
  }
  if (ny > 1) {
    const Field2D fy = cy * (psi.rightCols(ny - 1) - psi.leftCols(ny - 1));
    next.leftCols(ny - 1) += fy;
    next.rightCols(ny - 1) -= fy;
  }
  return next;
}

double field_integral(const Field2D& f, const Domain2D& domain) { return f.sum() * domain.cell_area(); }

}  // namespace trajflow
