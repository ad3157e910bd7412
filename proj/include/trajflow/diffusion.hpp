#pragma once

#include <Eigen/Dense>

#include <map>
#include <vector>

#include "trajflow/grid.hpp"

namespace trajflow {

/// Dense 2D field; row i is the x index, column k the y index.
using Field2D = Eigen::ArrayXXd;

/// Placement of a straight horizontal road in the diffusion rectangle.
struct RoadStrip {
  int road_id;
  double x_origin;   // km, domain x of the road's start
  int direction;     // +1 if the road runs towards +x, -1 towards -x
  double y;          // km, domain y of the strip
};

/// Rectangle [-lx, lx] x [-ly, ly] split into cells of size dx2 x dy2.
class Domain2D {
public:
  Domain2D(double lx, double ly, double dx2, double dy2);

  double lx() const { return lx_; }
  double ly() const { return ly_; }
  double dx() const { return dx_; }
  double dy() const { return dy_; }
  Eigen::Index nx() const { return nx_; }
  Eigen::Index ny() const { return ny_; }
  double cell_area() const { return dx_ * dy_; }

  Eigen::Index column_of(double x) const;  // x index containing x
  Eigen::Index row_of(double y) const;     // y index containing y

  /// Registers a road of the given length; every fine cell must fall inside.
  void add_road(const RoadStrip& strip, double length);
  const std::vector<RoadStrip>& roads() const { return strips_; }

  /// x index of fine cell k of a registered road.
  Eigen::Index column_of_road_cell(const RoadStrip& strip, Eigen::Index k) const;

private:
  double lx_, ly_, dx_, dy_;
  Eigen::Index nx_, ny_;
  std::vector<RoadStrip> strips_;
};

/// Copies every traffic cell value onto the traffic_dx / fine_dx fine cells it covers.
Field refine_emissions(const Field& traffic, double traffic_dx, double fine_dx);

enum class SourceScaling {
  CubicCell,     // S = E / dx^3
  MixingHeight,  // S = E / (dx dy H)
};

struct SourceConfig {
  SourceScaling scaling = SourceScaling::CubicCell;
  double mixing_height = 0.0;  // km, MixingHeight only
};

/// Source field from refined per-road emission rows (g/s per fine cell).
Field2D build_source(const std::map<int, Field>& fine_emissions, const Domain2D& domain,
                     const SourceConfig& cfg = {});

/// Largest stable explicit step; infinite when mu = 0.
double stable_dt(double mu, double dx, double dy);

/// One explicit step of psi_t = mu (psi_xx + psi_yy) + S with zero-flux walls.
/// Throws NumericalError when dt exceeds stable_dt.
Field2D diffusion_step(const Field2D& psi, const Field2D& source, double mu, double dt,
                       const Domain2D& domain);

/// Integral of a field over the domain.
double field_integral(const Field2D& f, const Domain2D& domain);

}  // namespace trajflow
