#include "trajflow/emissions.hpp"

#include <fstream>
#include <sstream>
#include <vector>

namespace trajflow {

double EmissionModel::micro(double v_ms, double a_ms2, bool* saturated) const {
  if (saturated != nullptr) *saturated = false;
  if (formula == EmissionFormula::Max) return emission_max_micro(v_ms, a_ms2, coefficients);
  return emission_exp_micro(v_ms, a_ms2, matrix, saturated);
}

EmissionFieldResult emission_field(const Field& rho, const Field& speed_kmh, const Field& accel_kmh2,
                                   double dx, const EmissionModel& model) {
  const Eigen::Index n = rho.size();
  if (speed_kmh.size() != n || accel_kmh2.size() != n)
    throw ConfigError("emission_field: fields differ in size");
  EmissionFieldResult out{Field::Zero(n)};
  for (Eigen::Index j = 0; j < n; ++j) {
    const double v = units::kmh_to_ms(std::max(0.0, speed_kmh(j)));
    double a = units::kmh2_to_ms2(accel_kmh2(j));
    if (std::abs(a) > model.accel_clamp) {
      a = std::clamp(a, -model.accel_clamp, model.accel_clamp);
      ++out.clamped;
    }
    bool sat = false;
    out.rate(j) = rho(j) * dx * model.micro(v, a, &sat);
    if (sat) ++out.saturated;
  }
  return out;
}

namespace {

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto b = item.find_first_not_of(" \t\r");
    const auto e = item.find_last_not_of(" \t\r");
    out.push_back(b == std::string::npos ? std::string() : item.substr(b, e - b + 1));
  }
  return out;
}

double parse_number(const std::string& s, const std::string& path, int line) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw IoError(path + ":" + std::to_string(line) + ": not a number: '" + s + "'");
  }
}

}  // namespace

EmissionCoefficients<double> load_emission_coefficients(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open coefficient file " + path);
  auto c = EmissionCoefficients<double>::petrol_car_nox();
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const auto cols = split_csv(line);
    if (cols.empty() || (cols.size() == 1 && cols[0].empty())) continue;
    const std::string& key = cols[0];
    auto expect = [&](std::size_t n) {
      if (cols.size() != n + 1)
        throw IoError(path + ":" + std::to_string(line_no) + ": '" + key + "' needs " +
                      std::to_string(n) + " values");
    };
    if (key == "threshold") {
      expect(1);
      c.regime_threshold = parse_number(cols[1], path, line_no);
    } else if (key == "high" || key == "low") {
      expect(6);
      auto& row = key == "high" ? c.high : c.low;
      for (std::size_t k = 0; k < 6; ++k) row[k] = parse_number(cols[k + 1], path, line_no);
    } else if (key == "e0") {
      expect(1);
      c.e0_floor = parse_number(cols[1], path, line_no);
      if (c.e0_floor < 0.0) throw ConfigError("emission coefficients: e0 must be non-negative");
    } else {
      throw IoError(path + ":" + std::to_string(line_no) + ": unknown key '" + key + "'");
    }
  }
  return c;
}

}  // namespace trajflow
