#include "trajflow/io.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <utility>

namespace trajflow {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& line, char sep = ',') {
  std::vector<std::string> out;
  std::string item;
  std::stringstream ss(line);
  while (std::getline(ss, item, sep)) out.push_back(trim(item));
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

std::string where(const std::string& path, std::size_t line) {
  return path + ":" + std::to_string(line) + ": ";
}

double to_double(const std::string& s, const std::string& path, std::size_t line, const char* what) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw IoError(where(path, line) + "bad " + what + " '" + s + "'");
  }
}

long long to_int(const std::string& s, const std::string& path, std::size_t line, const char* what) {
  try {
    std::size_t used = 0;
    const long long v = std::stoll(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw IoError(where(path, line) + "bad " + what + " '" + s + "'");
  }
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// Seconds are converted in extended precision: t * 3600 needs at most 61
// mantissa bits, so hours survive a write/read cycle bitwise.
std::string seconds_text(double t_hours) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.21Lg", static_cast<long double>(t_hours) * 3600.0L);
  return buf;
}

double hours_from_seconds(const std::string& s, const std::string& path, std::size_t line) {
  try {
    std::size_t used = 0;
    const long double v = std::stold(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return static_cast<double>(v / 3600.0L);
  } catch (const std::exception&) {
    throw IoError(where(path, line) + "bad t_seconds '" + s + "'");
  }
}

std::ifstream open_in(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  return in;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  return out;
}

// Strips comments; returns false for blank lines.
bool content(std::string& line) {
  if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
  line = trim(line);
  return !line.empty();
}

}  // namespace

Fleet load_trajectories(const std::string& path, std::vector<std::string>* warnings) {
  auto in = open_in(path);
  struct Group {
    std::string id;
    int road;
    std::vector<std::pair<std::size_t, TrajectorySample>> rows;  // (line, sample)
  };
  std::vector<Group> groups;
  std::map<std::pair<std::string, int>, std::size_t> index;

  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!content(line)) continue;
    if (line.rfind("vehicle_id", 0) == 0) continue;
    const auto cols = split(line);
    if (cols.size() != 4 && cols.size() != 5)
      throw IoError(where(path, line_no) + "expected 4 or 5 columns, got " + std::to_string(cols.size()));
    if (cols[0].empty()) throw IoError(where(path, line_no) + "empty vehicle id");
    const int road = static_cast<int>(to_int(cols[1], path, line_no, "road_id"));
    TrajectorySample s{hours_from_seconds(cols[2], path, line_no),
                       to_double(cols[3], path, line_no, "x_km"), std::nullopt};
    if (cols.size() == 5 && !cols[4].empty()) {
      s.v = to_double(cols[4], path, line_no, "v_kmh");
      if (*s.v < 0.0) throw IoError(where(path, line_no) + "negative speed");
    }
    const auto key = std::make_pair(cols[0], road);
    auto it = index.find(key);
    if (it == index.end()) {
      it = index.emplace(key, groups.size()).first;
      groups.push_back({cols[0], road, {}});
    }
    groups[it->second].rows.emplace_back(line_no, s);
  }

  Fleet fleet;
  for (auto& g : groups) {
    std::stable_sort(g.rows.begin(), g.rows.end(),
                     [](const auto& l, const auto& r) { return l.second.t < r.second.t; });
    for (std::size_t k = 1; k < g.rows.size(); ++k)
      if (g.rows[k].second.t == g.rows[k - 1].second.t)
        throw IoError(where(path, g.rows[k].first) + "duplicate timestamp for vehicle " + g.id);
    std::vector<TrajectorySample> samples;
    samples.reserve(g.rows.size());
    for (const auto& r : g.rows) samples.push_back(r.second);
    try {
      fleet.emplace_back(g.id, std::move(samples), g.road);
    } catch (const ConfigError& e) {
      if (warnings != nullptr)
        warnings->push_back("vehicle " + g.id + " on road " + std::to_string(g.road) + " rejected: " + e.what());
    }
  }
  return fleet;
}

void write_trajectories(const std::string& path, const Fleet& fleet) {
  auto out = open_out(path);
  out << "vehicle_id,road_id,t_seconds,x_km,v_kmh\n";
  for (const auto& tr : fleet)
    for (const auto& s : tr.samples()) {
      out << tr.vehicle_id() << ',' << tr.road_id() << ',' << seconds_text(s.t) << ','
          << fmt(s.x) << ',';
      if (s.v) out << fmt(*s.v);
      out << '\n';
    }
  if (!out) throw IoError("failed writing " + path);
}

std::vector<SensorSeries> load_sensors(const std::string& path) {
  auto in = open_in(path);
  std::map<int, std::map<long long, SensorSeries::Record>> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!content(line)) continue;
    if (line.rfind("road_id", 0) == 0) continue;
    const auto cols = split(line);
    if (cols.size() != 4) throw IoError(where(path, line_no) + "expected 4 columns");
    const int road = static_cast<int>(to_int(cols[0], path, line_no, "road_id"));
    const long long minute = to_int(cols[1], path, line_no, "minute");
    const double q = to_double(cols[2], path, line_no, "flux");
    const double v = to_double(cols[3], path, line_no, "speed");
    if (q < 0.0 || v < 0.0) throw IoError(where(path, line_no) + "negative flux or speed");
    if (!rows[road].emplace(minute, SensorSeries::Record{q, v}).second)
      throw IoError(where(path, line_no) + "duplicate minute " + std::to_string(minute) + " on road " +
                    std::to_string(road));
  }
  std::vector<SensorSeries> out;
  for (const auto& [road, recs] : rows) {
    const long long first = recs.begin()->first;
    const long long last = recs.rbegin()->first;
    std::string missing;
    for (long long m = first; m <= last; ++m)
      if (!recs.count(m)) missing += (missing.empty() ? "" : " ") + std::to_string(m);
    if (!missing.empty())
      throw IoError(path + ": road " + std::to_string(road) + " is missing minutes " + missing);
    SensorSeries s{road, static_cast<int>(first), {}};
    for (const auto& [m, r] : recs) s.records.push_back(r);
    out.push_back(std::move(s));
  }
  return out;
}

void write_sensors(const std::string& path, const std::vector<SensorSeries>& series) {
  auto out = open_out(path);
  out << "road_id,minute,flux_veh_per_h,speed_kmh\n";
  for (const auto& s : series)
    for (std::size_t k = 0; k < s.records.size(); ++k)
      out << s.road_id << ',' << s.first_minute + static_cast<long long>(k) << ',' << fmt(s.records[k].flux)
          << ',' << fmt(s.records[k].speed) << '\n';
  if (!out) throw IoError("failed writing " + path);
}

void FieldDump::append(double t, const Field& row) {
  if (n_cells == 0) n_cells = static_cast<std::size_t>(row.size());
  if (static_cast<std::size_t>(row.size()) != n_cells)
    throw ConfigError("field dump " + quantity + ": row size changed");
  times.push_back(t);
  rows.push_back(row);
}

void write_field(const std::string& path, const FieldDump& d) {
  auto out = open_out(path);
  out << "# quantity=" << d.quantity << ",units=" << d.units << ",a=" << fmt(d.a) << ",b=" << fmt(d.b)
      << ",dx=" << fmt(d.dx) << ",dt=" << fmt(d.dt) << ",n_cells=" << d.n_cells
      << ",record_every=" << d.record_every;
  for (const auto& [k, v] : d.extra) out << ',' << k << '=' << v;
  out << "\nt_h";
  for (std::size_t j = 0; j < d.n_cells; ++j) out << ",c" << j;
  out << '\n';
  for (std::size_t r = 0; r < d.rows.size(); ++r) {
    out << fmt(d.times[r]);
    for (Eigen::Index j = 0; j < d.rows[r].size(); ++j) out << ',' << fmt(d.rows[r](j));
    out << '\n';
  }
  if (!out) throw IoError("failed writing " + path);
}

FieldDump read_field(const std::string& path) {
  auto in = open_in(path);
  FieldDump d;
  std::string line;
  if (!std::getline(in, line) || line.rfind("# ", 0) != 0) throw IoError(path + ": missing header line");
  for (const auto& kv : split(line.substr(2))) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw IoError(path + ": malformed header entry '" + kv + "'");
    const std::string k = kv.substr(0, eq);
    const std::string v = kv.substr(eq + 1);
    if (k == "quantity") d.quantity = v;
    else if (k == "units") d.units = v;
    else if (k == "a") d.a = to_double(v, path, 1, "a");
    else if (k == "b") d.b = to_double(v, path, 1, "b");
    else if (k == "dx") d.dx = to_double(v, path, 1, "dx");
    else if (k == "dt") d.dt = to_double(v, path, 1, "dt");
    else if (k == "n_cells") d.n_cells = static_cast<std::size_t>(to_int(v, path, 1, "n_cells"));
    else if (k == "record_every") d.record_every = static_cast<std::size_t>(to_int(v, path, 1, "record_every"));
    else d.extra[k] = v;
  }
  if (!std::getline(in, line)) throw IoError(path + ": missing column line");
  std::size_t line_no = 2;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto cols = split(line);
    if (cols.size() != d.n_cells + 1)
      throw IoError(where(path, line_no) + "expected " + std::to_string(d.n_cells + 1) + " columns");
    Field row(static_cast<Eigen::Index>(d.n_cells));
    for (std::size_t j = 0; j < d.n_cells; ++j)
      row(static_cast<Eigen::Index>(j)) = to_double(cols[j + 1], path, line_no, "value");
    d.times.push_back(to_double(cols[0], path, line_no, "time"));
    d.rows.push_back(std::move(row));
  }
  return d;
}

void ensure_directory(const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec || !std::filesystem::is_directory(dir)) throw IoError("cannot create directory " + dir);
}

}  // namespace trajflow
