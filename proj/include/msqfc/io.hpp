#pragma once

#include <charconv>
#include <cmath>
#include <cstddef>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include <json.hpp>

#include "msqfc/errors.hpp"
#include "msqfc/field.hpp"
#include "msqfc/metrics.hpp"
#include "msqfc/propagation.hpp"
#include "msqfc/pumpopt.hpp"

namespace msqfc {

using json = nlohmann::ordered_json;

/// Shortest decimal that parses back to the same double.
inline std::string format_double(double v) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

inline std::string format_fixed(double v, int decimals) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::fixed, decimals);
  return std::string(buf, r.ptr);
}

inline double parse_double(std::string_view s) {
  double v = 0.0;
  const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc{} || r.ptr != s.data() + s.size()) {
    throw IoError("cannot parse number '" + std::string(s) + "'");
  }
  return v;
}

// ---------------------------------------------------------------------------
// Field CSV

inline void write_field_csv(std::ostream& os, const Field& f) {
  const Grid3D& g = f.grid();
  if (f.domain() != Domain::direct) throw ShapeError("CSV export needs a direct-space field");
  switch (f.rank()) {
    case Rank::spatial2d:
      os << "x,y,re,im\n";
      for (std::size_t ix = 0; ix < g.nx(); ++ix)
        for (std::size_t iy = 0; iy < g.ny(); ++iy) {
          const cplx v = f.at(ix, iy);
          os << format_double(g.x(ix)) << ',' << format_double(g.y(iy)) << ','
             << format_double(v.real()) << ',' << format_double(v.imag()) << '\n';
        }
      break;
    case Rank::temporal1d:
      os << "t,re,im\n";
      for (std::size_t it = 0; it < g.nt(); ++it)
        os << format_double(g.t(it)) << ',' << format_double(f[it].real()) << ','
           << format_double(f[it].imag()) << '\n';
      break;
    case Rank::spatiotemporal3d:
      throw ShapeError("CSV export takes a spatial slice or a temporal profile, not a 3D field");
  }
}

/// Rows of a numeric CSV file with a header line.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;
};

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  return out;
}

inline CsvTable read_csv(std::istream& is) {
  CsvTable t;
  std::string line;
  if (!std::getline(is, line)) throw IoError("empty CSV input");
  t.header = split_csv_line(line);
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != t.header.size()) throw IoError("CSV row has the wrong number of cells");
    std::vector<double> row;
    for (const auto& c : cells) row.push_back(parse_double(c));
    t.rows.push_back(std::move(row));
  }
  return t;
}

/// Reads a field written by write_field_csv back onto `grid`.
inline Field read_field_csv(std::istream& is, const Grid3D& grid) {
  const CsvTable t = read_csv(is);
  if (t.header == std::vector<std::string>{"x", "y", "re", "im"}) {
    if (t.rows.size() != grid.spatial_size()) throw IoError("CSV size does not match the grid");
    Samples s(t.rows.size());
    for (std::size_t i = 0; i < s.size(); ++i) s[i] = {t.rows[i][2], t.rows[i][3]};
    return Field(grid, Rank::spatial2d, std::move(s));
  }
  if (t.header == std::vector<std::string>{"t", "re", "im"}) {
    if (t.rows.size() != grid.nt()) throw IoError("CSV size does not match the grid");
    Samples s(t.rows.size());
    for (std::size_t i = 0; i < s.size(); ++i) s[i] = {t.rows[i][1], t.rows[i][2]};
    return Field(grid, Rank::temporal1d, std::move(s));
  }
  throw IoError("unrecognized field CSV header");
}

inline void write_flux_csv(std::ostream& os, const PropagationResult& r) {
  os << "z,h,flux_signal,flux_pump,flux_sf\n";
  const auto row = [&](const StepRecord& s) {
    os << format_double(s.z) << ',' << format_double(s.h) << ',' << format_double(s.flux_signal)
       << ',' << format_double(s.flux_pump) << ',' << format_double(s.flux_sf) << '\n';
  };
  row(r.initial);
  for (const auto& s : r.steps) row(s);
}

// ---------------------------------------------------------------------------
// JSON

inline json to_json(const cplx& c) { return json::array({c.real(), c.imag()}); }

inline cplx cplx_from_json(const json& j) {
  if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number()) {
    throw ConfigError("complex value must be a [re, im] pair");
  }
  return {j[0].get<double>(), j[1].get<double>()};
}

inline json to_json(const std::vector<cplx>& v) {
  json a = json::array();
  for (const cplx& c : v) a.push_back(to_json(c));
  return a;
}

inline std::vector<cplx> cplx_vector_from_json(const json& j) {
  if (!j.is_array()) throw ConfigError("coefficient list must be an array");
  std::vector<cplx> v;
  for (const auto& e : j) v.push_back(cplx_from_json(e));
  return v;
}

inline json to_json(const Grid3D& g) {
  return {{"nx", g.nx()}, {"ny", g.ny()}, {"nt", g.nt()},
          {"lx", g.lx()}, {"ly", g.ly()}, {"lt", g.lt()}};
}

inline json to_json(const CrystalParams& c) {
  return {{"chi", c.chi},
          {"poling_period", c.poling_period},
          {"length", c.length},
          {"wavelength_signal", c.wavelength_signal},
          {"wavelength_pump", c.wavelength_pump},
          {"n_signal", c.n_signal},
          {"n_pump", c.n_pump},
          {"n_sf", c.n_sf},
          {"beta1_signal", c.beta1_signal},
          {"beta1_pump", c.beta1_pump},
          {"beta1_sf", c.beta1_sf},
          {"waist_position", c.waist_position}};
}

inline json to_json(const SolverParams& s) {
  return {{"h0", s.h0}, {"tolerance", s.tolerance}, {"h_min", s.h_min},
          {"h_max", s.h_max}, {"max_steps", s.max_steps}};
}

inline json to_json(const LGSpec& s) { return {{"l", s.l}, {"p", s.p}, {"waist", s.waist}}; }

inline json to_json(const HGSpec& s) {
  return {{"m", s.m}, {"n", s.n}, {"waist", s.waist}, {"theta", s.theta}};
}

inline json to_json(const TemporalSpec& s) {
  return {{"tau0", s.tau0}, {"t0", s.t0}, {"order", s.order}};
}

inline json to_json(const ModeSpec& m) {
  json spatial = json::array();
  for (const auto& t : m.spatial) {
    json e{{"coeff", to_json(t.coeff)}};
    if (const auto* lg = std::get_if<LGSpec>(&t.mode)) e["lg"] = to_json(*lg);
    else e["hg"] = to_json(std::get<HGSpec>(t.mode));
    spatial.push_back(std::move(e));
  }
  json temporal = json::array();
  for (const auto& t : m.temporal) {
    json e = to_json(t.mode);
    e["coeff"] = to_json(t.coeff);
    temporal.push_back(std::move(e));
  }
  return {{"label", m.label}, {"spatial", spatial}, {"temporal", temporal}};
}

inline json to_json(const StepRecord& s) {
  return {{"z", s.z}, {"h", s.h}, {"flux_signal", s.flux_signal},
          {"flux_pump", s.flux_pump}, {"flux_sf", s.flux_sf}};
}

/// Relative drift of the Manley-Rowe sums N_s + N_f and N_p + N_f.
struct ManleyRoweDrift {
  double signal = 0.0;
  double pump = 0.0;
};

inline ManleyRoweDrift manley_rowe_drift(const PropagationResult& r) {
  ManleyRoweDrift d;
  const double s0 = r.initial.flux_signal + r.initial.flux_sf;
  const double p0 = r.initial.flux_pump + r.initial.flux_sf;
  for (const auto& s : r.steps) {
    d.signal = std::max(d.signal, std::abs(s.flux_signal + s.flux_sf - s0) / s0);
    d.pump = std::max(d.pump, std::abs(s.flux_pump + s.flux_sf - p0) / p0);
  }
  return d;
}

inline json propagation_summary(const PropagationResult& r) {
  const ManleyRoweDrift d = manley_rowe_drift(r);
  return {{"initial", to_json(r.initial)},
          {"final", to_json(r.steps.empty() ? r.initial : r.steps.back())},
          {"accepted_steps", r.accepted},
          {"rejected_steps", r.rejected},
          {"forced_steps", r.forced},
          {"manley_rowe_drift_signal", d.signal},
          {"manley_rowe_drift_pump", d.pump}};
}

inline json to_json(const SelectivityReport& r) {
  json eta = json::array();
  for (const auto& row : r.eta) eta.push_back(row);
  return {{"target", r.target},
          {"counts", r.counts},
          {"nbar_db", r.nbar_db},
          {"zero_count", r.zero},
          {"eta_db", eta},
          {"min_selectivity_db", r.min_eta},
          {"seed", r.seed},
          {"config_digest", r.config_digest}};
}

inline json to_json(const PumpBasis& b) {
  json spatial = json::array();
  for (const auto& s : b.spatial) spatial.push_back({{"l", s.l}, {"p", s.p}});
  json temporal = json::array();
  for (const auto& t : b.temporal) temporal.push_back(to_json(t));
  return {{"waist", b.waist}, {"spatial", spatial}, {"temporal", temporal}};
}

inline PumpBasis pump_basis_from_json(const json& j) {
  PumpBasis b;
  b.waist = j.at("waist").get<double>();
  for (const auto& s : j.at("spatial")) b.spatial.push_back({s.at("l").get<int>(), s.at("p").get<int>(), b.waist});
  for (const auto& t : j.at("temporal"))
    b.temporal.push_back({t.at("tau0").get<double>(), t.at("t0").get<double>(), t.at("order").get<int>()});
  return b;
}

inline json to_json(const PumpCoefficients& c) {
  return {{"spatial", to_json(c.spatial)}, {"temporal", to_json(c.temporal)}};
}

inline PumpCoefficients pump_coefficients_from_json(const json& j) {
  return {cplx_vector_from_json(j.at("spatial")), cplx_vector_from_json(j.at("temporal"))};
}

inline json to_json(const OptimizationResult& r) {
  json j{{"basis", to_json(r.basis)},
         {"seed", r.seed},
         {"initial_coefficients", to_json(r.initial)},
         {"best_coefficients", to_json(r.best)},
         {"initial_objective_db", r.initial_objective},
         {"best_objective_db", r.best_objective},
         {"accepted_moves", r.accepted_moves},
         {"objective_trace_db", r.trace},
         {"best_trace_db", r.best_trace},
         {"sigma_trace", r.sigma_trace},
         {"report", to_json(r.report)}};
  j["error"] = r.error ? json(*r.error) : json(nullptr);
  return j;
}

inline json to_json(const TomographyMatrix& m) {
  json db = json::array(), counts = json::array(), zero = json::array();
  for (std::size_t r = 0; r < m.db.size(); ++r) {
    db.push_back(m.db[r]);
    counts.push_back(m.counts[r]);
    zero.push_back(m.zero[r]);
  }
  return {{"rows", m.row_labels}, {"columns", m.col_labels},
          {"counts", counts},     {"nbar_db", db},
          {"zero_count", zero}};
}

/// Row label column followed by one column per signal; `decimals` < 0
/// writes full precision.
inline void write_tomography_csv(std::ostream& os, const TomographyMatrix& m, int decimals) {
  os << "pump";
  for (const auto& c : m.col_labels) os << ',' << c;
  os << '\n';
  for (std::size_t r = 0; r < m.row_labels.size(); ++r) {
    os << m.row_labels[r];
    for (double v : m.db[r]) os << ',' << (decimals < 0 ? format_double(v) : format_fixed(v, decimals));
    os << '\n';
  }
}

}  // namespace msqfc
