#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numbers>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "msqfc/crystal.hpp"
#include "msqfc/errors.hpp"
#include "msqfc/grid.hpp"
#include "msqfc/metrics.hpp"
#include "msqfc/modes.hpp"
#include "msqfc/propagation.hpp"
#include "msqfc/pumpopt.hpp"

namespace msqfc {

enum class ScenarioKind { simulate, optimize, tomography, rotate };

inline const char* to_string(ScenarioKind k) {
  switch (k) {
    case ScenarioKind::simulate: return "simulate";
    case ScenarioKind::optimize: return "optimize";
    case ScenarioKind::tomography: return "tomography";
    case ScenarioKind::rotate: return "rotate";
  }
  return "?";
}

struct SimulateBlock {
  ModeSpec signal;
  ModeSpec pump;
  std::size_t oracle_nz = 0;  // 0 skips the perturbative comparison
};

struct OptimizeBlock {
  std::size_t target = 0;
  std::vector<ModeSpec> signals;
  PumpBasis basis;
  OptParams params;
};

struct TomographyBlock {
  std::vector<ModeSpec> signals;
  std::vector<ModeSpec> pumps;
};

struct RotateBlock {
  HGSpec signal;
  HGSpec pump;
  TemporalSpec temporal;
  std::vector<double> signal_angles_deg;
  std::vector<double> pump_angles_deg;
};

struct ScenarioConfig {
  ScenarioKind kind = ScenarioKind::simulate;
  std::optional<std::uint64_t> seed;
  bool strict = false;
  std::string output = "out";
  Grid3D grid;
  CrystalParams crystal;
  SolverParams solver;
  Detector detector{Detector::Kind::single_mode, 30.4e-6};
  double signal_scale = 1e-9;
  double pump_peak_amplitude = 1e5;
  std::optional<SimulateBlock> simulate;
  std::optional<OptimizeBlock> optimize;
  std::optional<TomographyBlock> tomography;
  std::optional<RotateBlock> rotate;
};

/// Parses JSON that may contain // and /* */ comments.
inline nlohmann::json parse_config_text(const std::string& text) {
  try {
    return nlohmann::json::parse(text, nullptr, true, true);
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError({std::string("syntax: ") + e.what()});
  }
}

namespace detail {

/// Walks a JSON object and records every problem instead of stopping at the
/// first one. Unknown keys are errors.
class Reader {
 public:
  explicit Reader(std::vector<std::string>& failures) : failures_(failures) {}

  void fail(const std::string& path, const std::string& what) { failures_.push_back(path + ": " + what); }

  bool object(const nlohmann::json& j, const std::string& path, std::set<std::string> allowed) {
    if (!j.is_object()) {
      fail(path, "must be an object");
      return false;
    }
    for (const auto& [key, value] : j.items())
      if (!allowed.contains(key)) fail(join(path, key), "unknown key");
    return true;
  }

  const nlohmann::json* find(const nlohmann::json& j, const std::string& key) {
    if (!j.is_object()) return nullptr;
    const auto it = j.find(key);
    return it == j.end() ? nullptr : &*it;
  }

  const nlohmann::json* require(const nlohmann::json& j, const std::string& path, const std::string& key) {
    const auto* v = find(j, key);
    if (!v) fail(join(path, key), "missing");
    return v;
  }

  std::optional<double> number(const nlohmann::json& j, const std::string& path, const std::string& key,
                               bool required, std::function<bool(double)> ok = {},
                               const char* rule = "out of range") {
    const auto* v = required ? require(j, path, key) : find(j, key);
    if (!v) return std::nullopt;
    if (!v->is_number()) {
      fail(join(path, key), "must be a number");
      return std::nullopt;
    }
    const double d = v->get<double>();
    if (!std::isfinite(d) || (ok && !ok(d))) {
      fail(join(path, key), rule);
      return std::nullopt;
    }
    return d;
  }

  std::optional<long long> integer(const nlohmann::json& j, const std::string& path, const std::string& key,
                                   bool required, long long lo, long long hi) {
    const auto* v = required ? require(j, path, key) : find(j, key);
    if (!v) return std::nullopt;
    if (!v->is_number_integer()) {
      fail(join(path, key), "must be an integer");
      return std::nullopt;
    }
    const long long x = v->get<long long>();
    if (x < lo || x > hi) {
      fail(join(path, key), "must be in [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
      return std::nullopt;
    }
    return x;
  }

  std::optional<std::string> string(const nlohmann::json& j, const std::string& path, const std::string& key,
                                    bool required, const std::set<std::string>& choices = {}) {
    const auto* v = required ? require(j, path, key) : find(j, key);
    if (!v) return std::nullopt;
    if (!v->is_string()) {
      fail(join(path, key), "must be a string");
      return std::nullopt;
    }
    std::string s = v->get<std::string>();
    if (!choices.empty() && !choices.contains(s)) {
      std::string list;
      for (const auto& c : choices) list += (list.empty() ? "" : ", ") + c;
      fail(join(path, key), "must be one of " + list);
      return std::nullopt;
    }
    return s;
  }

  std::optional<bool> boolean(const nlohmann::json& j, const std::string& path, const std::string& key) {
    const auto* v = find(j, key);
    if (!v) return std::nullopt;
    if (!v->is_boolean()) {
      fail(join(path, key), "must be true or false");
      return std::nullopt;
    }
    return v->get<bool>();
  }

  std::optional<cplx> complex(const nlohmann::json& j, const std::string& path) {
    if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number()) {
      fail(path, "must be a [re, im] pair");
      return std::nullopt;
    }
    return cplx{j[0].get<double>(), j[1].get<double>()};
  }

  static std::string join(const std::string& path, const std::string& key) {
    return path.empty() ? key : path + "." + key;
  }
  static std::string index(const std::string& path, std::size_t i) {
    return path + "[" + std::to_string(i) + "]";
  }

 private:
  std::vector<std::string>& failures_;
};

inline bool positive(double v) { return v > 0.0; }
inline bool nonnegative(double v) { return v >= 0.0; }

inline std::optional<Grid3D> read_grid(Reader& r, const nlohmann::json& j, const std::string& path) {
  if (!r.object(j, path, {"nx", "ny", "nt", "lx", "ly", "lt"})) return std::nullopt;
  const auto pow2 = [&](const char* key) -> std::optional<std::size_t> {
    const auto n = r.integer(j, path, key, true, 8, 4096);
    if (n && !is_power_of_two(static_cast<std::size_t>(*n))) {
      r.fail(Reader::join(path, key), "must be a power of two");
      return std::nullopt;
    }
    return n ? std::optional<std::size_t>(static_cast<std::size_t>(*n)) : std::nullopt;
  };
  const auto nx = pow2("nx"), ny = pow2("ny"), nt = pow2("nt");
  const auto lx = r.number(j, path, "lx", true, positive, "must be positive");
  const auto ly = r.number(j, path, "ly", true, positive, "must be positive");
  const auto lt = r.number(j, path, "lt", true, positive, "must be positive");
  if (!nx || !ny || !nt || !lx || !ly || !lt) return std::nullopt;
  return make_grid(*nx, *ny, *nt, *lx, *ly, *lt);
}

inline std::optional<CrystalParams> read_crystal(Reader& r, const nlohmann::json& j, const std::string& path) {
  if (!r.object(j, path,
                {"preset", "chi", "poling_period", "length", "wavelength_signal", "wavelength_pump",
                 "n_signal", "n_pump", "n_sf", "beta1_signal", "beta1_pump", "beta1_sf",
                 "waist_position"})) {
    return std::nullopt;
  }
  const auto preset = r.string(j, path, "preset", false, {"ppln"});
  CrystalParams c = CrystalParams::ppln_defaults();
  const bool required = !preset.has_value();
  bool ok = true;
  const auto set = [&](const char* key, double& field, std::function<bool(double)> rule, const char* msg) {
    const auto* v = r.find(j, key);
    if (!v && !required) return;
    const auto d = r.number(j, path, key, true, rule, msg);
    if (d) field = *d;
    else ok = false;
  };
  set("chi", c.chi, positive, "must be positive");
  set("poling_period", c.poling_period, positive, "must be positive");
  set("length", c.length, positive, "must be positive");
  set("wavelength_signal", c.wavelength_signal, positive, "must be positive");
  set("wavelength_pump", c.wavelength_pump, positive, "must be positive");
  set("n_signal", c.n_signal, positive, "must be positive");
  set("n_pump", c.n_pump, positive, "must be positive");
  set("n_sf", c.n_sf, positive, "must be positive");
  set("beta1_signal", c.beta1_signal, positive, "must be positive");
  set("beta1_pump", c.beta1_pump, positive, "must be positive");
  set("beta1_sf", c.beta1_sf, positive, "must be positive");
  set("waist_position", c.waist_position, nonnegative, "must be nonnegative");
  if (!ok) return std::nullopt;
  if (c.waist_position > c.length) {
    r.fail(Reader::join(path, "waist_position"), "must not exceed the crystal length");
    return std::nullopt;
  }
  return c;
}

inline std::optional<SolverParams> read_solver(Reader& r, const nlohmann::json& j, const std::string& path) {
  SolverParams s;
  if (!r.object(j, path, {"h0", "tolerance", "h_min", "h_max", "max_steps"})) return std::nullopt;
  if (auto v = r.number(j, path, "h0", false, positive, "must be positive")) s.h0 = *v;
  if (auto v = r.number(j, path, "tolerance", false, positive, "must be positive")) s.tolerance = *v;
  if (auto v = r.number(j, path, "h_min", false, positive, "must be positive")) s.h_min = *v;
  if (auto v = r.number(j, path, "h_max", false, positive, "must be positive")) s.h_max = *v;
  if (auto v = r.integer(j, path, "max_steps", false, 1, 100000000)) s.max_steps = static_cast<std::size_t>(*v);
  return s;
}

inline std::optional<TemporalSpec> read_temporal(Reader& r, const nlohmann::json& j, const std::string& path,
                                                 std::set<std::string> extra = {}) {
  extra.insert({"tau0", "t0", "order"});
  if (!r.object(j, path, extra)) return std::nullopt;
  const auto tau0 = r.number(j, path, "tau0", true, positive, "must be positive");
  const auto t0 = r.number(j, path, "t0", false);
  const auto order = r.integer(j, path, "order", false, 0, 20);
  if (!tau0) return std::nullopt;
  return TemporalSpec{*tau0, t0.value_or(0.0), static_cast<int>(order.value_or(0))};
}

inline std::optional<LGSpec> read_lg(Reader& r, const nlohmann::json& j, const std::string& path,
                                     bool need_waist = true) {
  if (!r.object(j, path, {"l", "p", "waist"})) return std::nullopt;
  const auto l = r.integer(j, path, "l", true, -20, 20);
  const auto p = r.integer(j, path, "p", false, 0, 20);
  const auto w = r.number(j, path, "waist", need_waist, positive, "must be positive");
  if (!l || (need_waist && !w)) return std::nullopt;
  return LGSpec{static_cast<int>(*l), static_cast<int>(p.value_or(0)), w.value_or(0.0)};
}

inline std::optional<HGSpec> read_hg(Reader& r, const nlohmann::json& j, const std::string& path) {
  if (!r.object(j, path, {"m", "n", "waist", "theta_deg"})) return std::nullopt;
  const auto m = r.integer(j, path, "m", true, 0, 20);
  const auto n = r.integer(j, path, "n", true, 0, 20);
  const auto w = r.number(j, path, "waist", true, positive, "must be positive");
  const auto th = r.number(j, path, "theta_deg", false);
  if (!m || !n || !w) return std::nullopt;
  return HGSpec{static_cast<int>(*m), static_cast<int>(*n), *w, th.value_or(0.0) * std::numbers::pi / 180.0};
}

inline std::optional<ModeSpec> read_mode(Reader& r, const nlohmann::json& j, const std::string& path) {
  if (!r.object(j, path, {"label", "spatial", "temporal"})) return std::nullopt;
  ModeSpec m;
  bool ok = true;
  m.label = r.string(j, path, "label", false).value_or("");
  const auto* spatial = r.require(j, path, "spatial");
  const auto* temporal = r.require(j, path, "temporal");
  if (!spatial || !temporal) return std::nullopt;
  const auto terms = [&](const nlohmann::json& list, const std::string& p, auto&& each) {
    if (!list.is_array() || list.empty()) {
      r.fail(p, "must be a nonempty array");
      ok = false;
      return;
    }
    for (std::size_t i = 0; i < list.size(); ++i) each(list[i], Reader::index(p, i));
  };
  terms(*spatial, Reader::join(path, "spatial"), [&](const nlohmann::json& t, const std::string& p) {
    if (!r.object(t, p, {"coeff", "lg", "hg"})) {
      ok = false;
      return;
    }
    SpatialTerm term;
    if (const auto* c = r.find(t, "coeff")) {
      if (auto v = r.complex(*c, Reader::join(p, "coeff"))) term.coeff = *v;
      else ok = false;
    }
    const auto* lg = r.find(t, "lg");
    const auto* hg = r.find(t, "hg");
    if ((lg != nullptr) == (hg != nullptr)) {
      r.fail(p, "needs exactly one of lg or hg");
      ok = false;
      return;
    }
    if (lg) {
      if (auto s = read_lg(r, *lg, Reader::join(p, "lg"))) term.mode = *s;
      else ok = false;
    } else {
      if (auto s = read_hg(r, *hg, Reader::join(p, "hg"))) term.mode = *s;
      else ok = false;
    }
    m.spatial.push_back(term);
  });
  terms(*temporal, Reader::join(path, "temporal"), [&](const nlohmann::json& t, const std::string& p) {
    TemporalTerm term;
    const auto spec = read_temporal(r, t, p, {"coeff"});
    if (!spec) {
      ok = false;
      return;
    }
    term.mode = *spec;
    if (const auto* c = r.find(t, "coeff")) {
      if (auto v = r.complex(*c, Reader::join(p, "coeff"))) term.coeff = *v;
      else ok = false;
    }
    m.temporal.push_back(term);
  });
  if (!ok) return std::nullopt;
  const auto nonzero = [](const auto& list) {
    for (const auto& t : list)
      if (t.coeff != cplx{}) return true;
    return false;
  };
  if (!nonzero(m.spatial)) r.fail(Reader::join(path, "spatial"), "all coefficients are zero");
  if (!nonzero(m.temporal)) r.fail(Reader::join(path, "temporal"), "all coefficients are zero");
  return m;
}

inline std::optional<std::vector<ModeSpec>> read_modes(Reader& r, const nlohmann::json& j,
                                                       const std::string& path) {
  if (!j.is_array() || j.empty()) {
    r.fail(path, "must be a nonempty array");
    return std::nullopt;
  }
  std::vector<ModeSpec> out;
  bool ok = true;
  for (std::size_t i = 0; i < j.size(); ++i) {
    auto m = read_mode(r, j[i], Reader::index(path, i));
    if (!m) {
      ok = false;
      continue;
    }
    if (m->label.empty()) m->label = std::to_string(i);
    out.push_back(std::move(*m));
  }
  if (!ok) return std::nullopt;
  return out;
}

inline std::optional<std::vector<double>> read_angles(Reader& r, const nlohmann::json& j,
                                                      const std::string& path) {
  if (j.is_array()) {
    std::vector<double> out;
    for (std::size_t i = 0; i < j.size(); ++i) {
      if (!j[i].is_number()) {
        r.fail(Reader::index(path, i), "must be a number");
        return std::nullopt;
      }
      out.push_back(j[i].get<double>());
    }
    if (out.empty()) r.fail(path, "must not be empty");
    return out;
  }
  if (!r.object(j, path, {"start", "stop", "count"})) return std::nullopt;
  const auto a = r.number(j, path, "start", true);
  const auto b = r.number(j, path, "stop", true);
  const auto n = r.integer(j, path, "count", true, 1, 10000);
  if (!a || !b || !n) return std::nullopt;
  std::vector<double> out;
  for (long long i = 0; i < *n; ++i)
    out.push_back(*n == 1 ? *a : *a + (*b - *a) * static_cast<double>(i) / static_cast<double>(*n - 1));
  return out;
}

inline std::optional<PumpBasis> read_pump_basis(Reader& r, const nlohmann::json& j, const std::string& path) {
  if (!r.object(j, path, {"waist", "spatial", "temporal"})) return std::nullopt;
  PumpBasis b;
  const auto w = r.number(j, path, "waist", true, positive, "must be positive");
  const auto* spatial = r.require(j, path, "spatial");
  const auto* temporal = r.require(j, path, "temporal");
  if (!w || !spatial || !temporal) return std::nullopt;
  b.waist = *w;
  bool ok = true;
  const std::string sp = Reader::join(path, "spatial");
  if (spatial->is_object()) {
    // {"l_max": L, "p_max": P} expands to every (l, p) in the box.
    if (r.object(*spatial, sp, {"l_max", "p_max"})) {
      const auto lm = r.integer(*spatial, sp, "l_max", true, 0, 20);
      const auto pm = r.integer(*spatial, sp, "p_max", true, 0, 20);
      if (lm && pm) b.spatial = lg_basis(static_cast<int>(*lm), static_cast<int>(*pm), b.waist);
      else ok = false;
    } else {
      ok = false;
    }
  } else if (spatial->is_array() && !spatial->empty()) {
    for (std::size_t i = 0; i < spatial->size(); ++i) {
      auto s = read_lg(r, (*spatial)[i], Reader::index(sp, i), false);
      if (!s) {
        ok = false;
        continue;
      }
      s->waist = b.waist;
      b.spatial.push_back(*s);
    }
  } else {
    r.fail(sp, "must be a nonempty array or an {l_max, p_max} box");
    ok = false;
  }
  const std::string tp = Reader::join(path, "temporal");
  if (temporal->is_object()) {
    // {"tau0", "t0", "orders": K} expands to Hermite-Gauss orders 0..K-1.
    if (r.object(*temporal, tp, {"tau0", "t0", "orders"})) {
      const auto tau0 = r.number(*temporal, tp, "tau0", true, positive, "must be positive");
      const auto t0 = r.number(*temporal, tp, "t0", false);
      const auto k = r.integer(*temporal, tp, "orders", true, 1, 20);
      if (tau0 && k) b.temporal = hermite_temporal_basis({*tau0, t0.value_or(0.0), 0}, static_cast<int>(*k));
      else ok = false;
    } else {
      ok = false;
    }
  } else if (temporal->is_array() && !temporal->empty()) {
    for (std::size_t i = 0; i < temporal->size(); ++i) {
      if (auto t = read_temporal(r, (*temporal)[i], Reader::index(tp, i))) b.temporal.push_back(*t);
      else ok = false;
    }
  } else {
    r.fail(tp, "must be a nonempty array or an {tau0, t0, orders} block");
    ok = false;
  }
  if (!ok) return std::nullopt;
  return b;
}

inline std::optional<OptParams> read_optimizer(Reader& r, const nlohmann::json& j, const std::string& path,
                                               const PumpBasis* basis) {
  OptParams p;
  if (!r.object(j, path,
                {"iterations", "sigma", "patience", "sigma_floor", "optimize_temporal", "initial"})) {
    return std::nullopt;
  }
  if (auto v = r.integer(j, path, "iterations", false, 1, 10000000)) p.iterations = static_cast<std::size_t>(*v);
  if (auto v = r.number(j, path, "sigma", false, positive, "must be positive")) p.sigma = *v;
  if (auto v = r.integer(j, path, "patience", false, 1, 10000000)) p.patience = static_cast<std::size_t>(*v);
  if (auto v = r.number(j, path, "sigma_floor", false, positive, "must be positive")) p.sigma_floor = *v;
  if (auto v = r.boolean(j, path, "optimize_temporal")) p.optimize_temporal = *v;
  if (p.sigma_floor > p.sigma) r.fail(Reader::join(path, "sigma_floor"), "must not exceed sigma");
  if (const auto* init = r.find(j, "initial")) {
    const std::string ip = Reader::join(path, "initial");
    if (r.object(*init, ip, {"spatial", "temporal"})) {
      PumpCoefficients c;
      bool ok = true;
      const auto list = [&](const char* key, std::vector<cplx>& out, std::size_t expect) {
        const auto* v = r.require(*init, ip, key);
        if (!v) {
          ok = false;
          return;
        }
        const std::string kp = Reader::join(ip, key);
        if (!v->is_array()) {
          r.fail(kp, "must be an array of [re, im] pairs");
          ok = false;
          return;
        }
        for (std::size_t i = 0; i < v->size(); ++i) {
          if (auto z = r.complex((*v)[i], Reader::index(kp, i))) out.push_back(*z);
          else ok = false;
        }
        double s = 0.0;
        for (const cplx& z : out) s += std::norm(z);
        if (ok && !(s > 0.0)) {
          r.fail(kp, "all coefficients are zero");
          ok = false;
        }
        if (ok && expect != 0 && out.size() != expect) {
          r.fail(kp, "has " + std::to_string(out.size()) + " entries, basis has " + std::to_string(expect));
          ok = false;
        }
      };
      list("spatial", c.spatial, basis ? basis->spatial.size() : 0);
      list("temporal", c.temporal, basis ? basis->temporal.size() : 0);
      if (ok) p.initial = c;
    }
  }
  return p;
}

}  // namespace detail

/// Validates and converts a parsed config. Every failing field is reported;
/// throws ValidationError when any check fails.
inline ScenarioConfig parse_config(const nlohmann::json& j) {
  std::vector<std::string> failures;
  detail::Reader r(failures);
  ScenarioConfig c;
  if (!r.object(j, "",
                {"kind", "seed", "strict", "output", "grid", "crystal", "solver", "detector", "launch",
                 "simulate", "optimize", "tomography", "rotate"})) {
    throw ValidationError(failures);
  }
  const auto kind = r.string(j, "", "kind", true, {"simulate", "optimize", "tomography", "rotate"});
  if (kind) {
    if (*kind == "simulate") c.kind = ScenarioKind::simulate;
    else if (*kind == "optimize") c.kind = ScenarioKind::optimize;
    else if (*kind == "tomography") c.kind = ScenarioKind::tomography;
    else c.kind = ScenarioKind::rotate;
  }
  if (const auto* s = r.find(j, "seed")) {
    if (s->is_number_unsigned()) c.seed = s->get<std::uint64_t>();
    else if (s->is_number_integer() && s->get<long long>() >= 0) c.seed = static_cast<std::uint64_t>(s->get<long long>());
    else r.fail("seed", "must be a nonnegative integer");
  }
  if (auto v = r.boolean(j, "", "strict")) c.strict = *v;
  if (auto v = r.string(j, "", "output", false)) c.output = *v;

  std::optional<Grid3D> grid;
  if (const auto* g = r.require(j, "", "grid")) grid = detail::read_grid(r, *g, "grid");
  if (grid) c.grid = *grid;
  std::optional<CrystalParams> crystal;
  if (const auto* x = r.require(j, "", "crystal")) crystal = detail::read_crystal(r, *x, "crystal");
  if (crystal) {
    c.crystal = *crystal;
    try {
      c.crystal.validate();
    } catch (const ConfigError& e) {
      r.fail("crystal", e.what());
    }
  }
  if (const auto* s = r.find(j, "solver")) {
    if (auto v = detail::read_solver(r, *s, "solver")) c.solver = *v;
  }
  if (crystal) {
    try {
      c.solver.validate(c.crystal.length);
    } catch (const ConfigError& e) {
      r.fail("solver", e.what());
    }
  }
  if (const auto* d = r.find(j, "detector")) {
    if (r.object(*d, "detector", {"kind", "waist"})) {
      const auto k = r.string(*d, "detector", "kind", true, {"single_mode", "total"});
      if (k && *k == "total") c.detector = {Detector::Kind::total, 0.0};
      if (k && *k == "single_mode") {
        const auto w = r.number(*d, "detector", "waist", true, detail::positive, "must be positive");
        if (w) c.detector = {Detector::Kind::single_mode, *w};
      }
    }
  }
  if (const auto* l = r.find(j, "launch")) {
    if (r.object(*l, "launch", {"signal_scale", "pump_peak_amplitude"})) {
      if (auto v = r.number(*l, "launch", "signal_scale", false, detail::positive, "must be positive"))
        c.signal_scale = *v;
      if (auto v = r.number(*l, "launch", "pump_peak_amplitude", false, detail::positive, "must be positive"))
        c.pump_peak_amplitude = *v;
    }
  }

  const auto block = [&](const char* key) -> const nlohmann::json* {
    const auto* b = r.find(j, key);
    if (kind && *kind == key && !b) r.fail(key, std::string("missing (required for kind ") + key + ")");
    if (kind && *kind != key && b) r.fail(key, "not allowed for kind " + *kind);
    return (kind && *kind == key) ? b : nullptr;
  };

  if (const auto* s = block("simulate")) {
    if (r.object(*s, "simulate", {"signal", "pump", "oracle_nz"})) {
      SimulateBlock b;
      std::optional<ModeSpec> sig, pump;
      if (const auto* m = r.require(*s, "simulate", "signal")) sig = detail::read_mode(r, *m, "simulate.signal");
      if (const auto* m = r.require(*s, "simulate", "pump")) pump = detail::read_mode(r, *m, "simulate.pump");
      if (auto v = r.integer(*s, "simulate", "oracle_nz", false, 64, 1000000)) b.oracle_nz = static_cast<std::size_t>(*v);
      if (sig && pump) {
        b.signal = *sig;
        b.pump = *pump;
        c.simulate = b;
      }
    }
  }
  if (const auto* o = block("optimize")) {
    if (r.object(*o, "optimize", {"target", "signals", "pump_basis", "optimizer"})) {
      OptimizeBlock b;
      std::optional<std::vector<ModeSpec>> sigs;
      std::optional<PumpBasis> basis;
      std::optional<OptParams> params;
      if (const auto* m = r.require(*o, "optimize", "signals")) sigs = detail::read_modes(r, *m, "optimize.signals");
      const auto target = r.integer(*o, "optimize", "target", true, 0, 1000000);
      if (const auto* m = r.require(*o, "optimize", "pump_basis"))
        basis = detail::read_pump_basis(r, *m, "optimize.pump_basis");
      if (const auto* m = r.find(*o, "optimizer"))
        params = detail::read_optimizer(r, *m, "optimize.optimizer", basis ? &*basis : nullptr);
      else
        params = OptParams{};
      if (sigs && sigs->size() < 2) r.fail("optimize.signals", "needs at least two signals");
      if (sigs && target && static_cast<std::size_t>(*target) >= sigs->size())
        r.fail("optimize.target", "must index into optimize.signals");
      if (sigs) {
        for (std::size_t a = 0; a < sigs->size(); ++a)
          for (std::size_t bb = a + 1; bb < sigs->size(); ++bb)
            if ((*sigs)[a].spatial == (*sigs)[bb].spatial && (*sigs)[a].temporal == (*sigs)[bb].temporal)
              r.fail("optimize.signals", "entries " + std::to_string(a) + " and " + std::to_string(bb) +
                                             " are identical");
      }
      if (!c.seed) r.fail("seed", "required for kind optimize");
      if (sigs && target && basis && params) {
        b.signals = *sigs;
        b.target = static_cast<std::size_t>(*target);
        b.basis = *basis;
        b.params = *params;
        c.optimize = b;
      }
    }
  }
  if (const auto* t = block("tomography")) {
    if (r.object(*t, "tomography", {"signals", "pumps"})) {
      std::optional<std::vector<ModeSpec>> sigs, pumps;
      if (const auto* m = r.require(*t, "tomography", "signals")) sigs = detail::read_modes(r, *m, "tomography.signals");
      if (const auto* m = r.require(*t, "tomography", "pumps")) pumps = detail::read_modes(r, *m, "tomography.pumps");
      if (sigs && pumps) c.tomography = TomographyBlock{*sigs, *pumps};
    }
  }
  if (const auto* t = block("rotate")) {
    if (r.object(*t, "rotate", {"signal", "pump", "temporal", "signal_angles_deg", "pump_angles_deg"})) {
      RotateBlock b;
      std::optional<HGSpec> s, p;
      std::optional<TemporalSpec> tm;
      std::optional<std::vector<double>> sa, pa;
      if (const auto* m = r.require(*t, "rotate", "signal")) s = detail::read_hg(r, *m, "rotate.signal");
      if (const auto* m = r.require(*t, "rotate", "pump")) p = detail::read_hg(r, *m, "rotate.pump");
      if (const auto* m = r.require(*t, "rotate", "temporal")) tm = detail::read_temporal(r, *m, "rotate.temporal");
      if (const auto* m = r.require(*t, "rotate", "signal_angles_deg"))
        sa = detail::read_angles(r, *m, "rotate.signal_angles_deg");
      if (const auto* m = r.require(*t, "rotate", "pump_angles_deg"))
        pa = detail::read_angles(r, *m, "rotate.pump_angles_deg");
      if (s && p && tm && sa && pa) c.rotate = RotateBlock{*s, *p, *tm, *sa, *pa};
    }
  }
  if (!failures.empty()) throw ValidationError(failures);
  return c;
}

inline std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline ScenarioConfig load_config(const std::filesystem::path& path) {
  return parse_config(parse_config_text(read_text_file(path)));
}

}  // namespace msqfc
