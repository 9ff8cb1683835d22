#pragma once

#include <openssl/evp.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <fftw3.h>
#include <json.hpp>

#include "msqfc/config.hpp"
#include "msqfc/errors.hpp"
#include "msqfc/field.hpp"
#include "msqfc/io.hpp"
#include "msqfc/metrics.hpp"
#include "msqfc/modes.hpp"
#include "msqfc/parallel.hpp"
#include "msqfc/perturbative.hpp"
#include "msqfc/propagation.hpp"
#include "msqfc/pumpopt.hpp"

namespace msqfc {

inline constexpr const char* kVersion = "1.0.0";

namespace exit_code {
inline constexpr int ok = 0;
inline constexpr int validation = 2;
inline constexpr int numeric = 3;
inline constexpr int io = 4;
}  // namespace exit_code

inline std::string sha256_hex(std::string_view bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw IoError("SHA-256 computation failed");
  }
  std::ostringstream ss;
  for (unsigned int i = 0; i < len; ++i) ss << std::hex << std::setw(2) << std::setfill('0') << int(digest[i]);
  return ss.str();
}

/// Writes files into the output directory and remembers each one's digest.
class OutputSet {
 public:
  explicit OutputSet(std::filesystem::path dir) : dir_(std::move(dir)) {}

  void prepare() {
    std::error_code ec;
    std::filesystem::create_directories(dir_, ec);
    if (ec) throw IoError("cannot create output directory " + dir_.string() + ": " + ec.message());
  }

  void write(const std::string& name, const std::string& content) {
    write_untracked(name, content);
    files_.push_back({{"file", name}, {"sha256", sha256_hex(content)}});
  }

  void write_untracked(const std::string& name, const std::string& content) const {
    const auto path = dir_ / name;
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    out << content;
    if (!out.flush()) throw IoError("write failed for " + path.string());
  }

  const std::filesystem::path& dir() const { return dir_; }
  const json& files() const { return files_; }

 private:
  std::filesystem::path dir_;
  json files_ = json::array();
};

struct RunOptions {
  std::filesystem::path config_path;
  std::optional<std::filesystem::path> out;
  std::optional<std::uint64_t> seed;
  bool strict = false;
  std::size_t jobs = 1;
  std::optional<ScenarioKind> expected_kind;  // subcommand; rejects a config of another kind
  std::ostream* log = nullptr;
};

struct RunOutcome {
  int exit_code = exit_code::ok;
  std::filesystem::path out_dir;
  json report;  // empty when validation failed before any output
  json error;   // machine-readable error record, null on success
};

/// Signal field at the configured launch scale.
inline Field launch_signal(const ScenarioConfig& cfg, const ModeSpec& spec,
                           Strictness strictness = Strictness::lenient) {
  return build_mode(normalized(spec), cfg.grid, strictness).scaled(cfg.signal_scale).with_carrier(Carrier::signal);
}

/// Pump field scaled to the configured peak amplitude.
inline Field launch_pump(const ScenarioConfig& cfg, const ModeSpec& spec,
                         Strictness strictness = Strictness::lenient) {
  const Field unit = build_mode(normalized(spec), cfg.grid, strictness);
  return unit.scaled(cfg.pump_peak_amplitude / unit.max_abs()).with_carrier(Carrier::pump);
}

/// Optimization problem of an optimize scenario.
inline OptProblem make_opt_problem(const ScenarioConfig& cfg, std::size_t jobs = 1) {
  if (!cfg.optimize) throw ConfigError("scenario has no optimize block");
  const OptimizeBlock& b = *cfg.optimize;
  OptProblem pb;
  pb.target = b.target;
  pb.signals = b.signals;
  pb.grid = cfg.grid;
  pb.crystal = cfg.crystal;
  pb.solver = cfg.solver;
  pb.detector = cfg.detector;
  pb.basis = b.basis;
  pb.pump_peak_amplitude = cfg.pump_peak_amplitude;
  pb.signal_scale = cfg.signal_scale;
  pb.jobs = jobs;
  return pb;
}

namespace detail {

inline std::string field_csv(const Field& f) {
  std::ostringstream ss;
  write_field_csv(ss, f);
  return ss.str();
}

inline json error_record(const std::exception& e, int code) {
  json j{{"status", "error"}, {"exit_code", code}, {"message", e.what()}};
  if (const auto* v = dynamic_cast<const ValidationError*>(&e)) j["failures"] = v->failures();
  if (const auto* n = dynamic_cast<const NumericBlowupError*>(&e)) j["last_good_z"] = n->last_good_z();
  if (dynamic_cast<const ValidationError*>(&e) || dynamic_cast<const ConfigError*>(&e)) j["type"] = "validation";
  else if (dynamic_cast<const IoError*>(&e)) j["type"] = "io";
  else j["type"] = "numeric";
  return j;
}

inline int classify(const std::exception& e) {
  if (dynamic_cast<const ValidationError*>(&e) || dynamic_cast<const ConfigError*>(&e)) {
    return exit_code::validation;
  }
  if (dynamic_cast<const IoError*>(&e)) return exit_code::io;
  return exit_code::numeric;
}

/// Shared state of one scenario execution.
class Run {
 public:
  Run(const ScenarioConfig& cfg, const RunOptions& opts, OutputSet& out, std::string config_digest)
      : cfg_(cfg), opts_(opts), out_(out), digest_(std::move(config_digest)) {
    strictness_ = (cfg.strict || opts.strict) ? Strictness::strict : Strictness::lenient;
  }

  json execute() {
    switch (cfg_.kind) {
      case ScenarioKind::simulate: return simulate();
      case ScenarioKind::optimize: return optimize();
      case ScenarioKind::tomography: return tomography();
      case ScenarioKind::rotate: return rotate();
    }
    return {};
  }

  const std::vector<std::string>& warnings() const { return warnings_; }

 private:
  void log(const std::string& msg) const {
    if (opts_.log) *opts_.log << msg << '\n';
  }

  void check_window(const std::vector<SpatialTerm>& terms, const std::string& label) {
    for (const auto& t : terms) {
      if (auto w = window_warning(spatial_mode(t.mode, cfg_.grid, strictness_))) {
        warnings_.push_back(label + ": " + *w);
      }
    }
  }

  Field signal_field(const ModeSpec& spec) {
    check_window(spec.spatial, "signal '" + spec.label + "'");
    return launch_signal(cfg_, spec, strictness_);
  }

  Field pump_field(const ModeSpec& spec) {
    check_window(spec.spatial, "pump '" + spec.label + "'");
    return launch_pump(cfg_, spec, strictness_);
  }

  PropagationResult run_solver(const Field& s, const Field& p) const {
    PropagationResult r = propagate(s, p, cfg_.crystal, cfg_.solver);
    if (r.forced > 0 && strictness_ == Strictness::strict) {
      throw AccuracyError(std::to_string(r.forced) + " step(s) accepted at h_min above tolerance");
    }
    return r;
  }

  void note_forced(const PropagationResult& r, const std::string& what) {
    if (r.forced > 0) {
      warnings_.push_back(what + ": " + std::to_string(r.forced) + " step(s) accepted at h_min above tolerance");
    }
  }

  void write_slices(const std::string& stem, const Field& f) {
    const PeakIndex pk = peak_index(f);
    out_.write(stem + "_spatial.csv", field_csv(spatial_slice(f, pk.it)));
    out_.write(stem + "_temporal.csv", field_csv(temporal_profile(f, pk.ix, pk.iy)));
  }

  json simulate() {
    const SimulateBlock& b = *cfg_.simulate;
    const Field signal = signal_field(b.signal);
    const Field pump = pump_field(b.pump);
    log("propagating " + b.signal.label + " with pump " + b.pump.label);
    const PropagationResult r = run_solver(signal, pump);
    note_forced(r, "simulate");

    std::ostringstream flux;
    write_flux_csv(flux, r);
    out_.write("flux_vs_z.csv", flux.str());
    write_slices("signal_in", signal);
    write_slices("pump_in", pump);
    write_slices("sf", r.sf);

    const PeakIndex pk = peak_index(r.sf);
    json res{{"propagation", propagation_summary(r)},
             {"detected_sf_photons", detected_count(r.sf, cfg_.detector, cfg_.crystal)},
             {"sf_peak", {{"x", cfg_.grid.x(pk.ix)}, {"y", cfg_.grid.y(pk.iy)}, {"t", cfg_.grid.t(pk.it)}}},
             {"sf_temporal_centroid", temporal_centroid(r.sf)}};
    if (b.oracle_nz > 0) {
      log("evaluating perturbative oracle");
      const Field o = perturbative_sfg(signal, pump, cfg_.crystal, b.oracle_nz);
      double d = 0.0, n = 0.0;
      for (std::size_t i = 0; i < o.size(); ++i) {
        d += std::norm(o[i] - r.sf[i]);
        n += std::norm(o[i]);
      }
      const double depletion = 1.0 - r.steps.back().flux_signal / r.initial.flux_signal;
      res["oracle"] = {{"nz", b.oracle_nz},
                       {"relative_l2_error", n > 0.0 ? std::sqrt(d / n) : 0.0},
                       {"signal_depletion", depletion}};
    }
    return res;
  }

  static double temporal_centroid(const Field& f) {
    const Grid3D& g = f.grid();
    double w = 0.0, m = 0.0;
    for (std::size_t i = 0; i < f.size(); ++i) {
      const double p = std::norm(f[i]);
      w += p;
      m += p * g.t(i % g.nt());
    }
    return w > 0.0 ? m / w : 0.0;
  }

  json optimize() {
    const OptimizeBlock& b = *cfg_.optimize;
    const OptProblem pb = make_opt_problem(cfg_, opts_.jobs);
    for (const auto& s : b.signals) check_window(s.spatial, "signal '" + s.label + "'");
    for (const auto& s : b.basis.spatial) {
      if (auto w = window_warning(lg_mode(s, cfg_.grid, strictness_))) warnings_.push_back("pump basis: " + *w);
    }

    OptParams params = b.params;
    params.seed = *cfg_.seed;
    log("optimizing target " + std::to_string(b.target) + " over " + std::to_string(params.iterations) +
        " iterations");
    OptimizationResult res = RandomWalkOptimizer(params).optimize(pb);
    res.report.seed = params.seed;
    res.report.config_digest = digest_;

    out_.write("optimization.json", to_json(res).dump(2) + "\n");
    std::ostringstream trace;
    trace << "iteration,objective_db,best_db,sigma\n";
    for (std::size_t i = 0; i < res.trace.size(); ++i)
      trace << i << ',' << format_double(res.trace[i]) << ',' << format_double(res.best_trace[i]) << ','
            << format_double(res.sigma_trace[i]) << '\n';
    out_.write("trace.csv", trace.str());
    write_slices("pump_best", PumpBank(pb.basis, pb.grid).build(res.best));

    std::vector<double> eta;
    double best_pair = -HUGE_VAL;
    for (std::size_t j = 0; j < res.report.counts.size(); ++j) {
      if (j == b.target) continue;
      eta.push_back(res.report.eta[b.target][j]);
      best_pair = std::max(best_pair, res.report.eta[b.target][j]);
    }
    json labels = json::array();
    for (const auto& s : b.signals) labels.push_back(s.label);
    json out{{"signals", labels},
             {"target", b.target},
             {"seed", params.seed},
             {"initial_objective_db", res.initial_objective},
             {"min_selectivity_db", res.best_objective},
             {"best_pair_selectivity_db", best_pair},
             {"selectivity_vs_others_db", eta},
             {"nbar_db", res.report.nbar_db},
             {"accepted_moves", res.accepted_moves},
             {"iterations_run", res.trace.size()}};
    if (res.error) {
      partial_error_ = *res.error;
      out["error"] = *res.error;
    }
    return out;
  }

  json tomography() {
    const TomographyBlock& b = *cfg_.tomography;
    std::vector<LabeledField> sig, pump;
    for (const auto& s : b.signals) sig.push_back({s.label, signal_field(s)});
    for (const auto& p : b.pumps) pump.push_back({p.label, pump_field(p)});
    log("tomography " + std::to_string(pump.size()) + " x " + std::to_string(sig.size()));
    const TomographyMatrix m = tomography_matrix(sig, pump, cfg_.crystal, cfg_.solver, cfg_.detector, opts_.jobs);

    std::ostringstream coarse, fine;
    write_tomography_csv(coarse, m, 2);
    write_tomography_csv(fine, m, -1);
    out_.write("tomography.csv", coarse.str());
    out_.write("tomography_full.csv", fine.str());
    out_.write("tomography.json", to_json(m).dump(2) + "\n");

    json res{{"rows", m.row_labels.size()}, {"columns", m.col_labels.size()}};
    if (m.row_labels.size() == m.col_labels.size()) {
      double worst = HUGE_VAL;
      bool dominant = true;
      for (std::size_t r = 0; r < m.db.size(); ++r) {
        double off = -HUGE_VAL;
        for (std::size_t c = 0; c < m.db[r].size(); ++c)
          if (c != r) off = std::max(off, m.db[r][c]);
        worst = std::min(worst, m.db[r][r] - off);
        dominant = dominant && m.db[r][r] > off;
      }
      res["diagonal_dominant"] = dominant;
      res["min_diagonal_extinction_db"] = worst;
    }
    if (auto oam = oam_extinction(b, m)) res["oam_rule_extinction_db"] = *oam;
    return res;
  }

  // Weakest l_s = -l_p entry minus strongest other entry over all rows.
  // Only defined when every mode is a single LG term.
  static std::optional<double> oam_extinction(const TomographyBlock& b, const TomographyMatrix& m) {
    const auto l_of = [](const ModeSpec& spec) -> std::optional<int> {
      if (spec.spatial.size() != 1) return std::nullopt;
      if (const auto* lg = std::get_if<LGSpec>(&spec.spatial[0].mode)) return lg->l;
      return std::nullopt;
    };
    double worst = HUGE_VAL;
    for (std::size_t r = 0; r < b.pumps.size(); ++r) {
      const auto lp = l_of(b.pumps[r]);
      if (!lp) return std::nullopt;
      double matched = HUGE_VAL, other = -HUGE_VAL;
      for (std::size_t c = 0; c < b.signals.size(); ++c) {
        const auto ls = l_of(b.signals[c]);
        if (!ls) return std::nullopt;
        if (*ls + *lp == 0) matched = std::min(matched, m.db[r][c]);
        else other = std::max(other, m.db[r][c]);
      }
      if (matched == HUGE_VAL || other == -HUGE_VAL) return std::nullopt;
      worst = std::min(worst, matched - other);
    }
    return worst;
  }

  json rotate() {
    const RotateBlock& b = *cfg_.rotate;
    const double deg = std::numbers::pi / 180.0;
    const Field temporal = temporal_mode(b.temporal, cfg_.grid);
    const auto make = [&](HGSpec spec, double angle) {
      spec.theta = angle * deg;
      const Field s = hg_mode(spec, cfg_.grid, strictness_);
      if (auto w = window_warning(s)) warnings_.push_back("rotate: " + *w);
      return compose(s, temporal);
    };
    std::vector<Field> sig, pump;
    for (double a : b.signal_angles_deg) sig.push_back(make(b.signal, a).scaled(cfg_.signal_scale).with_carrier(Carrier::signal));
    // One scale for every angle so that pump power does not depend on how
    // the rotated peak falls on the grid.
    const double pump_scale = cfg_.pump_peak_amplitude / make(b.pump, 0.0).max_abs();
    for (double a : b.pump_angles_deg) pump.push_back(make(b.pump, a).scaled(pump_scale).with_carrier(Carrier::pump));
    const std::size_t ns = sig.size(), np = pump.size();
    std::vector<double> flux(ns * np);
    log("rotation sweep " + std::to_string(ns) + " x " + std::to_string(np));
    parallel_for(ns * np, opts_.jobs, [&](std::size_t k) {
      const std::size_t i = k / np, j = k % np;
      try {
        flux[k] = detected_count(run_solver(sig[i], pump[j]).sf, cfg_.detector, cfg_.crystal);
      } catch (const std::exception& e) {
        throw TomographyCellError(i, j, e.what());
      }
    });
    const double peak = *std::max_element(flux.begin(), flux.end());
    if (!(peak > 0.0)) throw DegenerateInputError("rotation sweep produced no SF counts");

    std::ostringstream csv;
    csv << "theta_signal_deg,theta_pump_deg,flux,normalized\n";
    for (std::size_t i = 0; i < ns; ++i)
      for (std::size_t j = 0; j < np; ++j)
        csv << format_double(b.signal_angles_deg[i]) << ',' << format_double(b.pump_angles_deg[j]) << ','
            << format_double(flux[i * np + j]) << ',' << format_double(flux[i * np + j] / peak) << '\n';
    out_.write("rotation_sweep.csv", csv.str());

    // Orthogonal pairs: theta_s - theta_p = +-90 deg modulo 180.
    double ortho_max = 0.0;
    bool any_ortho = false;
    double diag_min = HUGE_VAL;
    for (std::size_t i = 0; i < ns; ++i)
      for (std::size_t j = 0; j < np; ++j) {
        const double d = std::remainder(b.signal_angles_deg[i] - b.pump_angles_deg[j], 180.0);
        if (std::abs(std::abs(d) - 90.0) < 1e-9) {
          any_ortho = true;
          ortho_max = std::max(ortho_max, flux[i * np + j]);
        }
        if (std::abs(d) < 1e-9) diag_min = std::min(diag_min, flux[i * np + j]);
      }
    double min_visibility = HUGE_VAL;
    for (std::size_t j = 0; j < np; ++j) {
      std::vector<std::pair<double, double>> cut;
      for (std::size_t i = 0; i < ns; ++i) cut.push_back({b.signal_angles_deg[i], flux[i * np + j]});
      if (cut.size() >= 2) min_visibility = std::min(min_visibility, visibility(cut));
    }
    json res{{"max_flux", peak}};
    if (any_ortho) {
      res["orthogonal_max_normalized"] = ortho_max / peak;
      res["orthogonal_extinction_db"] =
          ortho_max > 0.0 ? 10.0 * std::log10(peak / ortho_max) : -kZeroCountFloorDb;
    }
    if (diag_min < HUGE_VAL) res["matched_min_normalized"] = diag_min / peak;
    if (min_visibility < HUGE_VAL) res["min_cut_visibility"] = min_visibility;
    if (b.signal_angles_deg == b.pump_angles_deg) {
      double asym = 0.0;
      for (std::size_t i = 0; i < ns; ++i)
        for (std::size_t j = 0; j < np; ++j)
          asym = std::max(asym, std::abs(flux[i * np + j] - flux[j * np + i]) / peak);
      res["transpose_asymmetry"] = asym;
    }
    return res;
  }

 public:
  std::optional<std::string> partial_error_;

 private:
  const ScenarioConfig& cfg_;
  const RunOptions& opts_;
  OutputSet& out_;
  std::string digest_;
  Strictness strictness_;
  std::vector<std::string> warnings_;
};

inline std::string utc_now() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace detail

/// Validates and runs one scenario file. Never throws: failures come back as
/// an exit code plus an error record. Validation failures write nothing.
/// Runtime failures leave the outputs written so far and a report.json with
/// status "error".
inline RunOutcome run_scenario(const RunOptions& opts) {
  RunOutcome outcome;
  std::string text;
  ScenarioConfig cfg;
  try {
    text = read_text_file(opts.config_path);
    cfg = parse_config(parse_config_text(text));
    if (opts.seed) cfg.seed = opts.seed;
    if (opts.expected_kind && *opts.expected_kind != cfg.kind) {
      throw ValidationError({std::string("kind: config is '") + to_string(cfg.kind) + "' but the command is '" +
                             to_string(*opts.expected_kind) + "'"});
    }
  } catch (const std::exception& e) {
    outcome.exit_code = detail::classify(e);
    outcome.error = detail::error_record(e, outcome.exit_code);
    return outcome;
  }

  outcome.out_dir = opts.out.value_or(std::filesystem::path(cfg.output));
  OutputSet out(outcome.out_dir);
  const std::string digest = sha256_hex(text);
  const auto started = std::chrono::steady_clock::now();
  const std::string started_utc = detail::utc_now();

  json versions{{"msqfc", kVersion}, {"fftw", std::string(fftw_version)}};
  versions["nlohmann_json"] = std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                              std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                              std::to_string(NLOHMANN_JSON_VERSION_PATCH);
  json inputs{{"config_file", opts.config_path.filename().string()},
              {"config_sha256", digest},
              {"strict", cfg.strict || opts.strict}};
  inputs["seed"] = cfg.seed ? json(*cfg.seed) : json(nullptr);
  inputs["grid"] = to_json(cfg.grid);
  inputs["crystal"] = to_json(cfg.crystal);
  inputs["solver"] = to_json(cfg.solver);
  inputs["detector"] = {{"kind", cfg.detector.kind == Detector::Kind::single_mode ? "single_mode" : "total"},
                        {"waist", cfg.detector.waist}};
  inputs["launch"] = {{"signal_scale", cfg.signal_scale}, {"pump_peak_amplitude", cfg.pump_peak_amplitude}};
  json report{{"tool", "msqfc"}, {"version", kVersion}};
  report["versions"] = versions;
  report["kind"] = to_string(cfg.kind);
  report["inputs"] = inputs;

  std::optional<detail::Run> run;
  try {
    out.prepare();
    run.emplace(cfg, opts, out, digest);
    report["results"] = run->execute();
    report["warnings"] = run->warnings();
    if (run->partial_error_) {
      outcome.exit_code = exit_code::numeric;
      outcome.error = {{"status", "error"}, {"exit_code", exit_code::numeric}, {"type", "numeric"},
                       {"message", *run->partial_error_}};
    }
  } catch (const std::exception& e) {
    outcome.exit_code = detail::classify(e);
    outcome.error = detail::error_record(e, outcome.exit_code);
    if (run) report["warnings"] = run->warnings();
  }
  report["status"] = outcome.exit_code == exit_code::ok ? "ok" : "error";
  if (!outcome.error.is_null()) report["error"] = outcome.error;
  json files = out.files();
  files.push_back({{"file", "metadata.json"}, {"sha256", nullptr}, {"note", "run timestamps; not reproducible"}});
  report["outputs"] = files;
  outcome.report = report;

  const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  try {
    out.prepare();
    out.write_untracked("report.json", report.dump(2) + "\n");
    json meta{{"started_utc", started_utc}, {"finished_utc", detail::utc_now()}, {"elapsed_seconds", elapsed},
              {"jobs", opts.jobs}};
    out.write_untracked("metadata.json", meta.dump(2) + "\n");
  } catch (const std::exception& e) {
    outcome.exit_code = exit_code::io;
    outcome.error = detail::error_record(e, exit_code::io);
  }
  return outcome;
}

}  // namespace msqfc
