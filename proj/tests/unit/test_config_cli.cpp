#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "msqfc/scenario.hpp"

using namespace msqfc;
namespace fs = std::filesystem;

namespace {

const fs::path kScenarios = MSQFC_SCENARIO_DIR;
const fs::path kData = MSQFC_TEST_DATA_DIR;

fs::path scratch_dir(const std::string& name) {
  std::random_device rd;
  const fs::path p = fs::temp_directory_path() / ("msqfc_test_" + name + "_" + std::to_string(rd()));
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) { return read_text_file(p); }

int cli(const std::string& args) {
  const std::string cmd = std::string(MSQFC_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::vector<std::string> failures_of(const std::string& text) {
  try {
    parse_config(parse_config_text(text));
  } catch (const ValidationError& e) {
    return e.failures();
  }
  return {};
}

bool mentions(const std::vector<std::string>& fs, const std::string& needle) {
  for (const auto& f : fs)
    if (f.find(needle) != std::string::npos) return true;
  return false;
}

}  // namespace

TEST(Config, BundledScenariosValidate) {
  for (const char* name : {"fig1b.cfg", "fig1c.cfg", "fig2.cfg", "oamgrid.cfg", "rotation.cfg"}) {
    SCOPED_TRACE(name);
    EXPECT_NO_THROW(load_config(kScenarios / name));
  }
  const ScenarioConfig fig2 = load_config(kScenarios / "fig2.cfg");
  ASSERT_TRUE(fig2.optimize.has_value());
  EXPECT_EQ(fig2.optimize->signals.size(), 4u);
  EXPECT_EQ(fig2.optimize->basis.spatial.size(), 6u);
  EXPECT_EQ(fig2.optimize->basis.temporal.size(), 3u);
  const ScenarioConfig rot = load_config(kScenarios / "rotation.cfg");
  ASSERT_TRUE(rot.rotate.has_value());
  EXPECT_EQ(rot.rotate->signal_angles_deg.size(), 19u);
  EXPECT_DOUBLE_EQ(rot.rotate->signal_angles_deg.back(), 180.0);
}

TEST(Config, AllowsComments) {
  const auto c = parse_config(parse_config_text(slurp(kData / "tiny_simulate.cfg")));
  EXPECT_EQ(c.kind, ScenarioKind::simulate);
  EXPECT_EQ(c.grid.nx(), 16u);
  EXPECT_EQ(c.detector.kind, Detector::Kind::single_mode);
}

TEST(Config, SyntaxErrorIsValidation) {
  EXPECT_THROW(parse_config_text("{\"kind\": "), ValidationError);
}

TEST(Config, MissingCrystalIsReported) {
  const auto f = failures_of(slurp(kData / "missing_crystal.cfg"));
  ASSERT_EQ(f.size(), 1u);
  EXPECT_TRUE(mentions(f, "crystal"));
}

TEST(Config, EveryFailureIsListed) {
  const auto f = failures_of(slurp(kData / "many_errors.cfg"));
  EXPECT_TRUE(mentions(f, "colour: unknown key"));
  EXPECT_TRUE(mentions(f, "grid.nx"));
  EXPECT_TRUE(mentions(f, "grid.lx"));
  EXPECT_TRUE(mentions(f, "crystal.length"));
  EXPECT_TRUE(mentions(f, "solver.tolerance"));
  EXPECT_GE(f.size(), 5u);
}

TEST(Config, KindSpecificRules) {
  const std::string base = slurp(kData / "tiny_optimize.cfg");
  json j = parse_config_text(base);
  j.erase("seed");
  EXPECT_TRUE(mentions(failures_of(j.dump()), "seed"));
  j = parse_config_text(base);
  j["optimize"]["target"] = 2;
  EXPECT_TRUE(mentions(failures_of(j.dump()), "optimize.target"));
  j = parse_config_text(base);
  j["simulate"] = json::object();
  EXPECT_TRUE(mentions(failures_of(j.dump()), "not allowed"));
  j = parse_config_text(base);
  j["optimize"]["signals"][1] = j["optimize"]["signals"][0];
  EXPECT_TRUE(mentions(failures_of(j.dump()), "identical"));
  j = parse_config_text(base);
  j["optimize"]["optimizer"]["initial"] = {{"spatial", {1.0}}, {"temporal", {1.0}}};
  EXPECT_TRUE(mentions(failures_of(j.dump()), "initial.spatial"));
}

TEST(Config, ComplexCoefficientForms) {
  json j = parse_config_text(slurp(kData / "tiny_simulate.cfg"));
  j["simulate"]["signal"]["spatial"] = json::array(
      {{{"coeff", {1.0, 0.0}}, {"lg", {{"l", 0}, {"waist", 44.9e-6}}}},
       {{"coeff", {0.0, 1.0}}, {"lg", {{"l", 1}, {"waist", 44.9e-6}}}}});
  const auto c = parse_config(j);
  ASSERT_EQ(c.simulate->signal.spatial.size(), 2u);
  EXPECT_EQ(c.simulate->signal.spatial[1].coeff, cplx(0.0, 1.0));
}

TEST(Cli, ValidateExitCodes) {
  EXPECT_EQ(cli("validate --config " + (kScenarios / "fig2.cfg").string()), 0);
  EXPECT_EQ(cli("validate --config " + (kData / "many_errors.cfg").string()), 2);
  EXPECT_EQ(cli("validate --config " + (kData / "does_not_exist.cfg").string()), 2);
  EXPECT_EQ(cli("frobnicate"), 2);
}

TEST(Cli, InvalidConfigWritesNothing) {
  const fs::path out = scratch_dir("invalid");
  EXPECT_EQ(cli("simulate --config " + (kData / "missing_crystal.cfg").string() + " --out " + out.string()), 2);
  EXPECT_FALSE(fs::exists(out));
}

TEST(Cli, WrongSubcommandForKind) {
  const fs::path out = scratch_dir("kind");
  EXPECT_EQ(cli("optimize --config " + (kData / "tiny_simulate.cfg").string() + " --out " + out.string()), 2);
  EXPECT_FALSE(fs::exists(out));
}

TEST(Cli, UnwritableOutputIsIoError) {
  const fs::path blocker = scratch_dir("blocker");
  std::ofstream(blocker) << "x";
  EXPECT_EQ(cli("simulate -q --config " + (kData / "tiny_simulate.cfg").string() + " --out " +
                (blocker / "sub").string()),
            4);
  fs::remove(blocker);
}

TEST(Cli, SimulateDigestsMatchFiles) {
  const fs::path out = scratch_dir("simulate");
  ASSERT_EQ(cli("simulate -q --config " + (kData / "tiny_simulate.cfg").string() + " --out " + out.string()), 0);
  const json report = json::parse(slurp(out / "report.json"));
  EXPECT_EQ(report.at("status"), "ok");
  EXPECT_EQ(report.at("inputs").at("config_sha256"), sha256_hex(slurp(kData / "tiny_simulate.cfg")));
  std::size_t checked = 0;
  for (const auto& f : report.at("outputs")) {
    const fs::path p = out / f.at("file").get<std::string>();
    ASSERT_TRUE(fs::exists(p)) << p;
    if (f.at("sha256").is_null()) continue;
    EXPECT_EQ(f.at("sha256"), sha256_hex(slurp(p))) << p;
    ++checked;
  }
  EXPECT_GE(checked, 7u);
  const CsvTable flux = [&] {
    std::ifstream in(out / "flux_vs_z.csv");
    return read_csv(in);
  }();
  EXPECT_EQ(flux.header, (std::vector<std::string>{"z", "h", "flux_signal", "flux_pump", "flux_sf"}));
  EXPECT_EQ(flux.rows.front()[0], 0.0);
  EXPECT_DOUBLE_EQ(flux.rows.back()[0], CrystalParams::ppln_defaults().length);
  EXPECT_GT(report.at("results").at("detected_sf_photons").get<double>(), 0.0);
  fs::remove_all(out);
}

TEST(Cli, OptimizeReportIsByteIdenticalOnRerun) {
  const fs::path a = scratch_dir("opt_a"), b = scratch_dir("opt_b");
  const std::string cfg = (kData / "tiny_optimize.cfg").string();
  ASSERT_EQ(cli("optimize -q --config " + cfg + " --out " + a.string()), 0);
  ASSERT_EQ(cli("optimize -q --config " + cfg + " --out " + b.string() + " --jobs 2"), 0);
  EXPECT_EQ(slurp(a / "report.json"), slurp(b / "report.json"));
  EXPECT_EQ(slurp(a / "optimization.json"), slurp(b / "optimization.json"));
  const fs::path c = scratch_dir("opt_c");
  ASSERT_EQ(cli("optimize -q --config " + cfg + " --out " + c.string() + " --seed 8"), 0);
  EXPECT_NE(slurp(a / "optimization.json"), slurp(c / "optimization.json"));
  for (const auto& p : {a, b, c}) fs::remove_all(p);
}
