#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>

#include "pragsim/config.hpp"
#include "pragsim/emit.hpp"
#include "pragsim/error.hpp"

using namespace pragsim;
namespace fs = std::filesystem;

namespace {

const fs::path kConfigs = fs::path(PRAGSIM_SOURCE_DIR) / "configs";

std::string config_with(const std::string& scenario_extra, const std::string& methods) {
  return R"({"scenarios": [{"id": "s")" + scenario_extra + R"(}], "methods": )" + methods + "}";
}

const std::string kOneMethod =
    R"([{"key": "m", "selection": "closest12", "engine": "ols_sandwich", "time_adjust": "linear", "effect_model": "constant"}])";

std::string config_error(const std::string& text) {
  try {
    parse_config_text(text);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run cli(const std::string& args) {
  static int counter = 0;
  const fs::path dir = fs::temp_directory_path() / "pragsim_cli_test";
  fs::create_directories(dir);
  const auto out = dir / ("out" + std::to_string(counter) + ".txt");
  const auto err = dir / ("err" + std::to_string(counter++) + ".txt");
  const std::string cmd = std::string(PRAGSIM_CLI_PATH) + " " + args + " >" + out.string() + " 2>" + err.string();
  const int status = std::system(cmd.c_str());
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(out), slurp(err)};
}

fs::path small_config() {
  const fs::path dir = fs::temp_directory_path() / "pragsim_cli_test";
  fs::create_directories(dir);
  const fs::path p = dir / "small.json";
  std::ofstream(p) << R"({
  "defaults": {"n_per_site": 30, "cohort": {"size": 2000, "seed": 3}},
  "scenarios": [{"id": "null"}, {"id": "ramp", "effect": {"kind": "ramp", "delta12": -1.5}}],
  "methods": [
    {"key": "closest12_none", "selection": "closest12", "engine": "ols_sandwich", "time_adjust": "splines3", "effect_model": "constant"},
    {"key": "lmm_exp", "selection": "all", "engine": "lmm_exponential", "time_adjust": "splines3", "effect_model": "constant"},
    {"key": "wgee_tv", "selection": "all", "engine": "wgee", "time_adjust": "splines3", "effect_model": "splines3"}
  ]
})";
  return p;
}

}  // namespace

TEST_CASE("shipped configurations parse") {
  const RunConfig t1 = parse_config(kConfigs / "table1_realistic.json");
  CHECK(t1.scenarios.size() == 3);
  CHECK(t1.methods.size() == 12);
  CHECK(t1.scenarios[2].effect.kind == EffectKind::Ramp);
  CHECK(t1.scenarios[0].covariance.kind == CovKind::Exponential);
  CHECK(t1.scenarios[0].follow_up == FollowUp::Realistic);
  int lmm = 0;
  for (const auto& m : t1.methods) lmm += is_lmm(m.engine);
  CHECK(lmm == 6);
  for (const char* f : {"tableS1_optimal.json", "tableS2_adjustment.json", "tableS3_unstructured.json"})
    CHECK_NOTHROW(parse_config(kConfigs / f));
}

TEST_CASE("validation errors name the field") {
  std::string e = config_error(config_with(
      R"(, "realistic_mix": {"optimal": 0.2, "first_month": 0.5, "usual_care": 0.2})", kOneMethod));
  CHECK(e.find("/scenarios/0/realistic_mix") != std::string::npos);
  e = config_error(config_with("", "[]"));
  CHECK(e.find("no methods") != std::string::npos);
  e = config_error(config_with(R"(, "n_per_sight": 10)", kOneMethod));
  CHECK(e.find("n_per_sight") != std::string::npos);
  e = config_error(config_with(R"(, "covariance": {"kind": "toeplitz"})", kOneMethod));
  CHECK(e.find("/scenarios/0/covariance/kind") != std::string::npos);
  e = config_error(config_with("", R"([{"key": "m", "selection": "median", "engine": "wgee"}])"));
  CHECK(e.find("/methods/0/selection") != std::string::npos);
  e = config_error(config_with(R"(, "n_per_site": "many")", kOneMethod));
  CHECK(e.find("/scenarios/0/n_per_site") != std::string::npos);
  e = config_error(config_with("", R"([{"key": "m", "selection": "random", "engine": "lmm_car1"}])"));
  CHECK(e.find("/methods/0") != std::string::npos);
  CHECK(!config_error("{not json").empty());
  CHECK(!config_error(R"({"scenarios": [{"id": "a"}, {"id": "a"}], "methods": )" + kOneMethod + "}").empty());
}

TEST_CASE("defaults merge under scenario fields") {
  const RunConfig c = parse_config_text(R"({
    "defaults": {"n_per_site": 20, "trend": "quadratic", "covariance": {"kind": "car1", "rho": 0.5}},
    "scenarios": [{"id": "a"}, {"id": "b", "n_per_site": 40, "covariance": {"sigma2": 4}}],
    "methods": )" + kOneMethod + "}");
  CHECK(c.scenarios[0].n_per_site == 20);
  CHECK(c.scenarios[1].n_per_site == 40);
  CHECK(c.scenarios[1].trend.kind == TrendKind::Quadratic);
  CHECK(c.scenarios[1].covariance.kind == CovKind::CAR1);
  CHECK(c.scenarios[1].covariance.rho == 0.5);
  CHECK(c.scenarios[1].covariance.sigma2 == 4.0);
}

TEST_CASE("CSV emission") {
  std::ostringstream empty;
  write_csv({}, empty);
  CHECK(empty.str() ==
        "scenario_id,method,selection,time_adjust,effect_model,engine,estimand_kind,truth,n_reps,n_converged,"
        "mean_estimate,bias,empirical_se,median_model_se,coverage,rejection_rate,mc_se_rejection\n");

  ScenarioSummary s;
  s.scenario_id = "ramp";
  s.method_key = "wgee_none";
  s.method.selection = Selection::All;
  s.method.engine = Engine::Wgee;
  s.estimand.kind = EstimandRefKind::ConstantPlim;
  s.n_reps = 10;
  s.n_converged = 10;
  s.mean_estimate = -0.8;
  s.empirical_se = 0.3;
  s.median_model_se = 0.29;
  s.rejection_rate = 0.4;
  s.mc_se_rejection = 0.15;
  std::ostringstream os;
  write_csv({s}, os);
  const std::string row = os.str().substr(os.str().find('\n') + 1);
  CHECK(row == "ramp,wgee_none,all,splines3,constant,wgee,ConstantPlim,,10,10,-0.800000,,0.300000,0.290000,,"
               "0.400000,0.150000\n");

  std::ostringstream again;
  write_csv({s}, again);
  CHECK(again.str() == os.str());
  std::ostringstream text;
  write_text({s}, text);
  CHECK(text.str().find("**") != std::string::npos);
}

TEST_CASE("command line exit codes") {
  CHECK(cli("validate --config " + (kConfigs / "table1_realistic.json").string()).code == 0);
  const Run missing = cli("simulate");
  CHECK(missing.code == 2);
  CHECK(missing.err.find("--config") != std::string::npos);
  CHECK(cli("simulate --config x.json --frobnicate").code == 2);
  CHECK(cli("validate --config /nonexistent.json").code == 1);
  CHECK(cli("").code == 2);
}

TEST_CASE("command line cohort generation") {
  const fs::path out = fs::temp_directory_path() / "pragsim_cli_test" / "cohort.json";
  CHECK(cli("cohort generate --size 500 --seed 4 --out " + out.string()).code == 0);
  CHECK(Cohort::load_json(out).size() == 500);
}

TEST_CASE("command line simulation is identical across thread counts") {
  const fs::path cfg = small_config();
  const fs::path dir = cfg.parent_path();
  const std::string base = "simulate --config " + cfg.string() + " --reps 4 --seed 8 ";
  REQUIRE(cli(base + "--threads 1 --out " + (dir / "t1.csv").string()).code == 0);
  REQUIRE(cli(base + "--threads 4 --out " + (dir / "t4.csv").string()).code == 0);
  const std::string a = slurp(dir / "t1.csv");
  CHECK(a == slurp(dir / "t4.csv"));
  // Header plus 2 scenarios x 3 methods.
  CHECK(std::count(a.begin(), a.end(), '\n') == 7);
  // The all-scores constant model has no ramp estimand, so truth and coverage are empty.
  const auto pos = a.find("ramp,lmm_exp,");
  REQUIRE(pos != std::string::npos);
  CHECK(a.find(",ConstantPlim,,", pos) == a.find(",ConstantPlim,", pos));
  CHECK(a.find(",ConstantPlim,", pos) != std::string::npos);
  const Run text = cli(base + "--format text");
  CHECK(text.code == 0);
  CHECK(text.out.find("ramp") != std::string::npos);
}

TEST_CASE("command line oracle") {
  const Run r = cli("oracle --config " + small_config().string() +
                    " --scenario ramp --method closest12_none --n-big 20000 --k-reps 100 --seed 3");
  CHECK(r.code == 0);
  CHECK(r.out.find("closest12_none plim = -") != std::string::npos);
  CHECK(r.out.find("+/-") != std::string::npos);
  CHECK(cli("oracle --config " + small_config().string() + " --scenario ramp --method closest12_none --n-big 100")
            .code == 1);
}
