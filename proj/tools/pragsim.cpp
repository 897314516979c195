// Command-line front end: cohort generation, simulation grids, estimand
// oracles and config validation.

#include <cstdio>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "pragsim/cohort.hpp"
#include "pragsim/config.hpp"
#include "pragsim/emit.hpp"
#include "pragsim/error.hpp"
#include "pragsim/harness.hpp"

namespace {

using namespace pragsim;

int cmd_cohort(int size, std::uint64_t seed, const std::string& out) {
  const Cohort cohort = generate_cohort(default_generator_params(), size, seed);
  cohort.save_json(out);
  const CohortTargets s = summarize_cohort(cohort);
  std::fprintf(stderr,
               "wrote %d participants to %s\n"
               "  p_single %.4f  p_ge5 %.4f  mean %.3f  sd %.3f  p_month12 %.4f  p_window_10_13 %.4f  max %d\n",
               cohort.size(), out.c_str(), s.p_single, s.p_ge5, s.mean_count, s.sd_count, s.p_month12,
               s.p_window_10_13, static_cast<int>(s.max_count));
  return 0;
}

int cmd_simulate(const std::string& config, int reps, std::uint64_t seed, int threads, const std::string& out,
                 const std::string& format) {
  const RunConfig cfg = parse_config(config);
  GridOptions options;
  options.reps = reps;
  options.threads = threads;
  options.base_seed = seed;
  options.oracle = cfg.oracle;
  const auto summaries = run_grid(cfg.scenarios, cfg.methods, options);
  emit_summaries(summaries, format == "text" ? EmitFormat::Text : EmitFormat::Csv, out);
  int failed = 0;
  for (const auto& s : summaries)
    if (!s.error.empty()) {
      std::fprintf(stderr, "warning: %s / %s: %s\n", s.scenario_id.c_str(), s.method_key.c_str(), s.error.c_str());
      ++failed;
    }
  return failed == 0 ? 0 : 1;
}

int cmd_oracle(const std::string& config, const std::string& method_key, const std::string& scenario_id, int n_big,
               int k_reps, std::uint64_t seed, int threads) {
  const RunConfig cfg = parse_config(config);
  const ModelSpec* method = nullptr;
  for (const auto& m : cfg.methods)
    if (m.key == method_key) method = &m;
  if (method == nullptr) throw Error("no method with key \"" + method_key + "\" in " + config);

  CohortCache cache;
  bool any = false;
  for (const auto& s : cfg.scenarios) {
    if (!scenario_id.empty() && s.id != scenario_id) continue;
    any = true;
    const auto cohort = cache.get(s.cohort);
    const auto plim = oracle_constant_plim(s, std::vector<ModelSpec>{*method}, *cohort, n_big, k_reps, seed, threads);
    std::printf("%s %s plim = %.6f +/- %.6f (MC SE, %d fits of n = %d)\n", s.id.c_str(), method->key.c_str(),
                plim.front().value, plim.front().mc_se, plim.front().n_used, n_big);
  }
  if (!any) throw Error("no scenario with id \"" + scenario_id + "\" in " + config);
  return 0;
}

int cmd_validate(const std::string& config) {
  const RunConfig cfg = parse_config(config);
  std::printf("%s: ok (%zu scenarios, %zu methods)\n", config.c_str(), cfg.scenarios.size(), cfg.methods.size());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Simulation of pragmatic trials with irregular, intervention-dependent assessments"};
  app.require_subcommand(1);

  auto* cohort = app.add_subcommand("cohort", "Usual-care assessment cohorts");
  cohort->require_subcommand(1);
  auto* generate = cohort->add_subcommand("generate", "Generate a synthetic cohort and write it as JSON");
  int size = 20000;
  std::uint64_t cohort_seed = 20240723;
  std::string cohort_out;
  generate->add_option("--size", size, "Number of participants")->check(CLI::PositiveNumber);
  generate->add_option("--seed", cohort_seed, "Random seed");
  generate->add_option("--out", cohort_out, "Output JSON file")->required();

  auto* simulate = app.add_subcommand("simulate", "Run a scenario x method grid");
  std::string sim_config, sim_out = "-", format = "csv";
  int reps = 1000, threads = 1;
  std::uint64_t seed = 1;
  simulate->add_option("--config", sim_config, "Scenario/method configuration (JSON)")->required();
  simulate->add_option("--reps", reps, "Replicates per scenario")->check(CLI::PositiveNumber);
  simulate->add_option("--seed", seed, "Base seed");
  simulate->add_option("--threads", threads, "Worker threads")->check(CLI::PositiveNumber);
  simulate->add_option("--out", sim_out, "Output file ('-' for stdout)");
  simulate->add_option("--format", format, "Output format")->check(CLI::IsMember({"csv", "text"}));

  auto* oracle = app.add_subcommand("oracle", "Monte Carlo probability limit of a constant-effect estimator");
  std::string oracle_config, method_key, scenario_id;
  int n_big = kOracleMinN, k_reps = kOracleMinReps, oracle_threads = 1;
  std::uint64_t oracle_seed = OracleSettings{}.seed;
  oracle->add_option("--config", oracle_config, "Scenario/method configuration (JSON)")->required();
  oracle->add_option("--method", method_key, "Method key")->required();
  oracle->add_option("--scenario", scenario_id, "Only this scenario id");
  oracle->add_option("--n-big", n_big, "Participants per oracle dataset");
  oracle->add_option("--k-reps", k_reps, "Oracle datasets");
  oracle->add_option("--seed", oracle_seed, "Oracle seed");
  oracle->add_option("--threads", oracle_threads, "Worker threads")->check(CLI::PositiveNumber);

  auto* validate_cmd = app.add_subcommand("validate", "Validate a configuration file");
  std::string validate_config;
  validate_cmd->add_option("--config", validate_config, "Scenario/method configuration (JSON)")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n\n";
    // Help for the innermost subcommand that was given.
    const CLI::App* target = &app;
    for (const CLI::App* sub = &app; !sub->get_subcommands().empty();) {
      sub = sub->get_subcommands().front();
      target = sub;
    }
    std::cerr << target->help();
    return 2;
  }

  try {
    if (*generate) return cmd_cohort(size, cohort_seed, cohort_out);
    if (*simulate) return cmd_simulate(sim_config, reps, seed, threads, sim_out, format);
    if (*oracle) return cmd_oracle(oracle_config, method_key, scenario_id, n_big, k_reps, oracle_seed, oracle_threads);
    if (*validate_cmd) return cmd_validate(validate_config);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}
