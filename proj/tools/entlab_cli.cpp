// Experiment runner: `run <config.json>`, `selftest`, `schema`.
// Exit codes: 0 all declared checks passed, 1 a check failed,
// 2 config/schema violation, 3 numerical failure.

#include <clocale>
#include <cstdio>
#include <string>

#include <CLI11.hpp>

#include "entlab/acceptance.hpp"
#include "entlab/config.hpp"

namespace {

int do_run(const std::string& config_path, const std::string& unit_override) {
  entlab::cli::ExperimentConfig config =
      entlab::cli::load_config(config_path);
  if (!unit_override.empty()) {
    config.unit = entlab::Unit::parse(unit_override);
  }
  const entlab::cli::RunResult result = entlab::cli::run_experiment(config);
  std::fputs(result.summary.c_str(), stdout);
  return result.status;
}

int do_selftest(const std::string& outdir) {
  const auto results = entlab::run_acceptance(outdir);
  for (const auto& r : results) {
    std::printf("[%s] %2d %-28s %8.3f s  %s\n", r.passed ? "pass" : "FAIL",
                r.id, r.name.c_str(), r.seconds, r.detail.c_str());
  }
  const bool ok = entlab::all_passed(results);
  std::printf("%s (artifacts under %s)\n",
              ok ? "selftest passed" : "SELFTEST FAILED", outdir.c_str());
  return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  std::setlocale(LC_ALL, "C");
  CLI::App app{"entlab - entropy relative to reference measures: "
               "disintegrations, chain rules, and typical sets"};
  app.require_subcommand(1);

  std::string config_path;
  std::string unit_override;
  auto* run = app.add_subcommand("run", "run an experiment config");
  run->add_option("config", config_path, "experiment config JSON")->required();
  run->add_option("--unit", unit_override, "override report unit: nats|bits");

  std::string outdir = "selftest-artifacts";
  auto* selftest =
      app.add_subcommand("selftest", "run the full acceptance battery");
  selftest->add_option("--out", outdir, "artifact directory");

  auto* schema = app.add_subcommand("schema", "print the config schema");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) return do_run(config_path, unit_override);
    if (selftest->parsed()) return do_selftest(outdir);
    if (schema->parsed()) {
      std::fputs(entlab::cli::config_schema().c_str(), stdout);
      return 0;
    }
  } catch (const entlab::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const entlab::Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  }
  return 0;
}
