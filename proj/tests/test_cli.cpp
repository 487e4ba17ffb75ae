#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <array>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "entlab/config.hpp"

namespace fs = std::filesystem;

namespace {

struct CliResult {
  int status = -1;
  std::string out;
};

CliResult run_cli(const std::string& args) {
  const std::string cmd = std::string(ENTLAB_CLI_PATH) + " " + args + " 2>&1";
  CliResult res;
  FILE* pipe = popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  std::array<char, 4096> buf{};
  while (fgets(buf.data(), buf.size(), pipe) != nullptr) res.out += buf.data();
  const int rc = pclose(pipe);
  res.status = WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
  return res;
}

fs::path temp_dir() {
  const fs::path dir =
      fs::temp_directory_path() /
      ("entlab_cli_test_" + std::to_string(::getpid()));
  fs::create_directories(dir);
  return dir;
}

fs::path write_config(const fs::path& dir, const std::string& name,
                      const nlohmann::json& j) {
  const fs::path p = dir / name;
  std::ofstream f(p);
  f << j.dump(2);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  REQUIRE(f.good());
  return std::string((std::istreambuf_iterator<char>(f)),
                     std::istreambuf_iterator<char>());
}

}  // namespace

TEST_CASE("schema subcommand prints the config document") {
  const CliResult res = run_cli("schema");
  CHECK(res.status == 0);
  CHECK(res.out.find("\"kind\"") != std::string::npos);
  CHECK(res.out.find("disintegration") != std::string::npos);
}

TEST_CASE("config violations exit with status 2") {
  const fs::path dir = temp_dir();
  const auto missing_kind =
      write_config(dir, "bad1.json", {{"measure", {{"type", "counting"}}}});
  CHECK(run_cli("run " + missing_kind.string()).status == 2);

  nlohmann::json no_nlist{{"kind", "aep"},
                          {"measure", {{"type", "counting"}, {"n", 2}}},
                          {"density", {{"preset", "uniform"}}},
                          {"delta_list", {0.2}}};
  CHECK(run_cli("run " + write_config(dir, "bad2.json", no_nlist).string())
            .status == 2);

  nlohmann::json mc_no_seed{{"kind", "aep"},
                            {"measure", {{"type", "counting"}, {"n", 2}}},
                            {"density", {{"preset", "uniform"}}},
                            {"mc", true},
                            {"n_list", {4}},
                            {"delta_list", {0.2}}};
  CHECK(run_cli("run " + write_config(dir, "bad3.json", mc_no_seed).string())
            .status == 2);

  CHECK(run_cli("run /nonexistent/path.json").status == 2);
}

TEST_CASE("entropy run: summary, artifact, exit status") {
  const fs::path dir = temp_dir();
  const fs::path out = dir / "entropy.json";
  nlohmann::json cfg{{"kind", "entropy"},
                     {"measure", {{"type", "counting"}, {"n", 8}}},
                     {"density", {{"preset", "uniform"}}},
                     {"output", {{"json", out.string()}}}};
  const CliResult res =
      run_cli("run " + write_config(dir, "entropy.json.cfg", cfg).string());
  CHECK(res.status == 0);
  CHECK(res.out.find("S = 2.079442") != std::string::npos);
  const auto j = nlohmann::json::parse(slurp(out));
  CHECK(std::fabs(j["entropy"]["value_nats"].get<double>() - std::log(8.0)) <=
        1e-12);
}

TEST_CASE("chain-rule run over the group fixture file") {
  const fs::path dir = temp_dir();
  const fs::path out = dir / "chain.json";
  nlohmann::json cfg{
      {"kind", "chain-rule"},
      {"measure",
       {{"type", "group-haar"},
        {"group_file", std::string(ENTLAB_FIXTURES) + "/z6_group.json"}}},
      {"density", {{"preset", "pmf"}, {"p", {0.05, 0.10, 0.15, 0.20, 0.25, 0.25}}}},
      {"disintegration", {{"type", "group-quotient"}, {"subgroup", {0, 3}}}},
      {"output",
       {{"json", out.string()}, {"csv", (dir / "chain.csv").string()}}}};
  const CliResult res =
      run_cli("run " + write_config(dir, "chain.cfg", cfg).string());
  CHECK(res.status == 0);
  const auto j = nlohmann::json::parse(slurp(out));
  CHECK(j["report"]["discrepancy"].get<double>() <= 1e-12);
  CHECK(j["report"]["within_tolerance"].get<bool>());
}

TEST_CASE("corrupted group table exits with status 3 and a diagnostic") {
  const fs::path dir = temp_dir();
  nlohmann::json cfg{
      {"kind", "entropy"},
      {"measure",
       {{"type", "group-haar"},
        {"group_file", std::string(ENTLAB_FIXTURES) + "/bad_group.json"}}},
      {"density", {{"preset", "uniform"}}}};
  const CliResult res =
      run_cli("run " + write_config(dir, "bad_group.cfg", cfg).string());
  CHECK(res.status == 3);
  CHECK(res.out.find("Latin-square") != std::string::npos);
}

TEST_CASE("deformed-polar with an unattainable tolerance exits 1") {
  const fs::path dir = temp_dir();
  nlohmann::json cfg{{"kind", "deformed-polar"},
                     {"measure",
                      {{"type", "annulus"}, {"r_min", 1.0}, {"r_max", 2.0}}},
                     {"density", {{"preset", "uniform"}}},
                     {"tolerance", 1e-300},
                     {"quadrature", {{"panels", 128}, {"annulus_panels", 256}}},
                     {"output",
                      {{"json", (dir / "dp.json").string()},
                       {"csv", (dir / "dp.csv").string()}}}};
  const CliResult res =
      run_cli("run " + write_config(dir, "dp.cfg", cfg).string());
  CHECK(res.status == 1);
  CHECK(res.out.find("[FAIL]") != std::string::npos);
}

TEST_CASE("aep run: seeded Monte Carlo artifacts are byte-identical") {
  const fs::path dir = temp_dir();
  auto cfg_for = [&](const std::string& tag) {
    nlohmann::json cfg{{"kind", "aep"},
                       {"measure", {{"type", "counting"}, {"n", 2}}},
                       {"density", {{"preset", "bernoulli"}, {"p", 0.3}}},
                       {"mc", true},
                       {"seed", 2024},
                       {"samples", 20000},
                       {"n_list", {8, 16}},
                       {"delta_list", {0.2}},
                       {"output",
                        {{"json", (dir / (tag + ".json")).string()},
                         {"csv", (dir / (tag + ".csv")).string()}}}};
    return write_config(dir, tag + ".cfg", cfg);
  };
  CHECK(run_cli("run " + cfg_for("a").string()).status == 0);
  CHECK(run_cli("run " + cfg_for("b").string()).status == 0);
  CHECK(slurp(dir / "a.json") == slurp(dir / "b.json"));
  CHECK(slurp(dir / "a.csv") == slurp(dir / "b.csv"));
  const std::string csv = slurp(dir / "a.csv");
  CHECK(csv.rfind("n,delta,rate,S,upper,lower,prob\n", 0) == 0);
}

TEST_CASE("aep run: exact bounds give status 0 and pass marks") {
  const fs::path dir = temp_dir();
  nlohmann::json cfg{{"kind", "aep"},
                     {"measure", {{"type", "counting"}, {"n", 2}}},
                     {"density", {{"preset", "bernoulli"}, {"p", 0.3}}},
                     {"n_list", {4, 8, 16, 24}},
                     {"delta_list", {0.2}},
                     {"epsilon", 0.1},
                     {"output",
                      {{"json", (dir / "rates.json").string()},
                       {"csv", (dir / "rates.csv").string()}}}};
  const CliResult res = run_cli("run " + write_config(dir, "aep.cfg", cfg).string());
  CHECK(res.status == 0);
  CHECK(res.out.find("[pass]") != std::string::npos);
  CHECK(res.out.find("[FAIL]") == std::string::npos);
}

TEST_CASE("unit conversion: bits are nats over ln 2, row by row") {
  const fs::path dir = temp_dir();
  auto entropy_cfg = [&](const std::string& unit, const std::string& tag) {
    nlohmann::json cfg{{"kind", "entropy"},
                       {"unit", unit},
                       {"measure", {{"type", "counting"}, {"n", 8}}},
                       {"density", {{"preset", "uniform"}}},
                       {"output",
                        {{"json", (dir / (tag + ".json")).string()},
                         {"csv", (dir / (tag + ".csv")).string()}}}};
    return write_config(dir, tag + ".cfg", cfg);
  };
  CHECK(run_cli("run " + entropy_cfg("nats", "nats").string()).status == 0);
  CHECK(run_cli("run " + entropy_cfg("bits", "bits").string()).status == 0);
  const auto jn = nlohmann::json::parse(slurp(dir / "nats.json"));
  const auto jb = nlohmann::json::parse(slurp(dir / "bits.json"));
  const double nats = jn["entropy"]["value_nats"].get<double>();
  CHECK(jb["entropy"]["value_nats"].get<double>() == nats);
  CHECK(std::fabs(jb["entropy"]["value_bits"].get<double>() -
                  nats / std::numbers::ln2) <= 1e-12);

  // sweep CSV: the rate/S columns convert, masses do not
  auto aep_cfg = [&](const std::string& unit, const std::string& tag) {
    nlohmann::json cfg{{"kind", "aep"},
                       {"unit", unit},
                       {"measure", {{"type", "counting"}, {"n", 2}}},
                       {"density", {{"preset", "bernoulli"}, {"p", 0.3}}},
                       {"n_list", {8}},
                       {"delta_list", {0.2}},
                       {"output",
                        {{"json", (dir / (tag + ".json")).string()},
                         {"csv", (dir / (tag + ".csv")).string()}}}};
    return write_config(dir, tag + ".cfg", cfg);
  };
  CHECK(run_cli("run " + aep_cfg("nats", "sn").string()).status == 0);
  CHECK(run_cli("run " + aep_cfg("bits", "sb").string()).status == 0);
  auto parse_row = [](const std::string& csv) {
    std::vector<double> vals;
    const auto line_start = csv.find('\n') + 1;
    std::string row = csv.substr(line_start, csv.find('\n', line_start) - line_start);
    size_t pos = 0;
    while (pos <= row.size()) {
      const size_t comma = row.find(',', pos);
      vals.push_back(std::stod(row.substr(pos, comma - pos)));
      if (comma == std::string::npos) break;
      pos = comma + 1;
    }
    return vals;
  };
  const auto rn = parse_row(slurp(dir / "sn.csv"));
  const auto rb = parse_row(slurp(dir / "sb.csv"));
  REQUIRE(rn.size() == 7);
  // columns: n, delta, rate, S, upper, lower, prob
  CHECK(rb[2] == doctest::Approx(rn[2] / std::numbers::ln2).epsilon(1e-12));
  CHECK(rb[3] == doctest::Approx(rn[3] / std::numbers::ln2).epsilon(1e-12));
  CHECK(rb[4] == doctest::Approx(rn[4]).epsilon(1e-15));
  CHECK(rb[6] == doctest::Approx(rn[6]).epsilon(1e-15));
}

TEST_CASE("ENTLAB_WORKERS matches an explicit workers field") {
  const fs::path dir = temp_dir();
  auto cfg_for = [&](const std::string& tag, bool explicit_workers) {
    nlohmann::json cfg{{"kind", "aep"},
                       {"measure", {{"type", "counting"}, {"n", 2}}},
                       {"density", {{"preset", "bernoulli"}, {"p", 0.3}}},
                       {"mc", true},
                       {"seed", 555},
                       {"samples", 10000},
                       {"n_list", {8}},
                       {"delta_list", {0.2}},
                       {"output",
                        {{"json", (dir / (tag + ".json")).string()},
                         {"csv", (dir / (tag + ".csv")).string()}}}};
    if (explicit_workers) cfg["workers"] = 2;
    return write_config(dir, tag + ".cfg", cfg);
  };
  CHECK(run_cli("run " + cfg_for("explicit", true).string()).status == 0);
  const std::string env_cmd =
      "ENTLAB_WORKERS=2 " + std::string(ENTLAB_CLI_PATH) + " run " +
      cfg_for("env", false).string() + " >/dev/null 2>&1";
  CHECK(std::system(env_cmd.c_str()) == 0);
  CHECK(slurp(dir / "explicit.json") == slurp(dir / "env.json"));
}

TEST_CASE("slice run writes the ratio table") {
  const fs::path dir = temp_dir();
  nlohmann::json cfg{
      {"kind", "slice"},
      {"measure",
       {{"type", "product"},
        {"left", {{"type", "counting"}, {"n", 2}}},
        {"right", {{"type", "counting"}, {"n", 2}}}}},
      {"density", {{"preset", "bernoulli-product"}, {"p", {0.3, 0.5}}}},
      {"disintegration", {{"type", "product-projection"}}},
      {"n_list", {8, 16}},
      {"delta_list", {0.25}},
      {"output",
       {{"json", (dir / "slice.json").string()},
        {"csv", (dir / "slice.csv").string()}}}};
  const CliResult res =
      run_cli("run " + write_config(dir, "slice.cfg", cfg).string());
  CHECK(res.status == 0);
  const auto j = nlohmann::json::parse(slurp(dir / "slice.json"));
  for (const auto& rep : j["reports"]) {
    CHECK(std::fabs(rep["log_ratio_rate"].get<double>() - std::log(2.0)) <=
          1e-12);
  }
}
