#include "entlab/config.hpp"

#include <cmath>
#include <cstdlib>
#include <fstream>

#include "entlab/typical.hpp"

namespace entlab::cli {

namespace {

[[noreturn]] void bad(const std::string& msg) { throw ConfigError(msg); }

const nlohmann::json& need(const nlohmann::json& j, const char* key,
                           const char* ctx) {
  if (!j.is_object() || !j.contains(key)) {
    bad(std::string(ctx) + ": missing field \"" + key + "\"");
  }
  return j.at(key);
}

double need_num(const nlohmann::json& j, const char* key, const char* ctx) {
  const auto& v = need(j, key, ctx);
  if (!v.is_number()) bad(std::string(ctx) + ": \"" + key + "\" must be a number");
  return v.get<double>();
}

Eigen::VectorXd num_list(const nlohmann::json& v, const char* ctx) {
  if (!v.is_array() || v.empty()) {
    bad(std::string(ctx) + " must be a nonempty array of numbers");
  }
  Eigen::VectorXd out(static_cast<long>(v.size()));
  for (size_t i = 0; i < v.size(); ++i) {
    if (!v.at(i).is_number()) bad(std::string(ctx) + " must contain numbers");
    out[static_cast<long>(i)] = v.at(i).get<double>();
  }
  return out;
}

}  // namespace

ReferenceMeasure measure_from_json(const nlohmann::json& j) {
  const std::string type = need(j, "type", "measure").get<std::string>();
  double scale = 1.0;
  if (j.contains("scale")) {
    scale = j.at("scale").get<double>();
    if (!(scale > 0.0)) bad("measure: scale must be > 0");
  }
  ReferenceMeasure out = [&]() -> ReferenceMeasure {
    if (type == "discrete") {
      Eigen::VectorXd w = num_list(need(j, "weights", "measure"), "weights");
      std::vector<std::string> atoms;
      if (j.contains("atoms")) {
        for (const auto& a : j.at("atoms")) atoms.push_back(a.get<std::string>());
      }
      return ReferenceMeasure::discrete(std::move(w), std::move(atoms));
    }
    if (type == "counting") {
      return ReferenceMeasure::counting(
          static_cast<int>(need_num(j, "n", "measure")));
    }
    if (type == "interval") {
      return ReferenceMeasure::interval(need_num(j, "a", "measure"),
                                        need_num(j, "b", "measure"));
    }
    if (type == "box") {
      return ReferenceMeasure::box(
          num_list(need(j, "lower", "measure"), "lower"),
          num_list(need(j, "upper", "measure"), "upper"));
    }
    if (type == "annulus") {
      return ReferenceMeasure::annulus(need_num(j, "r_min", "measure"),
                                       need_num(j, "r_max", "measure"));
    }
    if (type == "circle") {
      return ReferenceMeasure::circle(need_num(j, "radius", "measure"));
    }
    if (type == "product") {
      return ReferenceMeasure::product(
          measure_from_json(need(j, "left", "measure")),
          measure_from_json(need(j, "right", "measure")));
    }
    if (type == "group-haar") {
      double haar_scale = 1.0;
      if (j.contains("haar_scale")) haar_scale = j.at("haar_scale").get<double>();
      if (j.contains("group")) {
        return ReferenceMeasure::group_haar(
            FiniteGroup::from_json(j.at("group")), haar_scale);
      }
      if (j.contains("group_file")) {
        const std::filesystem::path p = j.at("group_file").get<std::string>();
        std::ifstream f(p);
        if (!f) throw Error("cannot open group file " + p.string());
        nlohmann::json g;
        f >> g;
        return ReferenceMeasure::group_haar(FiniteGroup::from_json(g),
                                            haar_scale);
      }
      bad("measure: group-haar needs \"group\" or \"group_file\"");
    }
    bad("measure: unknown type \"" + type + "\"");
  }();
  return scale == 1.0 ? out : out.scaled(scale);
}

Density density_from_json(const nlohmann::json& j, const ReferenceMeasure& mu) {
  const std::string preset = need(j, "preset", "density").get<std::string>();
  if (preset == "uniform") return densities::uniform(mu);
  if (preset == "pmf") {
    return densities::pmf(mu, num_list(need(j, "p", "density"), "density.p"));
  }
  if (preset == "bernoulli") {
    return densities::bernoulli(mu, need_num(j, "p", "density"));
  }
  if (preset == "bernoulli-product") {
    const Eigen::VectorXd p = num_list(need(j, "p", "density"), "density.p");
    return densities::bernoulli_product(
        mu, std::vector<double>(p.data(), p.data() + p.size()));
  }
  if (preset == "truncated-gaussian") {
    const int d = mu.point_dim();
    auto broadcast = [&](const nlohmann::json& v, const char* name) {
      if (v.is_number()) {
        return Eigen::VectorXd::Constant(d, v.get<double>()).eval();
      }
      Eigen::VectorXd out = num_list(v, name);
      if (out.size() != d) bad(std::string("density: ") + name + " has wrong dimension");
      return out;
    };
    return densities::truncated_gaussian(
        mu, broadcast(need(j, "mean", "density"), "mean"),
        broadcast(need(j, "sigma", "density"), "sigma"));
  }
  if (preset == "annulus-radial") {
    const std::string profile =
        need(j, "profile", "density").get<std::string>();
    if (profile == "uniform") return densities::annulus_radial_uniform(mu);
    if (profile == "gaussian") {
      return densities::annulus_radial_gaussian(
          mu, need_num(j, "mean", "density"), need_num(j, "sigma", "density"));
    }
    bad("density: annulus-radial profile must be uniform or gaussian");
  }
  if (preset == "grid") {
    const Eigen::VectorXd v = num_list(need(j, "values", "density"), "values");
    return densities::grid1d(
        mu, std::vector<double>(v.data(), v.data() + v.size()));
  }
  bad("density: unknown preset \"" + preset + "\"");
}

Disintegration disintegration_from_json(const nlohmann::json& j,
                                        const ReferenceMeasure& total) {
  const std::string type = need(j, "type", "disintegration").get<std::string>();
  if (type == "discrete-map") {
    const auto& mj = need(j, "map", "disintegration");
    if (!mj.is_array() || mj.empty()) bad("disintegration: map must be an array");
    std::vector<int> map;
    for (const auto& v : mj) map.push_back(v.get<int>());
    return Disintegration::discrete_map(
        total, std::move(map),
        measure_from_json(need(j, "base", "disintegration")));
  }
  if (type == "product-projection") {
    return Disintegration::product_projection(total);
  }
  if (type == "polar") {
    return Disintegration::polar(total);
  }
  if (type == "group-quotient") {
    const auto* gh = std::get_if<GroupHaar>(&total.data());
    if (gh == nullptr) {
      throw Error("group-quotient requires a group-haar measure");
    }
    const auto& sj = need(j, "subgroup", "disintegration");
    std::vector<int> subgroup;
    for (const auto& v : sj) subgroup.push_back(v.get<int>());
    const double base_scale =
        j.contains("base_scale") ? j.at("base_scale").get<double>() : 1.0;
    std::optional<double> fiber_scale;
    if (j.contains("fiber_scale")) fiber_scale = j.at("fiber_scale").get<double>();
    return Disintegration::group_quotient(gh->group, std::move(subgroup),
                                          total.scale() * gh->scale, base_scale,
                                          fiber_scale);
  }
  bad("disintegration: unknown type \"" + type + "\"");
}

ExperimentConfig parse_config(const nlohmann::json& j) {
  if (!j.is_object()) bad("config must be a JSON object");
  ExperimentConfig c;
  c.kind = need(j, "kind", "config").get<std::string>();
  const bool known = c.kind == "entropy" || c.kind == "chain-rule" ||
                     c.kind == "aep" || c.kind == "slice" ||
                     c.kind == "deformed-polar";
  if (!known) bad("config: unknown kind \"" + c.kind + "\"");
  if (j.contains("unit")) c.unit = Unit::parse(j.at("unit").get<std::string>());
  if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
  if (j.contains("workers")) {
    c.workers = j.at("workers").get<int>();
    if (*c.workers < 1) bad("config: workers must be >= 1");
  }
  if (j.contains("mc")) c.monte_carlo = j.at("mc").get<bool>();
  if (j.contains("samples")) {
    c.samples = j.at("samples").get<std::int64_t>();
    if (c.samples < 1000) bad("config: samples must be >= 1000");
  }
  if (j.contains("epsilon")) c.epsilon = j.at("epsilon").get<double>();
  if (j.contains("tolerance")) c.tolerance = j.at("tolerance").get<double>();
  if (j.contains("n_list")) {
    for (const auto& v : j.at("n_list")) c.n_list.push_back(v.get<int>());
  }
  if (j.contains("delta_list")) {
    for (const auto& v : j.at("delta_list")) {
      c.delta_list.push_back(v.get<double>());
    }
  }
  if (j.contains("quadrature")) {
    const auto& q = j.at("quadrature");
    if (q.contains("panels")) c.quad.panels = q.at("panels").get<int>();
    if (q.contains("annulus_panels")) {
      c.quad.annulus_panels = q.at("annulus_panels").get<int>();
    }
    if (c.quad.panels < 2 || c.quad.annulus_panels < 2) {
      bad("config: quadrature panels must be >= 2");
    }
  }
  c.measure_json = need(j, "measure", "config");
  c.density_json = need(j, "density", "config");
  if (c.kind == "chain-rule" || c.kind == "slice") {
    c.disintegration_json = need(j, "disintegration", "config");
  }
  if (c.kind == "aep" || c.kind == "slice") {
    if (c.n_list.empty()) bad("config: " + c.kind + " needs a nonempty n_list");
    if (c.delta_list.empty()) {
      bad("config: " + c.kind + " needs a nonempty delta_list");
    }
  }
  if (c.monte_carlo && !c.seed) {
    bad("config: seed is mandatory when Monte Carlo is used");
  }
  if (j.contains("output")) {
    const auto& o = j.at("output");
    if (o.contains("json")) c.json_out = o.at("json").get<std::string>();
    if (o.contains("csv")) c.csv_out = o.at("csv").get<std::string>();
  }
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) bad("cannot open config file " + path.string());
  nlohmann::json j;
  try {
    f >> j;
  } catch (const nlohmann::json::exception& e) {
    bad("config is not valid JSON: " + std::string(e.what()));
  }
  return parse_config(j);
}

namespace {

std::string mark(bool ok) { return ok ? "[pass]" : "[FAIL]"; }

void write_outputs(const ExperimentConfig& c, const nlohmann::ordered_json& j,
                   const std::optional<std::string>& csv) {
  const std::filesystem::path jpath =
      c.json_out.value_or("entlab_" + c.kind + ".json");
  write_file(jpath, j.dump(2) + "\n");
  if (csv) {
    const std::filesystem::path cpath =
        c.csv_out.value_or("entlab_" + c.kind + ".csv");
    write_file(cpath, *csv);
  }
}

int env_workers() {
  if (const char* w = std::getenv("ENTLAB_WORKERS")) {
    const int v = std::atoi(w);
    if (v >= 1) return v;
  }
  return 1;
}

}  // namespace

RunResult run_experiment(const ExperimentConfig& c) {
  const ReferenceMeasure mu = measure_from_json(c.measure_json);
  const Density density = density_from_json(c.density_json, mu);
  const ProbMeasure rho = make_prob(mu, density, c.quad);
  const double ud = c.unit.divisor();
  const int workers = c.workers.value_or(env_workers());
  std::string summary;
  bool ok = true;

  if (c.kind == "entropy") {
    const EntropyValue e = entropy(rho, c.quad);
    char buf[160];
    std::snprintf(buf, sizeof(buf), "S = %.6f %s (method=%s, stderr=%.3g)\n",
                  e.value / ud, c.unit.name(), method_name(e.method),
                  e.error_estimate / ud);
    summary = buf;
    nlohmann::ordered_json j;
    j["kind"] = c.kind;
    j["entropy"] = to_json(e, c.unit);
    write_outputs(c, j, std::nullopt);
  } else if (c.kind == "chain-rule") {
    const Disintegration D = disintegration_from_json(c.disintegration_json, mu);
    const ChainRuleReport rep = chain_rule_report(rho, D, c.quad);
    ok = rep.within_tolerance();
    char buf[256];
    std::snprintf(buf, sizeof(buf),
                  "total = %.6f  marginal = %.6f  conditional = %.6f (%s)\n"
                  "discrepancy = %.3g (tolerance %.1g) %s\n",
                  rep.total / ud, rep.marginal / ud, rep.conditional / ud,
                  c.unit.name(), rep.discrepancy, rep.tolerance,
                  mark(ok).c_str());
    summary = buf;
    nlohmann::ordered_json j;
    j["kind"] = c.kind;
    j["report"] = to_json(rep, c.unit);
    write_outputs(c, j, fiber_table_csv(rep, c.unit));
  } else if (c.kind == "deformed-polar") {
    const DeformedPolarReport rep = deformed_chain_rule_comparison(rho, c.quad);
    const bool flat_ok = rep.flat_identity_residual <= c.tolerance;
    const bool cond_ok = rep.conditional_identity_residual <= c.tolerance;
    ok = flat_ok && cond_ok && rep.polar.within_tolerance();
    char buf[320];
    std::snprintf(
        buf, sizeof(buf),
        "S_annulus = %.6f  S_flat = %.6f  E[ln R] = %.6f (%s)\n"
        "flat identity residual = %.3g %s  conditional identity residual = "
        "%.3g %s  chain discrepancy = %.3g %s\n",
        rep.polar.total / ud, rep.flat_total / ud, rep.mean_log_radius / ud,
        c.unit.name(), rep.flat_identity_residual, mark(flat_ok).c_str(),
        rep.conditional_identity_residual, mark(cond_ok).c_str(),
        rep.polar.discrepancy, mark(rep.polar.within_tolerance()).c_str());
    summary = buf;
    nlohmann::ordered_json j;
    j["kind"] = c.kind;
    j["report"] = to_json(rep, c.unit);
    write_outputs(c, j, fiber_table_csv(rep.polar, c.unit));
  } else if (c.kind == "aep") {
    std::vector<SweepRow> rows;
    auto reports = nlohmann::ordered_json::array();
    const double S = entropy(rho, c.quad).value;
    for (const double delta : c.delta_list) {
      for (const int n : c.n_list) {
        const TypicalSetSpec spec{rho, n, delta, S};
        const TypicalSetReport rep =
            c.monte_carlo ? monte_carlo_typical(spec, c.samples, *c.seed,
                                                c.epsilon, workers)
                          : exact_typical(spec, c.epsilon);
        SweepRow row{n,
                     delta,
                     rep.rate,
                     S,
                     rep.upper_bound,
                     rep.lower_bound,
                     rep.prob.value,
                     rep.prob.value > 0.0 && std::isfinite(rep.rate) &&
                         std::fabs(rep.rate - S) <= delta};
        bool row_ok = true;
        if (!c.monte_carlo) {
          // Declared checks: the n-independent upper bound, the lower
          // bound wherever its premise holds, and the rate band at P > 0.
          if (!(rep.volume.value <= rep.upper_bound)) row_ok = false;
          if (rep.lower_premise && !(rep.volume.value >= rep.lower_bound)) {
            row_ok = false;
          }
          if (rep.prob.value > 0.0 && !row.rate_in_band) row_ok = false;
        }
        ok = ok && row_ok;
        char buf[200];
        std::snprintf(buf, sizeof(buf),
                      "n=%2d delta=%.3g P(A)=%.6f rate=%.6f %s\n", n, delta,
                      rep.prob.value, rep.rate / ud, mark(row_ok).c_str());
        summary += buf;
        rows.push_back(row);
        reports.push_back(to_json(rep, c.unit));
      }
    }
    nlohmann::ordered_json j;
    j["kind"] = c.kind;
    j["entropy_nats"] = S;
    j["reports"] = std::move(reports);
    write_outputs(c, j, sweep_csv(rows, c.unit));
  } else {  // slice
    const Disintegration D = disintegration_from_json(c.disintegration_json, mu);
    std::vector<SliceRatioReport> rows;
    auto reports = nlohmann::ordered_json::array();
    for (const double delta : c.delta_list) {
      for (const int n : c.n_list) {
        const SliceRatioReport rep = slice_ratio(rho, D, n, delta, c.quad);
        char buf[200];
        std::snprintf(buf, sizeof(buf),
                      "n=%2d delta=%.3g log-ratio/n=%.6f conditional=%.6f %s\n",
                      n, delta, rep.log_ratio_rate / ud,
                      rep.conditional_term / ud,
                      rep.defined ? "" : "[not-yet-defined]");
        summary += buf;
        rows.push_back(rep);
        reports.push_back(to_json(rep, c.unit));
      }
    }
    // Declared check: the marginal typical set is nonempty at the largest n.
    ok = !rows.empty() && rows.back().defined;
    nlohmann::ordered_json j;
    j["kind"] = c.kind;
    j["reports"] = std::move(reports);
    write_outputs(c, j, slice_csv(rows, c.unit));
  }

  summary += ok ? "all checks passed\n" : "CHECKS FAILED\n";
  return RunResult{ok ? 0 : 1, summary};
}

std::string config_schema() {
  return R"schema({
  "kind": "entropy | chain-rule | aep | slice | deformed-polar",
  "unit": "nats | bits (optional, default nats)",
  "seed": "uint64, mandatory when mc is true",
  "workers": "int >= 1 (optional; ENTLAB_WORKERS overrides when absent)",
  "mc": "bool (aep kind: use monte_carlo_typical instead of exact_typical)",
  "samples": "int >= 1000 (Monte Carlo draws, default 100000)",
  "epsilon": "real in (0,1) for the lower volume bound (default 0.1)",
  "tolerance": "deformed-polar identity tolerance (default 1e-3)",
  "n_list": "[int...] block lengths (aep, slice)",
  "delta_list": "[real...] typicality half-widths in nats (aep, slice)",
  "quadrature": {"panels": "int (default 2048)", "annulus_panels": "int (default 4096)"},
  "measure": {
    "type": "discrete | counting | interval | box | annulus | circle | product | group-haar",
    "scale": "global scale factor alpha > 0 (optional)",
    "...": "per type: weights[/atoms]; n; a,b; lower,upper; r_min,r_max; radius; left,right; group|group_file[,haar_scale]"
  },
  "density": {
    "preset": "uniform | pmf | bernoulli | bernoulli-product | truncated-gaussian | annulus-radial | grid",
    "...": "per preset: p; p; p-list; mean,sigma; profile[,mean,sigma]; values"
  },
  "disintegration": {
    "type": "discrete-map | product-projection | polar | group-quotient",
    "...": "discrete-map: map,base; group-quotient: subgroup[,base_scale,fiber_scale]"
  },
  "output": {"json": "path", "csv": "path"}
}
)schema";
}

}  // namespace entlab::cli
