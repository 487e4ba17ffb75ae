#include "entlab/report_io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

namespace entlab {

double Unit::divisor() const { return bits ? std::numbers::ln2 : 1.0; }

Unit Unit::parse(const std::string& s) {
  if (s == "nats") return Unit{false};
  if (s == "bits") return Unit{true};
  throw ConfigError("unit must be \"nats\" or \"bits\", got \"" + s + "\"");
}

std::string format_g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

nlohmann::ordered_json to_json(const EntropyValue& e, Unit unit) {
  nlohmann::ordered_json j;
  j["value_nats"] = e.value;
  if (unit.bits) j["value_bits"] = e.value / unit.divisor();
  j["method"] = method_name(e.method);
  j["stderr"] = e.error_estimate;
  return j;
}

nlohmann::ordered_json to_json(const ChainRuleReport& r, Unit unit) {
  const double d = unit.divisor();
  nlohmann::ordered_json j;
  j["unit"] = unit.name();
  j["total"] = r.total / d;
  j["marginal"] = r.marginal / d;
  j["conditional"] = r.conditional / d;
  j["discrepancy"] = r.discrepancy / d;
  j["tolerance"] = r.tolerance;
  j["within_tolerance"] = r.within_tolerance();
  j["method"] = method_name(r.method);
  auto rows = nlohmann::ordered_json::array();
  for (const auto& f : r.fibers) {
    nlohmann::ordered_json row;
    row["t"] = f.t;
    if (!f.label.empty()) row["label"] = f.label;
    row["fiber_entropy"] = f.fiber_entropy / d;
    row["pushforward_density"] = f.pushforward_density;
    rows.push_back(std::move(row));
  }
  j["fibers"] = std::move(rows);
  return j;
}

nlohmann::ordered_json to_json(const DeformedPolarReport& r, Unit unit) {
  const double d = unit.divisor();
  nlohmann::ordered_json j;
  j["unit"] = unit.name();
  j["polar"] = to_json(r.polar, unit);
  j["flat_total"] = r.flat_total / d;
  j["mean_log_radius"] = r.mean_log_radius / d;
  j["conditional_flat"] = r.conditional_flat / d;
  j["flat_identity_residual"] = r.flat_identity_residual / d;
  j["conditional_identity_residual"] = r.conditional_identity_residual / d;
  return j;
}

nlohmann::ordered_json to_json(const TypicalSetReport& r, Unit unit) {
  const double d = unit.divisor();
  nlohmann::ordered_json j;
  j["unit"] = unit.name();
  j["mode"] = r.mode;
  j["n"] = r.n;
  j["delta"] = r.delta / d;
  j["entropy"] = r.entropy_nats / d;
  j["prob"] = {{"value", r.prob.value},
               {"stderr", r.prob.stderr_},
               {"exact", r.prob.exact}};
  j["volume"] = {{"value", r.volume.value},
                 {"stderr", r.volume.stderr_},
                 {"exact", r.volume.exact},
                 {"rel_stderr", r.volume.value > 0.0
                                    ? r.volume.stderr_ / r.volume.value
                                    : 0.0}};
  j["upper_bound"] = r.upper_bound;
  j["lower_bound"] = r.lower_bound;
  j["epsilon"] = r.epsilon;
  if (std::isfinite(r.rate)) j["rate"] = r.rate / d;
  j["lower_premise"] = r.lower_premise;
  j["zero_hits"] = r.zero_hits;
  return j;
}

nlohmann::ordered_json to_json(const SliceRatioReport& r, Unit unit) {
  const double d = unit.divisor();
  nlohmann::ordered_json j;
  j["unit"] = unit.name();
  j["n"] = r.n;
  j["delta"] = r.delta / d;
  j["numerator"] = r.numerator;
  j["denominator"] = r.denominator;
  j["defined"] = r.defined;
  if (std::isfinite(r.log_ratio_rate)) j["log_ratio_rate"] = r.log_ratio_rate / d;
  j["conditional_term"] = r.conditional_term / d;
  j["identity_residual"] = r.identity_residual;
  j["joint_entropy"] = r.joint_entropy / d;
  j["marginal_entropy"] = r.marginal_entropy / d;
  return j;
}

std::string fiber_table_csv(const ChainRuleReport& r, Unit unit) {
  const double d = unit.divisor();
  std::string out = "t,label,fiber_entropy,pushforward_density\n";
  for (const auto& f : r.fibers) {
    out += format_g17(f.t);
    out += ',';
    out += f.label;
    out += ',';
    out += format_g17(f.fiber_entropy / d);
    out += ',';
    out += format_g17(f.pushforward_density);
    out += '\n';
  }
  return out;
}

std::string sweep_csv(std::span<const SweepRow> rows, Unit unit) {
  const double d = unit.divisor();
  std::string out = "n,delta,rate,S,upper,lower,prob\n";
  for (const auto& r : rows) {
    out += std::to_string(r.n);
    out += ',';
    out += format_g17(r.delta / d);
    out += ',';
    out += format_g17(r.rate / d);
    out += ',';
    out += format_g17(r.entropy_nats / d);
    out += ',';
    out += format_g17(r.upper_bound);
    out += ',';
    out += format_g17(r.lower_bound);
    out += ',';
    out += format_g17(r.prob);
    out += '\n';
  }
  return out;
}

std::string slice_csv(std::span<const SliceRatioReport> rows, Unit unit) {
  const double d = unit.divisor();
  std::string out =
      "n,delta,log_ratio_rate,conditional_term,numerator,denominator,defined\n";
  for (const auto& r : rows) {
    out += std::to_string(r.n);
    out += ',';
    out += format_g17(r.delta / d);
    out += ',';
    out += format_g17(r.log_ratio_rate / d);
    out += ',';
    out += format_g17(r.conditional_term / d);
    out += ',';
    out += format_g17(r.numerator);
    out += ',';
    out += format_g17(r.denominator);
    out += ',';
    out += r.defined ? "1" : "0";
    out += '\n';
  }
  return out;
}

void write_file(const std::filesystem::path& path, const std::string& content) {
  if (path.has_parent_path()) {
    std::filesystem::create_directories(path.parent_path());
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("cannot open " + path.string() + " for writing");
  f.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!f) throw Error("failed writing " + path.string());
}

}  // namespace entlab
