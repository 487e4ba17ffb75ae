#pragma once

#include <filesystem>
#include <string>

#include <json.hpp>

#include "entlab/disintegration.hpp"
#include "entlab/typical.hpp"

namespace entlab {

/// "nats" divides by 1, "bits" by ln 2; applied to entropy-like values
/// only (entropies, rates, log-ratios), never to masses or probabilities.
struct Unit {
  bool bits = false;
  double divisor() const;
  const char* name() const { return bits ? "bits" : "nats"; }
  static Unit parse(const std::string& s);
};

/// Lossless round-trip formatting: '.' decimal, 17 significant digits.
std::string format_g17(double v);

nlohmann::ordered_json to_json(const EntropyValue& e, Unit unit = {});
nlohmann::ordered_json to_json(const ChainRuleReport& r, Unit unit = {});
nlohmann::ordered_json to_json(const DeformedPolarReport& r, Unit unit = {});
nlohmann::ordered_json to_json(const TypicalSetReport& r, Unit unit = {});
nlohmann::ordered_json to_json(const SliceRatioReport& r, Unit unit = {});

/// CSV of the per-fiber table: t, label, fiber_entropy, pushforward_density.
std::string fiber_table_csv(const ChainRuleReport& r, Unit unit = {});
/// CSV with columns n, delta, rate, S, upper, lower, prob.
std::string sweep_csv(std::span<const SweepRow> rows, Unit unit = {});
/// CSV with one row per slice-ratio report.
std::string slice_csv(std::span<const SliceRatioReport> rows, Unit unit = {});

/// Writes content byte-exactly (binary mode, '\n' endings as given).
void write_file(const std::filesystem::path& path, const std::string& content);

}  // namespace entlab
