#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace entlab {

struct CheckResult {
  int id = 0;
  std::string name;
  bool passed = false;
  double seconds = 0.0;
  std::string detail;
};

/// Runs the full acceptance battery, writing artifacts under outdir/run1
/// and (for the determinism check) a second byte-compared copy under
/// outdir/run2. Deterministic: every stochastic piece has a fixed seed.
std::vector<CheckResult> run_acceptance(const std::filesystem::path& outdir);

bool all_passed(const std::vector<CheckResult>& results);

}  // namespace entlab
