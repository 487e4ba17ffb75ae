// Acceptance suite: runs every criterion at its stated tolerance and
// prints one pass/fail line per criterion. Exit status is nonzero if any
// criterion fails.

#include <cstdio>
#include <filesystem>

#include "entlab/acceptance.hpp"

int main() {
  const std::filesystem::path outdir =
      std::filesystem::temp_directory_path() / "entlab-acceptance";
  std::filesystem::remove_all(outdir);

  const auto results = entlab::run_acceptance(outdir);
  for (const auto& r : results) {
    std::printf("[%s] criterion %2d %-28s %8.3f s  %s\n",
                r.passed ? "PASS" : "FAIL", r.id, r.name.c_str(), r.seconds,
                r.detail.c_str());
  }
  const bool ok = entlab::all_passed(results);
  std::printf("%s\n", ok ? "acceptance: all criteria passed"
                         : "acceptance: CRITERIA FAILED");
  return ok ? 0 : 1;
}
