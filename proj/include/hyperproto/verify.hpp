#pragma once

// Self-checks of the geometric and loss invariants, run by `hyperproto verify`.

#include <cstdint>
#include <string>
#include <vector>

namespace hyperproto {

struct VerifyOptions {
  /// Multiplies every tolerance; values far below 1 force failures.
  double tolerance_scale = 1.0;
  std::uint64_t seed = 20240611;
};

struct SuiteResult {
  std::string name;
  long checks = 0;
  long failures = 0;
  /// The first few failing cases with their inputs.
  std::vector<std::string> failure_samples;
  double seconds = 0.0;

  bool passed() const noexcept { return failures == 0 && checks > 0; }
};

std::vector<std::string> verification_suite_names();
std::vector<SuiteResult> run_verification(const VerifyOptions& options = {});

}  // namespace hyperproto
