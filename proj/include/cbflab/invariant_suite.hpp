#pragma once

// Fast self-checks of the structural identities, run by `cbflab verify`.

#include <cstdint>
#include <string>
#include <vector>

namespace cbflab {

struct CheckResult {
  std::string name;
  double value = 0.0;
  double threshold = 0.0;
  bool passed = false;
};

std::vector<CheckResult> run_invariant_suite(std::uint64_t seed = 1);

}  // namespace cbflab
