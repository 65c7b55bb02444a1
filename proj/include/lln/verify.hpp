#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace lln {

struct CheckResult {
    std::string name;
    bool pass = false;
    double worst = 0.0;  // worst-case residual (check-specific meaning)
    std::string detail;
};

// Property suites behind the verify command. Each check reports its worst
// residual; a suite passes iff every check does.
std::vector<CheckResult> verify_stats(std::uint64_t seed,
                                      bool inject_row_sum_defect = false);
std::vector<CheckResult> verify_grads(std::uint64_t seed);
std::vector<CheckResult> verify_oracles(std::uint64_t seed);

}  // namespace lln
