#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace compresslab {

struct CheckResult {
    std::string name;
    bool passed = false;
    std::string detail;
};

/// Estimator checks against synthetic channels with known mutual
/// information: the ln N bound, exactness of the enumerated expectation,
/// Monte Carlo convergence on a binary symmetric channel, and log-sum-exp
/// stability.
std::vector<CheckResult> run_oracle_suite(std::uint64_t seed = 0);

/// One "PASS|FAIL  name  detail" line per check; returns true if all passed.
bool print_checks(std::ostream& out, const std::vector<CheckResult>& checks);

}  // namespace compresslab
