#pragma once

#include <ostream>
#include <string>
#include <vector>

// Built-in invariant suite: fast numerical checks of the core algebra
// (polish identity, window normalization, WHDR oracle, receptive-field
// probe, D4 equivariance, gradient checks).  The CLI exposes it as
// `selftest`; the full property-test suite lives in the test binaries.

namespace iik::selftest {

struct CheckResult {
    std::string name;
    bool pass = false;
    std::string detail;  // worst error observed, or the failure message
    double seconds = 0.0;
};

// quick skips the gradient checks
std::vector<CheckResult> run(bool quick);

// prints one row per check; returns the number of failures
int report(std::ostream& os, const std::vector<CheckResult>& results);

}  // namespace iik::selftest
