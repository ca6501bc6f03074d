#pragma once

#include "qici/report.hpp"

#include <ostream>
#include <string>
#include <vector>

namespace qici::cli {

/// Exit codes: 0 success, 1 runtime failure or failed self-test, 2 usage or
/// configuration error.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Aggregates for every (variant, rate) pair in order. Runs whose outcome
/// does not depend on the rate (centralized, no communication, rate 0) are
/// simulated once and reused.
std::vector<SweepEntry> sweep(const RunConfig& rc, const std::vector<Variant>& variants,
                              const std::vector<double>& rates, int threads);

/// Property checks; prints one line per check to `out`. True when all pass.
bool selftest(std::ostream& out);

}  // namespace qici::cli
