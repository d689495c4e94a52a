#pragma once

#include <ostream>
#include <string>

#include "quasidual/dual_engine.hpp"
#include "quasidual/scenario.hpp"

namespace quasidual {

inline constexpr int kExitOk = 0;
inline constexpr int kExitInput = 2;
/// Duality gap above --tol, or a failing property suite.
inline constexpr int kExitGap = 3;
inline constexpr int kExitSolver = 4;

inline constexpr int kCsvSchemaVersion = 1;

/// Fixed-point with 12 decimals, without a sign on values that round to
/// zero; "inf" and "-inf" for infinities.
std::string format_value(double v);
/// 12 significant digits.
std::string format_weight(double v);

/// schema_version,atom,primal,dual,gap,argmax_weights,iterations
std::string dual_report_csv(const Scenario& s, const DualReport& r);

/// Runs one command line (argv[0] is the program name). Returns the exit
/// code; nothing is thrown.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace quasidual
