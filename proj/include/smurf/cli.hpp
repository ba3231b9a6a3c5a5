#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "smurf/model.hpp"
#include "smurf/structure.hpp"
#include "smurf/table.hpp"

namespace smurf {

enum ExitCode : int { kExitOk = 0, kExitInput = 2, kExitNonConvergence = 3, kExitNumeric = 4 };

/// Entry point of the `smurf` tool: fit, tune, simulate, study and report.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// One row per level of every block (the intercept is a one-level block):
/// predictor, level, coefficient, fused_group, zero.
Table coefficient_table(const ModelSpec& spec, const Vector& beta, double tol = kFusionTolerance);

/// Inverse of coefficient_table for the same model.
Vector coefficients_from_table(const Table& table, const ModelSpec& spec);

}  // namespace smurf
