#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "poolopt/backtest.hpp"
#include "poolopt/domain.hpp"
#include "poolopt/solver.hpp"
#include "poolopt/utility.hpp"

namespace poolopt {

using Json = nlohmann::json;

Json load_json_file(const std::string& path);

// key=value override applied after parse, before validation. Dotted keys
// walk objects ("miner.rho=1e-4"); the value is parsed as JSON when it
// is, a raw string otherwise.
void apply_override(Json& config, const std::string& key_value);

// Builds the validated instance from the top-level currencies/pools/miner
// keys. Field names match the record fields verbatim. miner.rho may be
// omitted when wealth and crra are both given.
ProblemInstance instance_from_json(const Json& config);

// Explicit "variant" key, otherwise inferred from the instance shape.
Variant variant_from_json(const Json& config, const ProblemInstance& instance);

SolverConfig solver_from_json(const Json& config);

// "rho_grid": an array, or {"min":..,"max":..,"points":..}; defaults to
// the standard 40-point grid when absent.
std::vector<double> rho_grid_from_json(const Json& config);

BacktestConfig backtest_from_json(const Json& config);

Allocation allocation_from_json(const Json& alloc);

}  // namespace poolopt
