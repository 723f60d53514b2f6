#pragma once

#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "poolopt/domain.hpp"
#include "poolopt/solver.hpp"
#include "poolopt/utility.hpp"

namespace poolopt {

struct AllocationReport {
    Allocation allocation;  // original units, h/s
    double rho = 0.0;
    double utility = 0.0;
    double expected_payoff = 0.0;
    SolverResult solver;
    Variant variant = Variant::SinglePplns;
};

struct SweepSeries {
    std::vector<double> rho_values;            // strictly increasing
    std::vector<AllocationReport> reports;     // aligned with rho_values
    std::vector<std::string> columns;          // allocation column names
};

// Solves one allocation problem. rho overrides the instance's miner rho.
// rho == 0 short-circuits to the full-solo allocation without solving.
// Components below 1e-9 of the miner's power are zeroed post-solve; the
// freed dust is not redistributed.
AllocationReport optimize(const ProblemInstance& instance, Variant variant, double rho,
                          const SolverConfig& config = {});

// One independent optimize call per grid point (no warm starts).
SweepSeries sweep_rho(const ProblemInstance& instance, Variant variant,
                      const std::vector<double>& rho_grid, const SolverConfig& config = {},
                      int jobs = 1);

// Re-derives each overridden currency's block reward from its coin reward
// times the new exchange rate, then sweeps.
SweepSeries exchange_rate_scenario(const ProblemInstance& instance, Variant variant,
                                   const std::map<std::string, double>& rate_overrides,
                                   const std::vector<double>& rho_grid,
                                   const SolverConfig& config = {}, int jobs = 1);

// 40 logarithmically spaced points in [1e-6, 1e-4].
std::vector<double> default_rho_grid();

// One row per rho: rho, utility, expected payoff, then one column per
// pool/solo allocation in h/s.
void write_sweep_csv(std::ostream& os, const SweepSeries& series);

// Key/value text for a single report.
void write_report(std::ostream& os, const AllocationReport& report);

}  // namespace poolopt
