#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "poolopt/errors.hpp"

namespace poolopt {

// Derivative-free constrained maximizer: sequential linear approximations
// of objective and constraints over a simplex of n+1 interpolation points
// inside a shrinking trust region, with an adaptive merit-function
// penalty. Decision variables live on (a neighborhood of) the unit
// simplex; constraints report signed residuals that must end up >= 0.

enum class SolverStart { EqualSplit, VertexSweep, User };
enum class SolverStatus { Converged, MaxEvals, Stalled };

struct SolverConfig {
    double rho_begin = 0.25;  // initial trust-region radius, normalized units
    double rho_end = 1e-10;   // final radius / convergence tolerance
    int max_evals = 10000;
    SolverStart start = SolverStart::VertexSweep;
    std::vector<double> user_start;  // used when start == User
    // Called with the radius after each reduction; for instrumentation.
    std::function<void(double)> rho_observer;
};

struct SolverResult {
    std::vector<double> x;  // normalized fractions
    double objective = 0.0;
    bool feasible = false;
    int evals = 0;
    SolverStatus status = SolverStatus::Converged;
    int radius_reductions = 0;
};

using ObjectiveFn = std::function<double(std::span<const double>)>;
// Writes one signed residual per constraint; >= 0 means satisfied.
using ConstraintFn = std::function<void(std::span<const double>, std::span<double>)>;

std::string to_string(SolverStatus s);

// Maximizes the objective subject to the residuals ending nonnegative.
// Internally minimizes the negation. Deterministic given config and
// inputs. A NaN or infinity from the objective or a constraint aborts the
// solve with NonFiniteObjective. With start == VertexSweep this delegates
// to vertex_sweep_maximize.
SolverResult maximize(const ObjectiveFn& objective, const ConstraintFn& constraints,
                      int n_constraints, int n, const SolverConfig& config);

// Runs maximize from every simplex vertex (all budget on one variable),
// from the origin, and from the equal split, returning the best feasible
// result; ties keep the earliest start.
SolverResult vertex_sweep_maximize(const ObjectiveFn& objective, const ConstraintFn& constraints,
                                   int n_constraints, int n, const SolverConfig& config);

}  // namespace poolopt
