#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "poolopt/domain.hpp"

namespace poolopt {

enum class Variant {
    SinglePplns,
    SingleWithPps,
    MultiCurrency,
    MultiCurrencyTxFees,
    MultiPow,
};

Variant variant_from_string(const std::string& s);
std::string to_string(Variant v);

// A model variant bound to a validated instance. Construction enforces the
// variant-specific shape rules and, for the PPS variant, keeps only the
// cheapest PPS pool (a rational miner ignores the rest).
class ObjectiveSpec {
public:
    static ObjectiveSpec make(Variant variant, ProblemInstance instance);

    Variant variant() const { return variant_; }
    const ProblemInstance& instance() const { return instance_; }
    const std::optional<std::string>& pps_pool() const { return pps_pool_; }
    double pps_fee() const;
    bool include_tx_fees() const { return variant_ == Variant::MultiCurrencyTxFees; }

    // Pools entering the PPLNS sum, in instance order.
    const std::vector<PoolSpec>& pplns_pools() const { return pplns_pools_; }
    // PPS pools discarded in favor of the cheapest one.
    const std::vector<std::string>& dropped_pools() const { return dropped_pools_; }

private:
    Variant variant_ = Variant::SinglePplns;
    ProblemInstance instance_;
    std::optional<std::string> pps_pool_;
    std::vector<PoolSpec> pplns_pools_;
    std::vector<std::string> dropped_pools_;
};

// Closed-form objectives. Each checks feasibility first and throws
// InfeasibleAllocation when a normalized residual dips below tolerance.
//
// The values are CARA expected-utility objectives: a sum of pool terms
// (l + L)(1 - e^{-rho R (1-f) l/(l+L)}) plus a solo term, normalized by
// block time and network hashrate in the multi-currency forms, plus a
// linear steady-income term when a PPS pool is in play. Every 1 - e^{-x}
// goes through expm1 and each exponent is assembled as
// rho * R * (1-f) * ratio with the hash-share ratio computed first.
double utility_single_pplns(const Allocation& alloc, const ObjectiveSpec& spec);
double utility_single_with_pps(const Allocation& alloc, const ObjectiveSpec& spec);
double utility_multi_currency(const Allocation& alloc, const ObjectiveSpec& spec,
                              bool include_tx_fees);
// Dispatch on spec.variant().
double utility_value(const Allocation& alloc, const ObjectiveSpec& spec);

// Expected USD payoff of the allocation: per-pool share of the pool's
// expected block count, after fees, plus solo and PPS income. Single
// currency counts over one network block period; multi-currency forms
// count over one day.
double expected_payoff(const Allocation& alloc, const ObjectiveSpec& spec);

// Signed residuals, >= 0 when satisfied: budget residual(s) first, then a
// nonnegativity residual per decision variable. Budget is in h/s for the
// single-algorithm variants and a dimensionless 1 - sum(fractions) for the
// multi-algorithm constraint.
std::vector<double> constraint_residuals(const Allocation& alloc, const ObjectiveSpec& spec);

// Worst residual normalized to fractions of the miner's power; used for
// the feasibility gate.
double worst_normalized_residual(const Allocation& alloc, const ObjectiveSpec& spec);

struct McComponent {
    std::string id;          // pool id, "solo:<currency>" or "pps"
    double mean = 0.0;       // Poisson mean (zero for the deterministic PPS part)
    double log_weight = 0.0; // w in E[e^{w N}]
    double analytic_factor = 1.0;  // e^{mean (e^w - 1)}
    double mc_factor = 1.0;        // sample mean of e^{w N}
    double mc_factor_std_error = 0.0;
};

struct McUtility {
    double estimate = 0.0;   // sample mean of -e^{-rho P}
    double std_error = 0.0;
    double analytic = 0.0;   // exact E[-e^{-rho P}] assembled from the per-component MGFs
    std::vector<McComponent> components;
};

// Samples independent Poisson block counts per pool and per solo option,
// reproducibly from the seed, and estimates E[-e^{-rho P}]. The analytic
// value uses E[e^{w X}] = e^{mean (e^w - 1)} per component, which is what
// the closed-form objectives sum in log space.
McUtility monte_carlo_utility(const Allocation& alloc, const ObjectiveSpec& spec,
                              std::int64_t draws, std::uint64_t seed);

namespace detail {

// Unchecked fast-path evaluation over normalized decision fractions, used
// by the solver and by brute-force oracles. Variable order: one fraction
// per PPLNS pool (instance order), then the PPS fraction when the variant
// has one, then one solo fraction per currency for the multi-currency
// variants. Fractions are of the miner's total power (per the owning
// algorithm for the multi-PoW variant). Finite for any query near the
// simplex, including infeasible points.
class FractionEvaluator {
public:
    explicit FractionEvaluator(const ObjectiveSpec& spec);

    int dimension() const { return static_cast<int>(names_.size()); }
    const std::vector<std::string>& variable_names() const { return names_; }

    double value(std::span<const double> x) const;

    // value(x + delta e_i - delta e_j) - value(x), assembled term by term
    // in difference form so the result keeps full relative precision even
    // where the two values agree to twelve digits. j == -1 trades against
    // the budget slack (the solo remainder in the single-currency forms,
    // idle power otherwise).
    double value_delta(std::span<const double> x, int i, int j, double delta) const;

    // Residuals in normalized units: budget(s) then nonnegativity.
    void residuals(std::span<const double> x, std::span<double> out) const;
    int residual_count() const;

    Allocation to_allocation(std::span<const double> x) const;
    std::vector<double> to_fractions(const Allocation& alloc) const;

private:
    struct PoolTerm {
        std::string id;
        double pool_hashrate;
        double fee;
        double reward;     // R (plus passed-through tx fees when enabled)
        double time_norm;  // 1/(T_c Lambda_c) for multi-currency, 1 otherwise
        double miner_power;  // power behind this variable's fraction
    };
    struct SoloTerm {
        std::string currency;
        double reward;
        double time_norm;
        double miner_power;
    };

    const ObjectiveSpec* spec_;
    std::vector<std::string> names_;
    std::vector<PoolTerm> pools_;
    std::vector<SoloTerm> solos_;   // explicit solo variables (multi-currency)
    bool has_pps_ = false;
    double pps_fee_ = 0.0;
    double single_reward_ = 0.0;    // R for the single-currency variants
    double single_power_ = 0.0;     // miner power, single-algorithm variants
    bool solo_is_remainder_ = false;
    bool multi_pow_ = false;
};

}  // namespace detail

}  // namespace poolopt
