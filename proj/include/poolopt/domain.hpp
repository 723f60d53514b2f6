#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "poolopt/errors.hpp"

namespace poolopt {

// Feasibility slack on normalized (fraction-of-total-power) constraints.
inline constexpr double kFeasibilityTol = 1e-12;

struct PowAlgorithm {
    std::string id;
    bool operator==(const PowAlgorithm&) const = default;
};

// One proof-of-work cryptocurrency. Money is kept in USD at the block
// level: block_reward is coin reward times exchange rate, so a rate
// change rescales block_reward while the implied coin reward stays put.
struct CurrencySpec {
    std::string id;
    std::string algorithm;
    double block_reward = 0.0;    // USD per block
    double block_time = 600.0;    // seconds
    double total_hashrate = 0.0;  // hashes/second, whole network
    double avg_tx_fee = 0.0;      // USD per block
    double exchange_rate = 1.0;   // fiat per coin unit

    double coin_reward() const { return block_reward / exchange_rate; }

    CurrencySpec with_exchange_rate(double rate) const {
        CurrencySpec out = *this;
        out.block_reward = coin_reward() * rate;
        out.exchange_rate = rate;
        return out;
    }

    bool operator==(const CurrencySpec&) const = default;
};

enum class RewardScheme { PplnsLike, Pps };

struct PoolSpec {
    std::string id;
    std::string currency;
    double hashrate = 0.0;  // hashes/second, excludes the candidate miner
    double fee = 0.0;       // fraction in [0,1]
    RewardScheme scheme = RewardScheme::PplnsLike;
    bool pays_tx_fees = false;
    double pps_fraction = 1.0;  // PPLNS share of a dual-scheme pool

    bool operator==(const PoolSpec&) const = default;
};

struct MinerProfile {
    std::map<std::string, double> power_by_algorithm;  // algorithm id -> h/s
    double rho = 0.0;                                  // CARA, 1/USD
    std::optional<double> wealth;                      // USD
    std::optional<double> crra;

    bool operator==(const MinerProfile&) const = default;
};

// Decision vector. Pool and solo entries are hashes/second; pps_alloc is
// the power sent to the chosen PPS pool (0 when no PPS pool is in play).
struct Allocation {
    std::map<std::string, double> pool_alloc;  // pool id -> h/s
    std::map<std::string, double> solo_alloc;  // currency id -> h/s
    double pps_alloc = 0.0;

    bool operator==(const Allocation&) const = default;
};

// One day of historical chain data.
struct MarketDay {
    std::string date;            // ISO-8601 calendar day
    double exchange_rate = 0.0;  // USD per coin
    double difficulty = 0.0;
    double coinbase_reward = 0.0;  // coin units per block
    double total_blocks = 0.0;
    std::map<std::string, double> pool_blocks;

    bool operator==(const MarketDay&) const = default;
};

// A validated problem instance: unique ids, resolved cross-references,
// in-range fields. Immutable after construction and safe to share across
// threads.
class ProblemInstance {
public:
    ProblemInstance() = default;

    // validate_catalog: checks the records and wires up the references.
    static ProblemInstance validate(std::vector<CurrencySpec> currencies,
                                    std::vector<PoolSpec> pools, MinerProfile miner);

    const std::vector<CurrencySpec>& currencies() const { return currencies_; }
    const std::vector<PoolSpec>& pools() const { return pools_; }
    const MinerProfile& miner() const { return miner_; }

    const CurrencySpec& currency(const std::string& id) const;
    const PoolSpec& pool(const std::string& id) const;
    bool has_pool(const std::string& id) const;

    // Miner hash power for the algorithm of the given currency.
    double miner_power_for(const CurrencySpec& c) const;
    // Total miner power when a single algorithm is in play.
    double single_algorithm_power() const;

    std::vector<std::string> algorithm_ids() const;

    bool operator==(const ProblemInstance&) const = default;

private:
    std::vector<CurrencySpec> currencies_;
    std::vector<PoolSpec> pools_;
    MinerProfile miner_;
};

double cara_from_crra(double crra, double wealth);

// Per-algorithm feasibility: sum of allocated power over each algorithm's
// pools and solo entries, normalized by the miner's power for that
// algorithm, must not exceed 1 + kFeasibilityTol; every entry >= 0.
bool allocation_feasible(const Allocation& alloc, const ProblemInstance& instance);

RewardScheme reward_scheme_from_string(const std::string& s);
std::string to_string(RewardScheme s);

}  // namespace poolopt
