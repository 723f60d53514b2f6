#include "poolopt/domain.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace poolopt {

namespace {

void check_currency(const CurrencySpec& c) {
    const std::string rec = "currency '" + c.id + "'";
    if (c.id.empty()) throw OutOfRangeField(rec, "id", "must be non-empty");
    if (c.algorithm.empty()) throw OutOfRangeField(rec, "algorithm", "must be non-empty");
    if (!(c.block_reward >= 0.0)) throw OutOfRangeField(rec, "block_reward", "must be >= 0");
    if (!(c.block_time > 0.0)) throw OutOfRangeField(rec, "block_time", "must be > 0");
    if (!(c.total_hashrate > 0.0)) throw OutOfRangeField(rec, "total_hashrate", "must be > 0");
    if (!(c.avg_tx_fee >= 0.0)) throw OutOfRangeField(rec, "avg_tx_fee", "must be >= 0");
    if (!(c.exchange_rate > 0.0)) throw OutOfRangeField(rec, "exchange_rate", "must be > 0");
}

void check_pool(const PoolSpec& p) {
    const std::string rec = "pool '" + p.id + "'";
    if (p.id.empty()) throw OutOfRangeField(rec, "id", "must be non-empty");
    if (!(p.hashrate > 0.0)) throw OutOfRangeField(rec, "hashrate", "must be > 0");
    if (!(p.fee >= 0.0 && p.fee <= 1.0)) throw OutOfRangeField(rec, "fee", "must be in [0,1]");
    if (!(p.pps_fraction >= 0.0 && p.pps_fraction <= 1.0))
        throw OutOfRangeField(rec, "pps_fraction", "must be in [0,1]");
}

void check_miner(const MinerProfile& m) {
    if (m.power_by_algorithm.empty())
        throw EmptyInput("miner: power_by_algorithm must be non-empty");
    for (const auto& [alg, power] : m.power_by_algorithm) {
        if (!(power > 0.0))
            throw OutOfRangeField("miner", "power_by_algorithm['" + alg + "']", "must be > 0");
    }
    if (!(m.rho >= 0.0)) throw OutOfRangeField("miner", "rho", "must be >= 0");
    if (m.wealth && !(*m.wealth > 0.0)) throw NonPositiveWealth("miner: wealth must be > 0");
    if (m.wealth && m.crra) {
        const double implied = *m.crra / *m.wealth;
        if (std::abs(m.rho - implied) > 1e-9 * std::max(1.0, std::abs(implied)))
            throw OutOfRangeField("miner", "rho", "must equal crra / wealth when both are set");
    }
}

}  // namespace

ProblemInstance ProblemInstance::validate(std::vector<CurrencySpec> currencies,
                                          std::vector<PoolSpec> pools, MinerProfile miner) {
    if (currencies.empty()) throw EmptyInput("catalog: currency list is empty");
    if (pools.empty()) throw EmptyInput("catalog: pool list is empty");

    std::set<std::string> currency_ids;
    for (const auto& c : currencies) {
        check_currency(c);
        if (!currency_ids.insert(c.id).second)
            throw DuplicateId("currency '" + c.id + "' appears more than once");
    }
    std::set<std::string> pool_ids;
    for (const auto& p : pools) {
        check_pool(p);
        if (!pool_ids.insert(p.id).second)
            throw DuplicateId("pool '" + p.id + "' appears more than once");
        if (!currency_ids.count(p.currency))
            throw UnknownCurrency("pool '" + p.id + "' references unknown currency '" +
                                  p.currency + "'");
    }
    check_miner(miner);
    for (const auto& c : currencies) {
        if (!miner.power_by_algorithm.count(c.algorithm))
            throw UnknownAlgorithm("currency '" + c.id + "' uses algorithm '" + c.algorithm +
                                   "' absent from the miner's power map");
    }

    ProblemInstance out;
    out.currencies_ = std::move(currencies);
    out.pools_ = std::move(pools);
    out.miner_ = std::move(miner);
    return out;
}

const CurrencySpec& ProblemInstance::currency(const std::string& id) const {
    for (const auto& c : currencies_)
        if (c.id == id) return c;
    throw UnknownCurrency("unknown currency '" + id + "'");
}

const PoolSpec& ProblemInstance::pool(const std::string& id) const {
    for (const auto& p : pools_)
        if (p.id == id) return p;
    throw Error("unknown pool '" + id + "'");
}

bool ProblemInstance::has_pool(const std::string& id) const {
    return std::any_of(pools_.begin(), pools_.end(),
                       [&](const PoolSpec& p) { return p.id == id; });
}

double ProblemInstance::miner_power_for(const CurrencySpec& c) const {
    auto it = miner_.power_by_algorithm.find(c.algorithm);
    if (it == miner_.power_by_algorithm.end())
        throw UnknownAlgorithm("no miner power for algorithm '" + c.algorithm + "'");
    return it->second;
}

double ProblemInstance::single_algorithm_power() const {
    auto algs = algorithm_ids();
    if (algs.size() != 1)
        throw InvalidVariant("instance spans " + std::to_string(algs.size()) +
                             " algorithms where exactly one is required");
    return miner_.power_by_algorithm.at(algs.front());
}

std::vector<std::string> ProblemInstance::algorithm_ids() const {
    std::set<std::string> algs;
    for (const auto& c : currencies_) algs.insert(c.algorithm);
    return {algs.begin(), algs.end()};
}

double cara_from_crra(double crra, double wealth) {
    if (!(wealth > 0.0)) throw NonPositiveWealth("wealth must be > 0");
    if (!(crra > 0.0)) throw OutOfRangeField("miner", "crra", "must be > 0");
    return crra / wealth;
}

bool allocation_feasible(const Allocation& alloc, const ProblemInstance& instance) {
    for (const auto& [id, v] : alloc.pool_alloc)
        if (v < 0.0) return false;
    for (const auto& [id, v] : alloc.solo_alloc)
        if (v < 0.0) return false;
    if (alloc.pps_alloc < 0.0) return false;

    // Per-algorithm budget on normalized fractions.
    std::map<std::string, double> used;
    for (const auto& [id, v] : alloc.pool_alloc) {
        const auto& pool = instance.pool(id);
        const auto& cur = instance.currency(pool.currency);
        used[cur.algorithm] += v / instance.miner_power_for(cur);
    }
    for (const auto& [id, v] : alloc.solo_alloc) {
        const auto& cur = instance.currency(id);
        used[cur.algorithm] += v / instance.miner_power_for(cur);
    }
    if (alloc.pps_alloc > 0.0) {
        // The PPS arm exists only in single-algorithm problems.
        auto algs = instance.algorithm_ids();
        used[algs.front()] += alloc.pps_alloc / instance.miner().power_by_algorithm.at(algs.front());
    }
    for (const auto& [alg, frac] : used)
        if (frac > 1.0 + kFeasibilityTol) return false;
    return true;
}

RewardScheme reward_scheme_from_string(const std::string& s) {
    if (s == "pplns_like" || s == "pplns") return RewardScheme::PplnsLike;
    if (s == "pps") return RewardScheme::Pps;
    throw Error("unknown reward scheme '" + s + "' (expected pplns_like or pps)");
}

std::string to_string(RewardScheme s) {
    return s == RewardScheme::PplnsLike ? "pplns_like" : "pps";
}

}  // namespace poolopt
