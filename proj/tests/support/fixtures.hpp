#pragma once

#include <cmath>
#include <functional>
#include <span>
#include <vector>

#include "poolopt/domain.hpp"
#include "poolopt/utility.hpp"

namespace fixtures {

// Four representative pools spanning four orders of magnitude of size,
// fees dropping with size; fictitious coin with R = $50000 and a 40 h/s
// miner.
inline poolopt::ProblemInstance representative_pools(double rho = 1e-4, double miner_power = 40.0) {
    poolopt::CurrencySpec coin;
    coin.id = "coin";
    coin.algorithm = "h1";
    coin.block_reward = 50000.0;
    coin.block_time = 600.0;
    coin.total_hashrate = 1.2e6;

    auto pool = [](const char* id, double rate, double fee) {
        poolopt::PoolSpec p;
        p.id = id;
        p.currency = "coin";
        p.hashrate = rate;
        p.fee = fee;
        return p;
    };
    poolopt::MinerProfile miner;
    miner.power_by_algorithm["h1"] = miner_power;
    miner.rho = rho;
    return poolopt::ProblemInstance::validate(
        {coin},
        {pool("pool1", 1e6, 0.02), pool("pool2", 1e5, 0.02), pool("pool3", 1e4, 0.01),
         pool("pool4", 1e3, 0.0)},
        miner);
}

// Real Bitcoin pools, early-2019 parameters: Slush 4040 PH/s at 2%,
// ViaBTC 3090 PH/s at 2%, KanoPool 48 PH/s at 0.9%; R = $45441.
inline poolopt::ProblemInstance bitcoin_pools(double miner_power, double rho = 5e-5) {
    poolopt::CurrencySpec btc;
    btc.id = "btc";
    btc.algorithm = "sha256d";
    btc.block_reward = 45441.0;
    btc.block_time = 600.0;
    btc.total_hashrate = 42.33e18;
    btc.exchange_rate = 45441.0 / 12.5;

    auto pool = [](const char* id, double rate, double fee) {
        poolopt::PoolSpec p;
        p.id = id;
        p.currency = "btc";
        p.hashrate = rate;
        p.fee = fee;
        return p;
    };
    poolopt::MinerProfile miner;
    miner.power_by_algorithm["sha256d"] = miner_power;
    miner.rho = rho;
    return poolopt::ProblemInstance::validate(
        {btc},
        {pool("slush", 4040e15, 0.02), pool("viabtc", 3090e15, 0.02),
         pool("kanopool", 48e15, 0.009)},
        miner);
}

// The Bitcoin pools plus a 4%-fee PPS pool.
inline poolopt::ProblemInstance bitcoin_pools_with_pps(double miner_power = 3000e12, double rho = 1e-4) {
    poolopt::ProblemInstance base = bitcoin_pools(miner_power, rho);
    std::vector<poolopt::PoolSpec> pools = base.pools();
    poolopt::PoolSpec pps;
    pps.id = "ppspool";
    pps.currency = "btc";
    pps.hashrate = 892.16e15;
    pps.fee = 0.04;
    pps.scheme = poolopt::RewardScheme::Pps;
    pools.push_back(pps);
    return poolopt::ProblemInstance::validate(base.currencies(), pools, base.miner());
}

// Two SHA-256 currencies: the ViaBTC pool mines Bitcoin Cash. The BTC
// exchange-rate field carries the BTC/BCH cross ratio so a scenario
// override moves the BTC block reward.
inline poolopt::ProblemInstance btc_bch_pools(double miner_power = 3000e12, double rho = 5e-5) {
    const double cross_ratio = 1547.0 / 45441.0;  // ~0.034

    poolopt::CurrencySpec btc;
    btc.id = "btc";
    btc.algorithm = "sha256d";
    btc.block_reward = 45441.0;
    btc.block_time = 600.0;
    btc.total_hashrate = 42.33e18;
    btc.exchange_rate = cross_ratio;

    poolopt::CurrencySpec bch;
    bch.id = "bch";
    bch.algorithm = "sha256d";
    bch.block_reward = 1547.0;
    bch.block_time = 600.0;
    bch.total_hashrate = 1.43e18;

    auto pool = [](const char* id, const char* cur, double rate, double fee) {
        poolopt::PoolSpec p;
        p.id = id;
        p.currency = cur;
        p.hashrate = rate;
        p.fee = fee;
        return p;
    };
    poolopt::MinerProfile miner;
    miner.power_by_algorithm["sha256d"] = miner_power;
    miner.rho = rho;
    return poolopt::ProblemInstance::validate(
        {btc, bch},
        {pool("slush", "btc", 4040e15, 0.02), pool("viabtc_bch", "bch", 135e15, 0.02),
         pool("kanopool", "btc", 48e15, 0.009)},
        miner);
}

struct GridBest {
    double value = -1e300;
    std::vector<double> x;
};

// Exhaustive search over nonnegative fractions with sum <= 1 on a uniform
// grid; the brute-force ground truth the solver is checked against.
inline GridBest grid_search(int n, double step,
                            const std::function<double(std::span<const double>)>& eval) {
    GridBest best;
    best.x.assign(n, 0.0);
    std::vector<int> idx(n, 0);
    std::vector<double> x(n, 0.0);
    const int total = static_cast<int>(std::lround(1.0 / step));

    std::function<void(int, int)> walk = [&](int k, int remaining) {
        if (k == n - 1) {
            for (int i = 0; i <= remaining; ++i) {
                x[k] = i * step;
                const double v = eval(x);
                if (v > best.value) {
                    best.value = v;
                    best.x = x;
                }
            }
            return;
        }
        for (int i = 0; i <= remaining; ++i) {
            x[k] = i * step;
            walk(k + 1, remaining - i);
        }
    };
    walk(0, total);
    return best;
}

// Grid oracle for a whole objective spec.
inline GridBest grid_oracle(const poolopt::ObjectiveSpec& spec, double step = 0.02) {
    poolopt::detail::FractionEvaluator eval(spec);
    return grid_search(eval.dimension(), step,
                       [&](std::span<const double> x) { return eval.value(x); });
}

}  // namespace fixtures
