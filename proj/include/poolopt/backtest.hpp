#pragma once

#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "poolopt/allocator.hpp"
#include "poolopt/domain.hpp"
#include "poolopt/solver.hpp"

namespace poolopt {

struct BacktestPool {
    std::string id;
    double fee = 0.0;
};

struct BacktestConfig {
    double miner_power = 0.0;  // h/s
    double rho = 5e-5;
    int interval_days = 3;
    std::vector<BacktestPool> pools;  // ordered
    double pps_fee = 0.04;
    int smoothing_window = 14;
    std::string start_date;  // inclusive, empty = series start
    std::string end_date;    // inclusive, empty = series end
    double block_time = 600.0;
    SolverConfig solver;
};

struct DailyResult {
    std::string date;
    double reward_usd = 0.0;
    Allocation allocation;   // populated by active runs
    double network_hashrate = 0.0;
    std::map<std::string, double> pool_hashrate;  // smoothed estimates
};

struct BacktestSummary {
    double total_payoff = 0.0;   // P
    double pps_baseline = 0.0;   // P_PPS
    double reward_stddev = 0.0;  // population sigma of the daily series
    double sharpe = 0.0;         // (P - P_PPS) / sigma
    std::vector<DailyResult> daily;
};

// Daily rows keyed by strictly increasing dates, with whatever pool
// columns the file carries. Calendar gaps are recorded, not rejected.
struct MarketSeries {
    std::vector<MarketDay> days;
    std::vector<std::string> pool_columns;
    std::vector<std::string> gaps;  // "date..date" holes between rows

    bool has_pool(const std::string& id) const;
    MarketSeries slice(const std::string& start_date, const std::string& end_date) const;
};

// Comma-separated file with header
// date,exchange_rate,difficulty,coinbase_reward,total_blocks,<pool>...
// Dates ISO-8601, one row per day. Empty pool cells count as zero blocks.
MarketSeries load_market_data(const std::string& path);
MarketSeries load_market_data(const std::string& path,
                              const std::vector<std::string>& required_pools);

// (2^32 / 600) * difficulty.
double network_hashrate(double difficulty);

// Network hashrate times the pool's share of blocks over a window of days
// ending at day_index; the window truncates at the series start.
double pool_hashrate_estimate(const MarketSeries& series, const std::string& pool_id,
                              std::size_t day_index, int window);

// Mining a single fixed pool: the miner's share of the blocks the pool
// actually found each day, after fees, in that day's USD.
BacktestSummary run_passive(const BacktestConfig& config, const MarketSeries& series,
                            const std::string& pool_id);

// Re-optimizes the allocation every interval_days from day estimates and
// holds it in between. Pools whose smoothed hashrate estimate is zero at
// a boundary sit out that interval.
BacktestSummary run_active(const BacktestConfig& config, const MarketSeries& series);

// Deterministic expected-share PPS income over the period, after the PPS
// fee.
double pps_baseline(const BacktestConfig& config, const MarketSeries& series);

// (sum of rewards - pps_baseline) / population stddev of the rewards.
double sharpe(const std::vector<double>& daily_rewards, double pps_baseline_value);

// One row per day plus the trailing P=/P_PPS=/sigma=/S= block.
void write_summary(std::ostream& os, const BacktestSummary& summary,
                   const std::vector<std::string>& alloc_columns);

}  // namespace poolopt
