#include "poolopt/backtest.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>
#include <ostream>
#include <sstream>

namespace poolopt {

namespace {

// Proleptic Gregorian day number; days_from_civil per Howard Hinnant's
// public-domain calendar algorithms.
long day_number(int y, unsigned m, unsigned d) {
    y -= m <= 2;
    const long era = (y >= 0 ? y : y - 399) / 400;
    const unsigned yoe = static_cast<unsigned>(y - era * 400);
    const unsigned doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
    const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    return era * 146097 + static_cast<long>(doe) - 719468;
}

long parse_date(const std::string& iso, std::size_t line) {
    int y = 0;
    unsigned m = 0, d = 0;
    if (std::sscanf(iso.c_str(), "%d-%u-%u", &y, &m, &d) != 3 || m < 1 || m > 12 || d < 1 ||
        d > 31)
        throw ParseError(line, "bad date '" + iso + "' (expected YYYY-MM-DD)");
    return day_number(y, m, d);
}

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : line) {
        if (ch == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (ch != '\r') {
            cur += ch;
        }
    }
    out.push_back(cur);
    return out;
}

double parse_number(const std::string& s, std::size_t line, const std::string& col) {
    if (s.empty()) return 0.0;
    try {
        std::size_t pos = 0;
        const double v = std::stod(s, &pos);
        if (pos != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw ParseError(line, "bad number '" + s + "' in column " + col);
    }
}

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

double population_stddev(const std::vector<double>& xs) {
    const double n = static_cast<double>(xs.size());
    const double mean = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
    double ss = 0.0;
    for (double x : xs) ss += (x - mean) * (x - mean);
    return std::sqrt(ss / n);
}

double day_reward_usd(const MarketDay& day) { return day.coinbase_reward * day.exchange_rate; }

double pool_fee(const BacktestConfig& config, const std::string& pool_id) {
    for (const auto& p : config.pools)
        if (p.id == pool_id) return p.fee;
    throw Error("pool '" + pool_id + "' is not in the backtest pool list");
}

void check_config(const BacktestConfig& config) {
    if (config.interval_days < 1) throw Error("interval_days must be >= 1");
    if (config.smoothing_window < 1) throw Error("smoothing_window must be >= 1");
    if (!(config.pps_fee >= 0.0 && config.pps_fee <= 1.0))
        throw Error("pps_fee must be in [0,1]");
    if (!config.start_date.empty() && !config.end_date.empty() &&
        !(parse_date(config.start_date, 0) < parse_date(config.end_date, 0)))
        throw Error("backtest period start must precede its end");
}

}  // namespace

bool MarketSeries::has_pool(const std::string& id) const {
    return std::find(pool_columns.begin(), pool_columns.end(), id) != pool_columns.end();
}

MarketSeries MarketSeries::slice(const std::string& start_date,
                                 const std::string& end_date) const {
    MarketSeries out;
    out.pool_columns = pool_columns;
    const long lo = start_date.empty() ? std::numeric_limits<long>::min()
                                       : parse_date(start_date, 0);
    const long hi =
        end_date.empty() ? std::numeric_limits<long>::max() : parse_date(end_date, 0);
    for (const auto& d : days) {
        const long num = parse_date(d.date, 0);
        if (num >= lo && num <= hi) out.days.push_back(d);
    }
    return out;
}

MarketSeries load_market_data(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open market data file '" + path + "'");

    MarketSeries series;
    std::string line;
    std::size_t line_no = 0;

    if (!std::getline(in, line)) throw ParseError(1, "empty file");
    ++line_no;
    const std::vector<std::string> header = split_csv(line);
    const std::vector<std::string> fixed = {"date", "exchange_rate", "difficulty",
                                            "coinbase_reward", "total_blocks"};
    if (header.size() < fixed.size())
        throw ParseError(1, "header must start with date,exchange_rate,difficulty,"
                            "coinbase_reward,total_blocks");
    for (std::size_t i = 0; i < fixed.size(); ++i) {
        if (header[i] != fixed[i]) throw MissingColumn("missing column '" + fixed[i] + "'");
    }
    for (std::size_t i = fixed.size(); i < header.size(); ++i)
        series.pool_columns.push_back(header[i]);

    long prev_day = 0;
    bool have_prev = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line == "\r") continue;
        const std::vector<std::string> cells = split_csv(line);
        if (cells.size() != header.size())
            throw ParseError(line_no, "expected " + std::to_string(header.size()) +
                                          " cells, got " + std::to_string(cells.size()));
        MarketDay day;
        day.date = cells[0];
        const long num = parse_date(day.date, line_no);
        if (have_prev && num <= prev_day)
            throw NonMonotoneDates("date " + day.date + " at line " + std::to_string(line_no) +
                                   " does not increase");
        if (have_prev && num > prev_day + 1)
            series.gaps.push_back(series.days.back().date + ".." + day.date);
        prev_day = num;
        have_prev = true;

        day.exchange_rate = parse_number(cells[1], line_no, "exchange_rate");
        day.difficulty = parse_number(cells[2], line_no, "difficulty");
        day.coinbase_reward = parse_number(cells[3], line_no, "coinbase_reward");
        day.total_blocks = parse_number(cells[4], line_no, "total_blocks");
        if (!(day.difficulty > 0.0)) throw ParseError(line_no, "difficulty must be > 0");
        if (day.total_blocks < 0.0) throw ParseError(line_no, "total_blocks must be >= 0");

        double pool_sum = 0.0;
        for (std::size_t i = 0; i < series.pool_columns.size(); ++i) {
            const double v = parse_number(cells[5 + i], line_no, series.pool_columns[i]);
            if (v < 0.0) throw ParseError(line_no, "block counts must be >= 0");
            day.pool_blocks[series.pool_columns[i]] = v;
            pool_sum += v;
        }
        if (pool_sum > day.total_blocks)
            throw ParseError(line_no, "tracked pool blocks exceed total_blocks");
        series.days.push_back(std::move(day));
    }
    return series;
}

MarketSeries load_market_data(const std::string& path,
                              const std::vector<std::string>& required_pools) {
    MarketSeries series = load_market_data(path);
    for (const auto& id : required_pools) {
        if (!series.has_pool(id)) throw MissingColumn("missing column '" + id + "'");
    }
    return series;
}

double network_hashrate(double difficulty) {
    if (!(difficulty > 0.0)) throw Error("difficulty must be > 0");
    return (4294967296.0 / 600.0) * difficulty;
}

double pool_hashrate_estimate(const MarketSeries& series, const std::string& pool_id,
                              std::size_t day_index, int window) {
    if (day_index >= series.days.size()) throw Error("day index out of range");
    if (window < 1) throw Error("window must be >= 1");
    if (!series.has_pool(pool_id)) throw MissingColumn("missing column '" + pool_id + "'");

    const std::size_t first =
        day_index + 1 >= static_cast<std::size_t>(window) ? day_index + 1 - window : 0;
    double pool_blocks = 0.0, total_blocks = 0.0;
    for (std::size_t k = first; k <= day_index; ++k) {
        const auto& day = series.days[k];
        auto it = day.pool_blocks.find(pool_id);
        if (it != day.pool_blocks.end()) pool_blocks += it->second;
        total_blocks += day.total_blocks;
    }
    if (total_blocks == 0.0)
        throw EmptyWindow("no blocks found in the window ending at " +
                          series.days[day_index].date);
    return network_hashrate(series.days[day_index].difficulty) * pool_blocks / total_blocks;
}

BacktestSummary run_passive(const BacktestConfig& config, const MarketSeries& full_series,
                            const std::string& pool_id) {
    check_config(config);
    const MarketSeries series = full_series.slice(config.start_date, config.end_date);
    if (series.days.empty()) throw EmptyInput("backtest period selects no days");
    if (!series.has_pool(pool_id)) throw MissingColumn("missing column '" + pool_id + "'");
    const double fee = pool_fee(config, pool_id);

    BacktestSummary summary;
    std::vector<double> rewards;
    for (std::size_t d = 0; d < series.days.size(); ++d) {
        const MarketDay& day = series.days[d];
        const double pool_rate =
            pool_hashrate_estimate(series, pool_id, d, config.smoothing_window);
        const double share = config.miner_power / (config.miner_power + pool_rate);
        const double blocks = day.pool_blocks.count(pool_id) ? day.pool_blocks.at(pool_id) : 0.0;
        const double reward = share * (1.0 - fee) * blocks * day_reward_usd(day);

        DailyResult res;
        res.date = day.date;
        res.reward_usd = reward;
        res.network_hashrate = network_hashrate(day.difficulty);
        res.pool_hashrate[pool_id] = pool_rate;
        summary.daily.push_back(std::move(res));
        rewards.push_back(reward);
    }
    summary.total_payoff = std::accumulate(rewards.begin(), rewards.end(), 0.0);
    summary.pps_baseline = pps_baseline(config, series);
    summary.reward_stddev = population_stddev(rewards);
    summary.sharpe = sharpe(rewards, summary.pps_baseline);
    return summary;
}

BacktestSummary run_active(const BacktestConfig& config, const MarketSeries& full_series) {
    check_config(config);
    if (config.pools.empty()) throw EmptyInput("active backtest needs at least one pool");
    const MarketSeries series = full_series.slice(config.start_date, config.end_date);
    if (series.days.empty()) throw EmptyInput("backtest period selects no days");
    for (const auto& p : config.pools)
        if (!series.has_pool(p.id)) throw MissingColumn("missing column '" + p.id + "'");

    BacktestSummary summary;
    std::vector<double> rewards;
    Allocation held;
    for (std::size_t d = 0; d < series.days.size(); ++d) {
        const MarketDay& day = series.days[d];
        const double net_rate = network_hashrate(day.difficulty);
        const double reward_per_block = day_reward_usd(day);

        std::map<std::string, double> estimates;
        for (const auto& p : config.pools)
            estimates[p.id] = pool_hashrate_estimate(series, p.id, d, config.smoothing_window);

        if (d % static_cast<std::size_t>(config.interval_days) == 0) {
            // Rebuild the day's instance and re-optimize. Pools the window
            // estimate puts at zero cannot be modeled and sit out.
            std::vector<PoolSpec> pools;
            for (const auto& p : config.pools) {
                if (estimates[p.id] <= 0.0) continue;
                PoolSpec spec;
                spec.id = p.id;
                spec.currency = "c";
                spec.hashrate = estimates[p.id];
                spec.fee = p.fee;
                pools.push_back(std::move(spec));
            }
            Allocation next;
            for (const auto& p : config.pools) next.pool_alloc[p.id] = 0.0;
            if (pools.empty()) {
                next.solo_alloc["c"] = config.miner_power;
            } else {
                CurrencySpec cur;
                cur.id = "c";
                cur.algorithm = "pow";
                cur.block_reward = reward_per_block;
                cur.block_time = config.block_time;
                cur.total_hashrate = net_rate;
                cur.exchange_rate = day.exchange_rate;
                MinerProfile miner;
                miner.power_by_algorithm["pow"] = config.miner_power;
                miner.rho = config.rho;
                ProblemInstance inst =
                    ProblemInstance::validate({cur}, std::move(pools), std::move(miner));
                try {
                    AllocationReport report =
                        optimize(inst, Variant::SinglePplns, config.rho, config.solver);
                    for (const auto& [id, v] : report.allocation.pool_alloc)
                        next.pool_alloc[id] = v;
                    next.solo_alloc = report.allocation.solo_alloc;
                } catch (const Error& e) {
                    throw SolverFailed("reallocation on " + day.date + " failed: " + e.what());
                }
            }
            held = std::move(next);
        }

        double reward = 0.0;
        for (const auto& p : config.pools) {
            const double lam = held.pool_alloc.count(p.id) ? held.pool_alloc.at(p.id) : 0.0;
            if (lam <= 0.0) continue;
            const double blocks = day.pool_blocks.count(p.id) ? day.pool_blocks.at(p.id) : 0.0;
            reward += lam / (lam + estimates[p.id]) * (1.0 - p.fee) * blocks * reward_per_block;
        }
        double solo = 0.0;
        for (const auto& [cid, v] : held.solo_alloc) solo += v;
        reward += solo / net_rate * day.total_blocks * reward_per_block;

        DailyResult res;
        res.date = day.date;
        res.reward_usd = reward;
        res.allocation = held;
        res.network_hashrate = net_rate;
        res.pool_hashrate = estimates;
        summary.daily.push_back(std::move(res));
        rewards.push_back(reward);
    }
    summary.total_payoff = std::accumulate(rewards.begin(), rewards.end(), 0.0);
    summary.pps_baseline = pps_baseline(config, series);
    summary.reward_stddev = population_stddev(rewards);
    summary.sharpe = sharpe(rewards, summary.pps_baseline);
    return summary;
}

double pps_baseline(const BacktestConfig& config, const MarketSeries& series) {
    double total = 0.0;
    for (const auto& day : series.days) {
        total += config.miner_power / network_hashrate(day.difficulty) * day.total_blocks *
                 day_reward_usd(day) * (1.0 - config.pps_fee);
    }
    return total;
}

double sharpe(const std::vector<double>& daily_rewards, double pps_baseline_value) {
    if (daily_rewards.size() < 2) throw EmptyInput("sharpe needs at least two daily values");
    const double sigma = population_stddev(daily_rewards);
    if (sigma == 0.0) throw ZeroVariance("daily rewards have zero standard deviation");
    const double total = std::accumulate(daily_rewards.begin(), daily_rewards.end(), 0.0);
    return (total - pps_baseline_value) / sigma;
}

void write_summary(std::ostream& os, const BacktestSummary& summary,
                   const std::vector<std::string>& alloc_columns) {
    os << "date,reward_usd";
    for (const auto& c : alloc_columns) os << ",alloc_" << c;
    os << '\n';
    for (const auto& day : summary.daily) {
        os << day.date << ',' << fmt(day.reward_usd);
        for (const auto& c : alloc_columns) {
            double v = 0.0;
            if (c == "solo") {
                for (const auto& [cid, s] : day.allocation.solo_alloc) v += s;
            } else if (day.allocation.pool_alloc.count(c)) {
                v = day.allocation.pool_alloc.at(c);
            }
            os << ',' << fmt(v);
        }
        os << '\n';
    }
    os << "P=" << fmt(summary.total_payoff) << '\n';
    os << "P_PPS=" << fmt(summary.pps_baseline) << '\n';
    os << "sigma=" << fmt(summary.reward_stddev) << '\n';
    os << "S=" << fmt(summary.sharpe) << '\n';
}

}  // namespace poolopt
