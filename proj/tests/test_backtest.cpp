#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>
#include <string>

#include "poolopt/backtest.hpp"
#include "support/fixtures.hpp"

using namespace poolopt;

namespace {

std::string write_temp_csv(const std::string& name, const std::string& content) {
    const std::string path = std::string("/tmp/poolopt_test_") + name + ".csv";
    std::ofstream out(path);
    out << content;
    return path;
}

// 30 days, constant difficulty and block counts, exchange rate cycling
// through three levels so daily rewards vary deterministically.
MarketSeries synthetic_series(int days = 30) {
    std::ostringstream os;
    os << "date,exchange_rate,difficulty,coinbase_reward,total_blocks,poolx\n";
    for (int d = 0; d < days; ++d) {
        const int day = d + 1;
        const double rate = 8000.0 + 100.0 * (d % 3);
        os << "2018-03-" << (day < 10 ? "0" : "") << day << ',' << rate
           << ",3007383866429.73,12.5,144,36\n";
    }
    const std::string path = write_temp_csv("synthetic", os.str());
    return load_market_data(path, {"poolx"});
}

BacktestConfig synthetic_config() {
    BacktestConfig config;
    config.miner_power = 1200e12;
    config.rho = 5e-5;
    config.interval_days = 3;
    config.pools = {{"poolx", 0.02}};
    config.pps_fee = 0.04;
    config.smoothing_window = 14;
    return config;
}

}  // namespace

TEST_CASE("network hashrate from difficulty") {
    CHECK(network_hashrate(1.0) == doctest::Approx(4294967296.0 / 600.0).epsilon(1e-15));
    CHECK(network_hashrate(1.0) == doctest::Approx(7158278.827).epsilon(1e-9));
    CHECK(network_hashrate(600.0 / 4294967296.0) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(network_hashrate(2.0) == doctest::Approx(2.0 * network_hashrate(1.0)).epsilon(1e-15));
    CHECK_THROWS_AS(network_hashrate(0.0), Error);
}

TEST_CASE("market data loading") {
    const MarketSeries series = synthetic_series();
    CHECK(series.days.size() == 30);
    CHECK(series.pool_columns == std::vector<std::string>{"poolx"});
    CHECK(series.gaps.empty());
    CHECK(series.days[0].exchange_rate == 8000.0);
    CHECK(series.days[1].pool_blocks.at("poolx") == 36.0);
}

TEST_CASE("market data rejects bad files") {
    const std::string dup = write_temp_csv("dup",
                                           "date,exchange_rate,difficulty,coinbase_reward,"
                                           "total_blocks,p\n"
                                           "2018-01-01,8000,1e12,12.5,144,10\n"
                                           "2018-01-01,8000,1e12,12.5,144,10\n");
    CHECK_THROWS_AS(load_market_data(dup), NonMonotoneDates);

    const std::string decreasing = write_temp_csv("dec",
                                                  "date,exchange_rate,difficulty,"
                                                  "coinbase_reward,total_blocks,p\n"
                                                  "2018-01-02,8000,1e12,12.5,144,10\n"
                                                  "2018-01-01,8000,1e12,12.5,144,10\n");
    CHECK_THROWS_AS(load_market_data(decreasing), NonMonotoneDates);

    const std::string good = write_temp_csv("good",
                                            "date,exchange_rate,difficulty,coinbase_reward,"
                                            "total_blocks,p\n"
                                            "2018-01-01,8000,1e12,12.5,144,10\n");
    CHECK_THROWS_AS(load_market_data(good, {"other_pool"}), MissingColumn);

    const std::string bad_number = write_temp_csv("badnum",
                                                  "date,exchange_rate,difficulty,"
                                                  "coinbase_reward,total_blocks,p\n"
                                                  "2018-01-01,xyz,1e12,12.5,144,10\n");
    CHECK_THROWS_AS(load_market_data(bad_number), ParseError);

    const std::string bad_header = write_temp_csv("badhdr",
                                                  "date,rate,difficulty,coinbase_reward,"
                                                  "total_blocks\n");
    CHECK_THROWS_AS(load_market_data(bad_header), MissingColumn);

    CHECK_THROWS_AS(load_market_data("/tmp/poolopt_no_such_file.csv"), Error);
}

TEST_CASE("calendar gaps are reported, empty pool cells read as zero") {
    const std::string path = write_temp_csv("gap",
                                            "date,exchange_rate,difficulty,coinbase_reward,"
                                            "total_blocks,p\n"
                                            "2018-01-01,8000,1e12,12.5,144,10\n"
                                            "2018-01-04,8000,1e12,12.5,144,\n");
    const MarketSeries series = load_market_data(path);
    REQUIRE(series.gaps.size() == 1);
    CHECK(series.gaps[0] == "2018-01-01..2018-01-04");
    CHECK(series.days[1].pool_blocks.at("p") == 0.0);
}

TEST_CASE("pool hashrate estimation") {
    const MarketSeries series = synthetic_series();
    // The pool finds 36 of 144 blocks every day: a quarter of the network.
    const double network = network_hashrate(series.days[20].difficulty);
    CHECK(pool_hashrate_estimate(series, "poolx", 20, 14) ==
          doctest::Approx(network / 4.0).epsilon(1e-12));
    // Window truncation at the series start changes nothing here.
    CHECK(pool_hashrate_estimate(series, "poolx", 0, 14) ==
          doctest::Approx(network / 4.0).epsilon(1e-12));

    const std::string full = write_temp_csv("full",
                                            "date,exchange_rate,difficulty,coinbase_reward,"
                                            "total_blocks,p\n"
                                            "2018-01-01,8000,1e12,12.5,100,100\n");
    const MarketSeries all_blocks = load_market_data(full);
    CHECK(pool_hashrate_estimate(all_blocks, "p", 0, 14) ==
          doctest::Approx(network_hashrate(1e12)).epsilon(1e-12));

    const std::string none = write_temp_csv("none",
                                            "date,exchange_rate,difficulty,coinbase_reward,"
                                            "total_blocks,p\n"
                                            "2018-01-01,8000,1e12,12.5,144,0\n");
    CHECK(pool_hashrate_estimate(load_market_data(none), "p", 0, 14) == 0.0);

    const std::string silent = write_temp_csv("silent",
                                              "date,exchange_rate,difficulty,coinbase_reward,"
                                              "total_blocks,p\n"
                                              "2018-01-01,8000,1e12,12.5,0,0\n");
    CHECK_THROWS_AS(pool_hashrate_estimate(load_market_data(silent), "p", 0, 14), EmptyWindow);
}

TEST_CASE("window sanity: tracked estimates never exceed the network rate") {
    std::mt19937 gen(31);
    std::uniform_int_distribution<int> blocks(0, 60);
    std::ostringstream os;
    os << "date,exchange_rate,difficulty,coinbase_reward,total_blocks,a,b,c\n";
    for (int d = 1; d <= 28; ++d) {
        const int na = blocks(gen), nb = blocks(gen), nc = blocks(gen);
        const int total = na + nb + nc + blocks(gen);
        os << "2018-02-" << (d < 10 ? "0" : "") << d << ",8000," << (1e12 + 1e10 * d)
           << ",12.5," << total << ',' << na << ',' << nb << ',' << nc << '\n';
    }
    const MarketSeries series = load_market_data(write_temp_csv("sanity", os.str()));
    for (std::size_t d = 0; d < series.days.size(); ++d) {
        double sum = 0.0;
        for (const auto& pool : series.pool_columns)
            sum += pool_hashrate_estimate(series, pool, d, 14);
        CHECK(sum <= network_hashrate(series.days[d].difficulty) * (1.0 + 1e-9));
    }
}

TEST_CASE("passive run matches the hand-derived closed form") {
    const MarketSeries series = synthetic_series();
    const BacktestConfig config = synthetic_config();
    const BacktestSummary summary = run_passive(config, series, "poolx");

    // Constant pool share: Lambda_m = network/4; the daily reward is
    // share * (1-fee) * 36 * 12.5 * E_d with the rate cycling 8000/8100/8200.
    const double network = network_hashrate(series.days[0].difficulty);
    const double pool_rate = network / 4.0;
    const double share = config.miner_power / (config.miner_power + pool_rate);
    double expect_total = 0.0;
    std::vector<double> rewards;
    for (int d = 0; d < 30; ++d) {
        const double rate = 8000.0 + 100.0 * (d % 3);
        const double r = share * 0.98 * 36.0 * 12.5 * rate;
        rewards.push_back(r);
        expect_total += r;
    }
    CHECK(summary.total_payoff == doctest::Approx(expect_total).epsilon(1e-12));

    double mean = expect_total / 30.0, ss = 0.0;
    for (double r : rewards) ss += (r - mean) * (r - mean);
    const double sigma = std::sqrt(ss / 30.0);
    CHECK(summary.reward_stddev == doctest::Approx(sigma).epsilon(1e-12));

    double baseline = 0.0;
    for (int d = 0; d < 30; ++d) {
        const double rate = 8000.0 + 100.0 * (d % 3);
        baseline += config.miner_power / network * 144.0 * 12.5 * rate * 0.96;
    }
    CHECK(summary.pps_baseline == doctest::Approx(baseline).epsilon(1e-12));
    CHECK(summary.sharpe ==
          doctest::Approx((expect_total - baseline) / sigma).epsilon(1e-12));
}

TEST_CASE("pps baseline closed form and edge cases") {
    const MarketSeries series = synthetic_series();
    BacktestConfig config = synthetic_config();

    config.pps_fee = 1.0;
    CHECK(pps_baseline(config, series) == 0.0);

    config.pps_fee = 0.04;
    config.miner_power = 0.0;
    CHECK(pps_baseline(config, series) == 0.0);
}

TEST_CASE("sharpe ratio: hand values and error paths") {
    CHECK(sharpe({0.0, 2.0}, 1.0) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK_THROWS_AS(sharpe({5.0, 5.0, 5.0}, 15.0), ZeroVariance);
    CHECK_THROWS_AS(sharpe({5.0}, 1.0), EmptyInput);
}

TEST_CASE("constant series raises ZeroVariance; one perturbed day fixes it") {
    std::ostringstream os;
    os << "date,exchange_rate,difficulty,coinbase_reward,total_blocks,p\n";
    for (int d = 1; d <= 10; ++d)
        os << "2018-04-" << (d < 10 ? "0" : "") << d << ",8000,1e12,12.5,144,36\n";
    const MarketSeries constant = load_market_data(write_temp_csv("const", os.str()));
    BacktestConfig config = synthetic_config();
    config.pools = {{"p", 0.02}};
    CHECK_THROWS_AS(run_passive(config, constant, "p"), ZeroVariance);

    std::ostringstream os2;
    os2 << "date,exchange_rate,difficulty,coinbase_reward,total_blocks,p\n";
    for (int d = 1; d <= 9; ++d)
        os2 << "2018-04-0" << d << ",8000,1e12,12.5,144,36\n";
    os2 << "2018-04-10,9000,1e12,12.5,144,36\n";
    const MarketSeries perturbed = load_market_data(write_temp_csv("perturbed", os2.str()));
    const BacktestSummary summary = run_passive(config, perturbed, "p");

    const double network = network_hashrate(1e12);
    const double share = config.miner_power / (config.miner_power + network / 4.0);
    const double base_reward = share * 0.98 * 36.0 * 12.5 * 8000.0;
    const double bumped = base_reward * 9000.0 / 8000.0;
    // Population sigma of nine equal values and one outlier.
    const double mean = (9.0 * base_reward + bumped) / 10.0;
    const double sigma = std::sqrt((9.0 * (base_reward - mean) * (base_reward - mean) +
                                    (bumped - mean) * (bumped - mean)) /
                                   10.0);
    CHECK(summary.reward_stddev == doctest::Approx(sigma).epsilon(1e-12));
    CHECK(std::isfinite(summary.sharpe));
}

TEST_CASE("daily pool reward is linear in a small miner's power") {
    const MarketSeries series = synthetic_series();
    BacktestConfig small = synthetic_config();
    small.miner_power = 1e9;  // far below the pool's ~1.3e19 estimate
    BacktestConfig doubled = small;
    doubled.miner_power = 2e9;
    const double p1 = run_passive(small, series, "poolx").total_payoff;
    const double p2 = run_passive(doubled, series, "poolx").total_payoff;
    CHECK(p2 / p1 == doctest::Approx(2.0).epsilon(0.01));
}

TEST_CASE("active run: allocations change only at interval boundaries") {
    // Parameters picked so the pool/solo optimum is interior: the miner is
    // about nine times the pool, rho R close to 1. The cycling exchange
    // rate then moves the optimum at every re-allocation.
    std::ostringstream os;
    os << "date,exchange_rate,difficulty,coinbase_reward,total_blocks,poolx\n";
    for (int d = 0; d < 30; ++d) {
        const int day = d + 1;
        os << "2018-03-" << (day < 10 ? "0" : "") << day << ','
           << 1550.0 + 50.0 * (d % 3) << ",6.7e8,12.5,144,4\n";
    }
    const MarketSeries series =
        load_market_data(write_temp_csv("interval", os.str()), {"poolx"});
    BacktestConfig config = synthetic_config();
    config.interval_days = 5;
    const BacktestSummary summary = run_active(config, series);
    REQUIRE(summary.daily.size() == 30);

    bool any_change = false;
    for (std::size_t d = 1; d < summary.daily.size(); ++d) {
        const bool changed =
            summary.daily[d].allocation != summary.daily[d - 1].allocation;
        if (d % 5 != 0) CHECK_FALSE(changed);
        any_change = any_change || changed;
    }
    CHECK(any_change);  // the cycling exchange rate moves the optimum
}

TEST_CASE("active run over the backtest period only") {
    const MarketSeries series = synthetic_series();
    BacktestConfig config = synthetic_config();
    config.start_date = "2018-03-05";
    config.end_date = "2018-03-14";
    const BacktestSummary summary = run_active(config, series);
    REQUIRE(summary.daily.size() == 10);
    CHECK(summary.daily.front().date == "2018-03-05");
    CHECK(summary.daily.back().date == "2018-03-14");
}

TEST_CASE("backtest summaries are byte-reproducible") {
    const MarketSeries series = synthetic_series();
    const BacktestConfig config = synthetic_config();
    const BacktestSummary a = run_active(config, series);
    const BacktestSummary b = run_active(config, series);
    std::ostringstream sa, sb;
    write_summary(sa, a, {"poolx", "solo"});
    write_summary(sb, b, {"poolx", "solo"});
    CHECK(sa.str() == sb.str());
    CHECK(sa.str().find("P=") != std::string::npos);
    CHECK(sa.str().find("P_PPS=") != std::string::npos);
    CHECK(sa.str().find("sigma=") != std::string::npos);
    CHECK(sa.str().find("S=") != std::string::npos);
}

TEST_CASE("single-pool active runs stay near the passive trajectory") {
    // With one pool and a typical rho the optimizer sends essentially all
    // power to that pool, so active and passive rewards nearly coincide.
    const MarketSeries series = synthetic_series();
    const BacktestConfig config = synthetic_config();
    const BacktestSummary active = run_active(config, series);
    const BacktestSummary passive = run_passive(config, series, "poolx");
    CHECK(active.total_payoff ==
          doctest::Approx(passive.total_payoff).epsilon(0.02));
}
