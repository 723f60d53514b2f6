#include <doctest.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "poolopt/allocator.hpp"
#include "poolopt/backtest.hpp"
#include "poolopt/reward.hpp"
#include "poolopt/utility.hpp"
#include "support/fixtures.hpp"

// Acceptance suite: one test case per criterion, each printing a PASS or
// FAIL line so a run reads as a checklist.

using namespace poolopt;

namespace {

struct Timer {
    std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    }
};

void report(int criterion, bool pass, const std::string& detail) {
    std::printf("criterion %d: %s - %s\n", criterion, pass ? "PASS" : "FAIL", detail.c_str());
    std::fflush(stdout);
    CHECK_MESSAGE(pass, "criterion ", criterion, ": ", detail);
}

double total_power(const Allocation& a) {
    double sum = a.pps_alloc;
    for (const auto& [id, v] : a.pool_alloc) sum += v;
    for (const auto& [id, v] : a.solo_alloc) sum += v;
    return sum;
}

int run_cli(const std::string& args) {
    const std::string cmd = std::string(POOLOPT_CLI_PATH) + " " + args + " >/dev/null 2>&1";
    int status = -1;
    for (int attempt = 0; attempt < 3 && status == -1; ++attempt)
        status = std::system(cmd.c_str());  // -1: the shell could not be spawned
    return WEXITSTATUS(status);
}

}  // namespace

TEST_CASE("criterion 1: risk-neutral proxy prefers solo") {
    Timer timer;
    const double rho = 1e-12;
    const AllocationReport solved = optimize(fixtures::representative_pools(rho), Variant::SinglePplns, rho);
    const double solo_share = solved.allocation.solo_alloc.at("coin") / 40.0;

    const ObjectiveSpec spec = ObjectiveSpec::make(Variant::SinglePplns, fixtures::representative_pools(rho));
    const fixtures::GridBest oracle = fixtures::grid_oracle(spec, 0.02);
    const double u_solo = utility_single_pplns({}, spec);
    const double rel_gap = (oracle.value - u_solo) / std::abs(oracle.value);

    const bool solver_solo = solo_share >= 0.999;
    const bool grid_confirms = rel_gap <= 1e-9;
    const double elapsed = timer.seconds();

    char detail[256];
    std::snprintf(detail, sizeof(detail),
                  "solver solo share %.6f (need >= 0.999), grid gap %.3e relative "
                  "(need <= 1e-9), %.1fs",
                  solo_share, rel_gap, elapsed);
    report(1, solver_solo && grid_confirms && elapsed < 5.0, detail);

    // The rho = 0 path itself does return full solo (the documented
    // short-circuit); recorded here for contrast with the 1e-12 proxy,
    // where the zero-fee pool's free risk sharing wins.
    const AllocationReport at_zero = optimize(fixtures::representative_pools(rho), Variant::SinglePplns, 0.0);
    std::printf("  note: optimize(rho=0) allocates %.1f of 40.0 h/s to solo\n",
                at_zero.allocation.solo_alloc.at("coin"));
}

TEST_CASE("criterion 2: solver dominates the grid oracle on random instances") {
    Timer timer;
    std::mt19937 gen(2024);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    bool all_ok = true;
    double worst_margin = 1e300;

    for (int trial = 0; trial < 20; ++trial) {
        const int n_pools = 2 + trial % 4;  // 2..5
        CurrencySpec coin;
        coin.id = "coin";
        coin.algorithm = "h1";
        coin.block_reward = 50000.0;
        coin.total_hashrate = 0.0;
        std::vector<PoolSpec> pools;
        double min_pool = 1e300;
        for (int i = 0; i < n_pools; ++i) {
            PoolSpec p;
            p.id = "p" + std::to_string(i);
            p.currency = "coin";
            p.hashrate = std::pow(10.0, 3.0 + 6.0 * unif(gen));  // six orders of magnitude
            p.fee = 0.04 * unif(gen);
            min_pool = std::min(min_pool, p.hashrate);
            coin.total_hashrate += p.hashrate;
            pools.push_back(p);
        }
        coin.total_hashrate *= 1.0 + unif(gen);
        MinerProfile miner;
        miner.power_by_algorithm["h1"] = min_pool * (0.1 + 0.9 * unif(gen));
        miner.rho = 1e-5;
        const ProblemInstance inst = ProblemInstance::validate({coin}, pools, miner);

        for (double rho : {1e-5, 5e-5, 1e-4}) {
            const AllocationReport solved = optimize(inst, Variant::SinglePplns, rho);
            const ObjectiveSpec spec = ObjectiveSpec::make(
                Variant::SinglePplns,
                ProblemInstance::validate(inst.currencies(), inst.pools(), [&] {
                    MinerProfile m = inst.miner();
                    m.rho = rho;
                    return m;
                }()));
            const fixtures::GridBest oracle = fixtures::grid_oracle(spec, 0.02);
            const double margin =
                solved.utility - (oracle.value - 1e-9 * (1.0 + std::abs(oracle.value)));
            worst_margin = std::min(worst_margin, margin);
            all_ok = all_ok && margin >= 0.0;
        }
    }
    const double elapsed = timer.seconds();
    char detail[256];
    std::snprintf(detail, sizeof(detail),
                  "20 instances x 3 rho values, worst margin %.3e, %.1fs (limit 60s)",
                  worst_margin, elapsed);
    report(2, all_ok && elapsed < 60.0, detail);
}

TEST_CASE("criterion 3: closed-form MGF factors match the Monte-Carlo estimate") {
    Timer timer;
    const ProblemInstance inst = fixtures::representative_pools(1e-4);
    const ObjectiveSpec spec = ObjectiveSpec::make(Variant::SinglePplns, inst);
    Allocation equal_split;
    for (const auto& p : inst.pools()) equal_split.pool_alloc[p.id] = 8.0;

    const McUtility mc = monte_carlo_utility(equal_split, spec, 1000000, 42);
    bool ok = std::abs(mc.estimate - mc.analytic) <= 3.0 * mc.std_error;
    for (const auto& c : mc.components) {
        if (c.mc_factor_std_error > 0.0)
            ok = ok && std::abs(c.mc_factor - c.analytic_factor) <= 3.0 * c.mc_factor_std_error;
        else
            ok = ok && c.mc_factor == c.analytic_factor;
    }

    const int exit_code =
        run_cli(std::string("mgf-check --config ") + POOLOPT_DATA_DIR + "/representative_pools.json");
    ok = ok && exit_code == 0;

    const double elapsed = timer.seconds();
    char detail[256];
    std::snprintf(detail, sizeof(detail),
                  "estimate %.6f vs analytic %.6f (se %.2e), mgf-check exit %d, %.1fs "
                  "(limit 30s)",
                  mc.estimate, mc.analytic, mc.std_error, exit_code, elapsed);
    report(3, ok && elapsed < 30.0, detail);
}

TEST_CASE("criterion 4: risk-aversion transition across the representative pools") {
    const AllocationReport low = optimize(fixtures::representative_pools(), Variant::SinglePplns, 1e-6);
    double largest_pool = -1.0;
    std::string largest_id;
    for (const auto& [id, v] : low.allocation.pool_alloc) {
        if (v > largest_pool) {
            largest_pool = v;
            largest_id = id;
        }
    }
    const bool low_ok = largest_id == "pool4";

    const AllocationReport high = optimize(fixtures::representative_pools(), Variant::SinglePplns, 1e-4);
    const double p1 = high.allocation.pool_alloc.at("pool1");
    const double p2 = high.allocation.pool_alloc.at("pool2");
    const bool high_ok = p1 > 0.0 && p2 > 0.0 && p1 > p2;

    char detail[256];
    std::snprintf(detail, sizeof(detail),
                  "rho=1e-6 largest pool=%s (%.2f h/s); rho=1e-4 pool1=%.2f > pool2=%.2f > 0",
                  largest_id.c_str(), largest_pool, p1, p2);
    report(4, low_ok && high_ok, detail);
}

TEST_CASE("criterion 5: the small miner takes the lowest-fee pool") {
    bool ok = true;
    double worst = 1.0;
    for (double rho : {1e-5, 2e-5, 5e-5}) {
        const AllocationReport r = optimize(fixtures::bitcoin_pools(125e12), Variant::SinglePplns, rho);
        const double share = r.allocation.pool_alloc.at("kanopool") / 125e12;
        worst = std::min(worst, share);
        ok = ok && share >= 0.99;
    }
    char detail[128];
    std::snprintf(detail, sizeof(detail), "min kanopool share %.4f over rho {1e-5,2e-5,5e-5}",
                  worst);
    report(5, ok, detail);
}

TEST_CASE("criterion 6: exchange-rate sensitivity eliminates one side") {
    const ProblemInstance inst = fixtures::btc_bch_pools();
    const std::vector<double> grid = default_rho_grid();

    const SweepSeries favor_btc =
        exchange_rate_scenario(inst, Variant::MultiCurrency, {{"btc", 0.035}}, grid);
    double max_bch = 0.0;
    for (const auto& r : favor_btc.reports)
        max_bch = std::max(max_bch, r.allocation.pool_alloc.at("viabtc_bch"));

    const SweepSeries favor_bch =
        exchange_rate_scenario(inst, Variant::MultiCurrency, {{"btc", 0.033}}, grid);
    double max_btc = 0.0;
    for (const auto& r : favor_bch.reports) {
        max_btc = std::max(max_btc, r.allocation.pool_alloc.at("slush"));
        max_btc = std::max(max_btc, r.allocation.pool_alloc.at("kanopool"));
    }

    char detail[160];
    std::snprintf(detail, sizeof(detail),
                  "at 0.035 max BCH-pool alloc %.3g h/s; at 0.033 max BTC-pool alloc %.3g h/s",
                  max_bch, max_btc);
    report(6, max_bch == 0.0 && max_btc == 0.0, detail);
}

TEST_CASE("criterion 7: strategies 1 and 2 pay the same amount") {
    std::mt19937 gen(7777);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    bool ok = true;
    for (int i = 0; i < 1000; ++i) {
        DualSchemeContext ctx;
        ctx.block_reward = 1.0 + 99999.0 * unif(gen);
        ctx.pps_fraction = 0.05 + 0.95 * unif(gen);
        ctx.pool_hashrate = std::pow(10.0, 1.0 + 9.0 * unif(gen));
        ctx.miner_rate = ctx.pps_fraction * ctx.pool_hashrate * unif(gen);
        const double a = strategy1_reward(ctx);
        const double b = strategy2_reward(ctx);
        ok = ok && std::abs(a - b) <= 1e-12 * std::max(1.0, std::abs(a));
    }
    report(7, ok, "1000 random contexts, relative tolerance 1e-12");
}

TEST_CASE("criterion 8: joint hashrate scaling scales the optimum") {
    const AllocationReport base = optimize(fixtures::representative_pools(), Variant::SinglePplns, 1e-4);
    bool ok = true;
    double worst = 0.0;
    for (double k : {1e-3, 1e3}) {
        const ProblemInstance inst = fixtures::representative_pools();
        std::vector<CurrencySpec> currencies = inst.currencies();
        currencies[0].total_hashrate *= k;
        std::vector<PoolSpec> pools = inst.pools();
        for (auto& p : pools) p.hashrate *= k;
        MinerProfile miner = inst.miner();
        miner.power_by_algorithm["h1"] *= k;
        const AllocationReport scaled = optimize(
            ProblemInstance::validate(currencies, pools, miner), Variant::SinglePplns, 1e-4);
        for (const auto& [id, v] : base.allocation.pool_alloc) {
            const double err = std::abs(scaled.allocation.pool_alloc.at(id) - k * v) / (k * 40.0);
            worst = std::max(worst, err);
            ok = ok && err <= 1e-6;
        }
    }
    char detail[128];
    std::snprintf(detail, sizeof(detail), "worst componentwise error %.3e (limit 1e-6)", worst);
    report(8, ok, detail);
}

TEST_CASE("criterion 9: backtest against a hand-derived synthetic series") {
    // 30 days: constant difficulty and exchange rate, the pool's block
    // count alternating 6/2 of a constant 144 per day. The truncated
    // smoothing windows early in the series move the pool estimate, and
    // with the miner about nine pool sizes the optimum sits strictly
    // between all-pool and all-solo, so reallocations actually move.
    const std::string path = "/tmp/poolopt_acceptance_backtest.csv";
    {
        std::ofstream out(path);
        out << "date,exchange_rate,difficulty,coinbase_reward,total_blocks,poolx\n";
        for (int d = 0; d < 30; ++d) {
            out << "2018-03-" << (d + 1 < 10 ? "0" : "") << d + 1 << ",1600,6.7e8,12.5,144,"
                << (d % 2 == 0 ? 6 : 2) << '\n';
        }
    }
    const MarketSeries series = load_market_data(path, {"poolx"});
    BacktestConfig config;
    config.miner_power = 1200e12;
    config.rho = 5e-5;
    config.interval_days = 3;
    config.pools = {{"poolx", 0.02}};
    config.pps_fee = 0.04;
    config.smoothing_window = 14;

    const BacktestSummary passive = run_passive(config, series, "poolx");

    // Closed form, assembled independently: window sums of the alternating
    // pattern give the smoothed pool rate, and every other quantity is
    // constant.
    const double network = (4294967296.0 / 600.0) * 6.7e8;
    const double reward_per_block = 12.5 * 1600.0;
    std::vector<double> expected;
    double pool_window = 0.0, total_window = 0.0;
    std::vector<double> pool_hist;
    for (int d = 0; d < 30; ++d) {
        pool_hist.push_back(d % 2 == 0 ? 6.0 : 2.0);
        pool_window += pool_hist.back();
        total_window += 144.0;
        if (d >= 14) {
            pool_window -= pool_hist[static_cast<std::size_t>(d - 14)];
            total_window -= 144.0;
        }
        const double est = network * pool_window / total_window;
        const double share = config.miner_power / (config.miner_power + est);
        expected.push_back(share * 0.98 * pool_hist.back() * reward_per_block);
    }
    double p_expect = 0.0;
    for (double r : expected) p_expect += r;
    const double mean = p_expect / 30.0;
    double ss = 0.0;
    for (double r : expected) ss += (r - mean) * (r - mean);
    const double sigma_expect = std::sqrt(ss / 30.0);
    const double baseline_expect =
        30.0 * (config.miner_power / network) * 144.0 * reward_per_block * 0.96;
    const double sharpe_expect = (p_expect - baseline_expect) / sigma_expect;

    const bool p_ok = std::abs(passive.total_payoff - p_expect) <= 1e-9 * std::abs(p_expect);
    const bool s_ok =
        std::abs(passive.reward_stddev - sigma_expect) <= 1e-9 * std::abs(sigma_expect);
    const bool sharpe_ok = std::abs(passive.sharpe - sharpe_expect) <= 1e-9 * std::abs(sharpe_expect);

    const BacktestSummary active = run_active(config, series);
    bool aligned = true;
    bool any_change = false;
    for (std::size_t d = 1; d < active.daily.size(); ++d) {
        const bool changed = active.daily[d].allocation != active.daily[d - 1].allocation;
        if (d % 3 != 0 && changed) aligned = false;
        any_change = any_change || changed;
    }

    char detail[256];
    std::snprintf(detail, sizeof(detail),
                  "P %.6f (expect %.6f), sigma %.6f, S %.6f; active changes "
                  "interval-aligned=%s",
                  passive.total_payoff, p_expect, passive.reward_stddev, passive.sharpe,
                  aligned ? "yes" : "no");
    report(9, p_ok && s_ok && sharpe_ok && aligned && any_change, detail);
}

TEST_CASE("criterion 10: paper-scale reproduction is dataset-dependent") {
    // Reproducing the headline Feb-May 2018 numbers needs a rebuilt daily
    // dataset (per-pool block counts, difficulty and exchange rate) that
    // this repository cannot ship. When such a file is supplied, the
    // backtest is expected to land within 5% of P_A=$101221 / P_P=$97101
    // and within 0.02 of S_A=0.156 / S_P=0.060 under the documented
    // parameters; see README for the invocation.
    const char* dataset = std::getenv("POOLOPT_2018_DATASET");
    if (!dataset) {
        std::printf("criterion 10: SKIP - optional reproduction, no 2018 dataset supplied\n");
        return;
    }
    const MarketSeries series = load_market_data(dataset, {"slush", "viabtc", "dpool"});
    BacktestConfig config;
    config.miner_power = 1200e12;
    config.rho = 5e-5;
    config.interval_days = 3;
    config.pools = {{"slush", 0.02}, {"viabtc", 0.02}, {"dpool", 0.01}};
    config.pps_fee = 0.04;
    config.start_date = "2018-02-01";
    config.end_date = "2018-05-31";
    const BacktestSummary passive = run_passive(config, series, "slush");
    const BacktestSummary active = run_active(config, series);
    char detail[256];
    std::snprintf(detail, sizeof(detail), "P_A=%.0f P_P=%.0f S_A=%.3f S_P=%.3f",
                  active.total_payoff, passive.total_payoff, active.sharpe, passive.sharpe);
    const bool ok = std::abs(active.total_payoff - 101221.0) <= 0.05 * 101221.0 &&
                    std::abs(passive.total_payoff - 97101.0) <= 0.05 * 97101.0 &&
                    std::abs(active.sharpe - 0.156) <= 0.02 &&
                    std::abs(passive.sharpe - 0.060) <= 0.02;
    report(10, ok, detail);
}
