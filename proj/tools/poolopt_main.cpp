// poolopt: hash-power allocation across mining pools, plus a historical
// backtest of active re-diversification against passive single-pool
// mining. Subcommands read one JSON config and write plain tabular text.

#include <cmath>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "poolopt/allocator.hpp"
#include "poolopt/backtest.hpp"
#include "poolopt/config.hpp"
#include "poolopt/reward.hpp"
#include "poolopt/utility.hpp"

namespace {

struct CommonArgs {
    std::string config_path;
    std::string out_path;
    std::vector<std::string> overrides;
    int jobs = 1;
    long seed = -1;  // -1: take the config's seed
};

void add_common(CLI::App* cmd, CommonArgs& args) {
    cmd->add_option("--config", args.config_path, "JSON config file")->required();
    cmd->add_option("--out", args.out_path, "output file (stdout when omitted)");
    cmd->add_option("--set", args.overrides, "key=value override, repeatable");
    cmd->add_option("--jobs", args.jobs, "parallel solves for sweeps")->default_val(1);
    cmd->add_option("--seed", args.seed, "RNG seed override");
}

poolopt::Json load_config(const CommonArgs& args) {
    poolopt::Json config = poolopt::load_json_file(args.config_path);
    for (const auto& kv : args.overrides) poolopt::apply_override(config, kv);
    return config;
}

void warn_dropped_pools(const poolopt::ProblemInstance& instance, poolopt::Variant variant) {
    const poolopt::ObjectiveSpec spec = poolopt::ObjectiveSpec::make(variant, instance);
    for (const auto& id : spec.dropped_pools())
        std::cerr << "warning: ignoring PPS pool '" << id
                  << "' (a cheaper PPS pool is available)\n";
}

void write_text(const CommonArgs& args, const std::string& text) {
    if (args.out_path.empty()) {
        std::cout << text;
        return;
    }
    std::ofstream out(args.out_path);
    if (!out) throw poolopt::Error("cannot open output file '" + args.out_path + "'");
    out << text;
}

int cmd_optimize(const CommonArgs& args) {
    const poolopt::Json config = load_config(args);
    const poolopt::ProblemInstance instance = poolopt::instance_from_json(config);
    const poolopt::Variant variant = poolopt::variant_from_json(config, instance);
    if (!config.contains("rho")) throw poolopt::Error("config: missing 'rho'");
    const double rho = config["rho"].get<double>();
    const poolopt::SolverConfig solver = poolopt::solver_from_json(config);
    warn_dropped_pools(instance, variant);

    const poolopt::AllocationReport report =
        poolopt::optimize(instance, variant, rho, solver);
    std::ostringstream os;
    poolopt::write_report(os, report);
    write_text(args, os.str());
    return 0;
}

int cmd_sweep(const CommonArgs& args, bool scenario) {
    const poolopt::Json config = load_config(args);
    const poolopt::ProblemInstance instance = poolopt::instance_from_json(config);
    const poolopt::Variant variant = poolopt::variant_from_json(config, instance);
    const std::vector<double> grid = poolopt::rho_grid_from_json(config);
    const poolopt::SolverConfig solver = poolopt::solver_from_json(config);
    warn_dropped_pools(instance, variant);

    poolopt::SweepSeries series;
    if (scenario) {
        if (!config.contains("rate_overrides") || !config["rate_overrides"].is_object())
            throw poolopt::Error("config: missing 'rate_overrides' object");
        std::map<std::string, double> overrides;
        for (const auto& [id, v] : config["rate_overrides"].items())
            overrides[id] = v.get<double>();
        series = poolopt::exchange_rate_scenario(instance, variant, overrides, grid, solver,
                                                 args.jobs);
    } else {
        series = poolopt::sweep_rho(instance, variant, grid, solver, args.jobs);
    }
    std::ostringstream os;
    poolopt::write_sweep_csv(os, series);
    write_text(args, os.str());
    return 0;
}

int cmd_backtest(const CommonArgs& args) {
    const poolopt::Json config = load_config(args);
    poolopt::BacktestConfig bt = poolopt::backtest_from_json(config);
    const poolopt::Json& j = config["backtest"];
    const std::string data_path =
        j.contains("data") ? j["data"].get<std::string>()
                           : throw poolopt::Error("backtest: missing 'data' path");
    std::string mode = j.contains("mode") ? j["mode"].get<std::string>() : "both";

    std::vector<std::string> required;
    for (const auto& p : bt.pools) required.push_back(p.id);
    const poolopt::MarketSeries series = poolopt::load_market_data(data_path, required);
    for (const auto& gap : series.gaps)
        std::cerr << "warning: gap in market data " << gap << '\n';

    std::ostringstream os;
    if (mode == "passive" || mode == "both") {
        const std::string pool_id =
            j.contains("passive_pool") ? j["passive_pool"].get<std::string>()
                                       : bt.pools.front().id;
        const poolopt::BacktestSummary passive = poolopt::run_passive(bt, series, pool_id);
        os << "# passive " << pool_id << '\n';
        poolopt::write_summary(os, passive, {});
    }
    if (mode == "active" || mode == "both") {
        const poolopt::BacktestSummary active = poolopt::run_active(bt, series);
        std::vector<std::string> columns;
        for (const auto& p : bt.pools) columns.push_back(p.id);
        columns.push_back("solo");
        os << "# active\n";
        poolopt::write_summary(os, active, columns);
    }
    if (mode != "passive" && mode != "active" && mode != "both")
        throw poolopt::Error("backtest.mode must be passive, active or both");
    write_text(args, os.str());
    return 0;
}

int cmd_payout(const CommonArgs& args) {
    const poolopt::Json config = load_config(args);
    if (!config.contains("payout") || !config["payout"].is_object())
        throw poolopt::Error("config: missing 'payout' object");
    const poolopt::Json& j = config["payout"];

    poolopt::DualSchemeContext ctx;
    ctx.block_reward = j.at("block_reward").get<double>();
    if (j.contains("pps_fraction")) ctx.pps_fraction = j["pps_fraction"].get<double>();
    ctx.pool_hashrate = j.at("pool_hashrate").get<double>();
    ctx.miner_rate = j.at("miner_rate").get<double>();
    if (j.contains("pps_paid_since_last_block"))
        ctx.pps_paid_since_last_block = j["pps_paid_since_last_block"].get<double>();
    const int strategy = j.contains("strategy") ? j["strategy"].get<int>() : 1;

    double reward;
    switch (strategy) {
        case 1: reward = poolopt::strategy1_reward(ctx); break;
        case 2: reward = poolopt::strategy2_reward(ctx); break;
        case 3: reward = poolopt::strategy3_reward(ctx); break;
        default: throw poolopt::Error("payout.strategy must be 1, 2 or 3");
    }
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", reward);
    write_text(args, std::string("strategy=") + std::to_string(strategy) + "\nreward_usd=" +
                         buf + "\n");
    return 0;
}

int cmd_mgf_check(const CommonArgs& args) {
    const poolopt::Json config = load_config(args);
    const poolopt::ProblemInstance instance = poolopt::instance_from_json(config);
    const poolopt::Variant variant = poolopt::variant_from_json(config, instance);
    if (!config.contains("mgf") || !config["mgf"].is_object())
        throw poolopt::Error("config: missing 'mgf' object");
    const poolopt::Json& j = config["mgf"];
    const poolopt::Allocation alloc = poolopt::allocation_from_json(j.at("allocation"));
    const std::int64_t draws = j.contains("draws") ? j["draws"].get<std::int64_t>() : 1000000;
    std::uint64_t seed = j.contains("seed") ? j["seed"].get<std::uint64_t>() : 42;
    if (args.seed >= 0) seed = static_cast<std::uint64_t>(args.seed);

    const poolopt::ObjectiveSpec spec = poolopt::ObjectiveSpec::make(variant, instance);
    const poolopt::McUtility mc = poolopt::monte_carlo_utility(alloc, spec, draws, seed);

    auto fmt = [](double v) {
        char buf[64];
        std::snprintf(buf, sizeof(buf), "%.12g", v);
        return std::string(buf);
    };
    std::ostringstream os;
    os << "draws=" << draws << " seed=" << seed << '\n';
    bool ok = true;
    for (const auto& c : mc.components) {
        const double diff = std::abs(c.mc_factor - c.analytic_factor);
        const double limit = 3.0 * c.mc_factor_std_error;
        const bool pass = diff <= limit || diff == 0.0;
        ok = ok && pass;
        os << "component " << c.id << ": analytic=" << fmt(c.analytic_factor)
           << " mc=" << fmt(c.mc_factor) << " se=" << fmt(c.mc_factor_std_error) << ' '
           << (pass ? "ok" : "MISMATCH") << '\n';
    }
    const double total_diff = std::abs(mc.estimate - mc.analytic);
    const double total_limit = 3.0 * mc.std_error;
    const bool total_pass = total_diff <= total_limit || total_diff == 0.0;
    ok = ok && total_pass;
    os << "total: analytic=" << fmt(mc.analytic) << " mc=" << fmt(mc.estimate)
       << " se=" << fmt(mc.std_error) << ' ' << (total_pass ? "ok" : "MISMATCH") << '\n';
    os << (ok ? "result=ok" : "result=mismatch") << '\n';
    write_text(args, os.str());
    return ok ? 0 : 2;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"risk-averse hash-power allocation across mining pools"};
    app.require_subcommand(1);

    CommonArgs optimize_args, sweep_args, scenario_args, backtest_args, payout_args, mgf_args;
    CLI::App* optimize = app.add_subcommand("optimize", "solve one allocation problem");
    add_common(optimize, optimize_args);
    CLI::App* sweep = app.add_subcommand("sweep", "solve across a rho grid");
    add_common(sweep, sweep_args);
    CLI::App* scenario =
        app.add_subcommand("scenario", "sweep under exchange-rate overrides");
    add_common(scenario, scenario_args);
    CLI::App* backtest = app.add_subcommand("backtest", "replay historical market data");
    add_common(backtest, backtest_args);
    CLI::App* payout = app.add_subcommand("payout", "dual-scheme per-block payout");
    add_common(payout, payout_args);
    CLI::App* mgf = app.add_subcommand("mgf-check", "closed form vs Monte-Carlo comparison");
    add_common(mgf, mgf_args);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (optimize->parsed()) return cmd_optimize(optimize_args);
        if (sweep->parsed()) return cmd_sweep(sweep_args, false);
        if (scenario->parsed()) return cmd_sweep(scenario_args, true);
        if (backtest->parsed()) return cmd_backtest(backtest_args);
        if (payout->parsed()) return cmd_payout(payout_args);
        if (mgf->parsed()) return cmd_mgf_check(mgf_args);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 1;
}
