#include "poolopt/config.hpp"

#include <cmath>
#include <fstream>

namespace poolopt {

Json load_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open config file '" + path + "'");
    try {
        return Json::parse(in, nullptr, true, true);  // allow comments
    } catch (const Json::parse_error& e) {
        throw Error("config parse error in '" + path + "': " + e.what());
    }
}

void apply_override(Json& config, const std::string& key_value) {
    const auto eq = key_value.find('=');
    if (eq == std::string::npos || eq == 0)
        throw Error("override '" + key_value + "' is not of the form key=value");
    const std::string key = key_value.substr(0, eq);
    const std::string raw = key_value.substr(eq + 1);

    Json value;
    try {
        value = Json::parse(raw);
    } catch (const Json::parse_error&) {
        value = raw;  // plain string
    }

    Json* node = &config;
    std::size_t pos = 0;
    for (;;) {
        const auto dot = key.find('.', pos);
        const std::string part = key.substr(pos, dot - pos);
        if (part.empty()) throw Error("override key '" + key + "' has an empty segment");
        if (dot == std::string::npos) {
            (*node)[part] = std::move(value);
            return;
        }
        node = &(*node)[part];
        pos = dot + 1;
    }
}

namespace {

double get_number(const Json& j, const std::string& field, double fallback, bool required,
                  const std::string& record) {
    if (!j.contains(field)) {
        if (required) throw Error(record + ": missing field '" + field + "'");
        return fallback;
    }
    if (!j[field].is_number())
        throw Error(record + ": field '" + field + "' must be a number");
    return j[field].get<double>();
}

std::string get_string(const Json& j, const std::string& field, const std::string& record) {
    if (!j.contains(field) || !j[field].is_string())
        throw Error(record + ": missing string field '" + field + "'");
    return j[field].get<std::string>();
}

}  // namespace

ProblemInstance instance_from_json(const Json& config) {
    if (!config.contains("currencies") || !config["currencies"].is_array())
        throw Error("config: missing 'currencies' array");
    if (!config.contains("pools") || !config["pools"].is_array())
        throw Error("config: missing 'pools' array");
    if (!config.contains("miner") || !config["miner"].is_object())
        throw Error("config: missing 'miner' object");

    std::vector<CurrencySpec> currencies;
    for (const auto& j : config["currencies"]) {
        CurrencySpec c;
        c.id = get_string(j, "id", "currency");
        c.algorithm = get_string(j, "algorithm", "currency '" + c.id + "'");
        c.block_reward = get_number(j, "block_reward", 0.0, true, "currency '" + c.id + "'");
        c.block_time = get_number(j, "block_time", 600.0, false, "currency '" + c.id + "'");
        c.total_hashrate =
            get_number(j, "total_hashrate", 0.0, true, "currency '" + c.id + "'");
        c.avg_tx_fee = get_number(j, "avg_tx_fee", 0.0, false, "currency '" + c.id + "'");
        c.exchange_rate = get_number(j, "exchange_rate", 1.0, false, "currency '" + c.id + "'");
        currencies.push_back(std::move(c));
    }

    std::vector<PoolSpec> pools;
    for (const auto& j : config["pools"]) {
        PoolSpec p;
        p.id = get_string(j, "id", "pool");
        p.currency = get_string(j, "currency", "pool '" + p.id + "'");
        p.hashrate = get_number(j, "hashrate", 0.0, true, "pool '" + p.id + "'");
        p.fee = get_number(j, "fee", 0.0, false, "pool '" + p.id + "'");
        if (j.contains("scheme")) p.scheme = reward_scheme_from_string(j["scheme"]);
        if (j.contains("pays_tx_fees")) {
            const auto& v = j["pays_tx_fees"];
            p.pays_tx_fees = v.is_boolean() ? v.get<bool>() : v.get<double>() != 0.0;
        }
        p.pps_fraction = get_number(j, "pps_fraction", 1.0, false, "pool '" + p.id + "'");
        pools.push_back(std::move(p));
    }

    const Json& jm = config["miner"];
    MinerProfile miner;
    if (!jm.contains("power_by_algorithm") || !jm["power_by_algorithm"].is_object())
        throw Error("miner: missing 'power_by_algorithm' object");
    for (const auto& [alg, v] : jm["power_by_algorithm"].items())
        miner.power_by_algorithm[alg] = v.get<double>();
    if (jm.contains("wealth")) miner.wealth = jm["wealth"].get<double>();
    if (jm.contains("crra")) miner.crra = jm["crra"].get<double>();
    if (jm.contains("rho")) {
        miner.rho = jm["rho"].get<double>();
    } else if (miner.wealth && miner.crra) {
        miner.rho = cara_from_crra(*miner.crra, *miner.wealth);
    }

    return ProblemInstance::validate(std::move(currencies), std::move(pools), std::move(miner));
}

Variant variant_from_json(const Json& config, const ProblemInstance& instance) {
    if (config.contains("variant")) return variant_from_string(config["variant"]);
    if (instance.algorithm_ids().size() > 1) return Variant::MultiPow;
    if (instance.currencies().size() > 1) return Variant::MultiCurrency;
    for (const auto& p : instance.pools())
        if (p.scheme == RewardScheme::Pps) return Variant::SingleWithPps;
    return Variant::SinglePplns;
}

SolverConfig solver_from_json(const Json& config) {
    SolverConfig sc;
    if (!config.contains("solver")) return sc;
    const Json& j = config["solver"];
    sc.rho_begin = get_number(j, "rho_begin", sc.rho_begin, false, "solver");
    sc.rho_end = get_number(j, "rho_end", sc.rho_end, false, "solver");
    if (j.contains("max_evals")) sc.max_evals = j["max_evals"].get<int>();
    if (j.contains("start")) {
        const std::string s = j["start"].get<std::string>();
        if (s == "equal_split") sc.start = SolverStart::EqualSplit;
        else if (s == "vertex_sweep") sc.start = SolverStart::VertexSweep;
        else throw Error("solver.start must be equal_split or vertex_sweep");
    }
    return sc;
}

std::vector<double> rho_grid_from_json(const Json& config) {
    if (!config.contains("rho_grid")) return default_rho_grid();
    const Json& j = config["rho_grid"];
    std::vector<double> grid;
    if (j.is_array()) {
        for (const auto& v : j) grid.push_back(v.get<double>());
        return grid;
    }
    const double lo = get_number(j, "min", 1e-6, false, "rho_grid");
    const double hi = get_number(j, "max", 1e-4, false, "rho_grid");
    const int points = j.contains("points") ? j["points"].get<int>() : 40;
    if (points < 1) throw Error("rho_grid.points must be >= 1");
    if (!(lo > 0.0) || !(hi > lo)) throw NonMonotoneGrid("rho_grid needs 0 < min < max");
    for (int i = 0; i < points; ++i) {
        const double t = points == 1 ? 0.0 : static_cast<double>(i) / (points - 1);
        grid.push_back(std::pow(10.0, std::log10(lo) + (std::log10(hi) - std::log10(lo)) * t));
    }
    return grid;
}

BacktestConfig backtest_from_json(const Json& config) {
    if (!config.contains("backtest") || !config["backtest"].is_object())
        throw Error("config: missing 'backtest' object");
    const Json& j = config["backtest"];
    BacktestConfig bt;
    bt.miner_power = get_number(j, "miner_power", 0.0, true, "backtest");
    bt.rho = get_number(j, "rho", bt.rho, false, "backtest");
    if (j.contains("interval_days")) bt.interval_days = j["interval_days"].get<int>();
    if (j.contains("pools")) {
        for (const auto& p : j["pools"]) {
            BacktestPool bp;
            bp.id = get_string(p, "id", "backtest pool");
            bp.fee = get_number(p, "fee", 0.0, true, "backtest pool '" + bp.id + "'");
            bt.pools.push_back(std::move(bp));
        }
    }
    bt.pps_fee = get_number(j, "pps_fee", bt.pps_fee, false, "backtest");
    if (j.contains("smoothing_window")) bt.smoothing_window = j["smoothing_window"].get<int>();
    if (j.contains("start")) bt.start_date = j["start"].get<std::string>();
    if (j.contains("end")) bt.end_date = j["end"].get<std::string>();
    bt.block_time = get_number(j, "block_time", bt.block_time, false, "backtest");
    bt.solver = solver_from_json(config);
    return bt;
}

Allocation allocation_from_json(const Json& j) {
    Allocation alloc;
    if (j.contains("pool_alloc")) {
        for (const auto& [id, v] : j["pool_alloc"].items())
            alloc.pool_alloc[id] = v.get<double>();
    }
    if (j.contains("solo_alloc")) {
        for (const auto& [id, v] : j["solo_alloc"].items())
            alloc.solo_alloc[id] = v.get<double>();
    }
    if (j.contains("pps_alloc")) alloc.pps_alloc = j["pps_alloc"].get<double>();
    return alloc;
}

}  // namespace poolopt
