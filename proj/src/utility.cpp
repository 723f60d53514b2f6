#include "poolopt/utility.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

namespace poolopt {

namespace {

// 1 - e^{-arg} with the argument clamped so queries far outside the
// feasible set stay finite for the solver.
double one_minus_exp_neg(double arg) {
    arg = std::clamp(arg, -700.0, 700.0);
    return -std::expm1(-arg);
}

double hash_share(double miner, double pool) {
    if (miner == 0.0) return 0.0;
    return miner / (miner + pool);
}

void ensure_feasible(const Allocation& alloc, const ObjectiveSpec& spec) {
    const double worst = worst_normalized_residual(alloc, spec);
    if (worst < -kFeasibilityTol)
        throw InfeasibleAllocation("allocation violates a constraint by " +
                                   std::to_string(-worst) + " (normalized)");
}

}  // namespace

Variant variant_from_string(const std::string& s) {
    if (s == "single_pplns") return Variant::SinglePplns;
    if (s == "single_with_pps") return Variant::SingleWithPps;
    if (s == "multi_currency") return Variant::MultiCurrency;
    if (s == "multi_currency_txfees") return Variant::MultiCurrencyTxFees;
    if (s == "multi_pow") return Variant::MultiPow;
    throw InvalidVariant("unknown variant '" + s + "'");
}

std::string to_string(Variant v) {
    switch (v) {
        case Variant::SinglePplns: return "single_pplns";
        case Variant::SingleWithPps: return "single_with_pps";
        case Variant::MultiCurrency: return "multi_currency";
        case Variant::MultiCurrencyTxFees: return "multi_currency_txfees";
        case Variant::MultiPow: return "multi_pow";
    }
    return "?";
}

ObjectiveSpec ObjectiveSpec::make(Variant variant, ProblemInstance instance) {
    ObjectiveSpec spec;
    spec.variant_ = variant;

    const bool single =
        variant == Variant::SinglePplns || variant == Variant::SingleWithPps;
    if (single && instance.currencies().size() != 1)
        throw InvalidVariant(to_string(variant) + " requires exactly one currency, got " +
                             std::to_string(instance.currencies().size()));
    if ((variant == Variant::MultiCurrency || variant == Variant::MultiCurrencyTxFees) &&
        instance.algorithm_ids().size() != 1)
        throw InvalidVariant(to_string(variant) +
                             " requires a single PoW algorithm; use multi_pow instead");
    if (variant == Variant::MultiPow && instance.miner().power_by_algorithm.size() < 2)
        throw InvalidVariant("multi_pow requires at least two algorithms in the miner's "
                             "power map");

    if (variant == Variant::SingleWithPps) {
        const PoolSpec* cheapest = nullptr;
        for (const auto& p : instance.pools()) {
            if (p.scheme != RewardScheme::Pps) continue;
            if (!cheapest || p.fee < cheapest->fee) cheapest = &p;
        }
        if (!cheapest)
            throw MissingPpsPool("single_with_pps requires at least one PPS pool");
        spec.pps_pool_ = cheapest->id;
        for (const auto& p : instance.pools()) {
            if (p.scheme == RewardScheme::Pps && p.id != cheapest->id)
                spec.dropped_pools_.push_back(p.id);
        }
    } else {
        for (const auto& p : instance.pools()) {
            if (p.scheme == RewardScheme::Pps)
                throw InvalidVariant("pool '" + p.id + "' uses the PPS scheme; variant " +
                                     to_string(variant) + " admits PPLNS-like pools only");
        }
    }

    for (const auto& p : instance.pools()) {
        if (p.scheme != RewardScheme::Pps) spec.pplns_pools_.push_back(p);
    }
    spec.instance_ = std::move(instance);
    return spec;
}

double ObjectiveSpec::pps_fee() const {
    if (!pps_pool_) throw MissingPpsPool("objective has no PPS pool");
    return instance_.pool(*pps_pool_).fee;
}

namespace detail {

FractionEvaluator::FractionEvaluator(const ObjectiveSpec& spec) : spec_(&spec) {
    const ProblemInstance& inst = spec.instance();
    const bool single =
        spec.variant() == Variant::SinglePplns || spec.variant() == Variant::SingleWithPps;
    const bool tx_fees = spec.include_tx_fees();
    multi_pow_ = spec.variant() == Variant::MultiPow;
    solo_is_remainder_ = single;

    if (single) {
        const CurrencySpec& c = inst.currencies().front();
        single_reward_ = c.block_reward;
        single_power_ = inst.miner_power_for(c);
    }

    for (const auto& p : spec.pplns_pools()) {
        const CurrencySpec& c = inst.currency(p.currency);
        PoolTerm t;
        t.id = p.id;
        t.pool_hashrate = p.hashrate;
        t.fee = p.fee;
        t.reward = c.block_reward + (tx_fees && p.pays_tx_fees ? c.avg_tx_fee : 0.0);
        t.time_norm = single ? 1.0 : 1.0 / (c.block_time * c.total_hashrate);
        t.miner_power = inst.miner_power_for(c);
        pools_.push_back(t);
        names_.push_back(p.id);
    }
    if (spec.variant() == Variant::SingleWithPps) {
        has_pps_ = true;
        pps_fee_ = spec.pps_fee();
        names_.push_back("pps");
    }
    if (!single) {
        for (const auto& c : inst.currencies()) {
            SoloTerm s;
            s.currency = c.id;
            s.reward = c.block_reward;
            s.time_norm = 1.0 / (c.block_time * c.total_hashrate);
            s.miner_power = inst.miner_power_for(c);
            solos_.push_back(s);
            names_.push_back("solo:" + c.id);
        }
    }
}

double FractionEvaluator::value(std::span<const double> x) const {
    if (static_cast<int>(x.size()) != dimension())
        throw DimensionMismatch("expected " + std::to_string(dimension()) +
                                " fractions, got " + std::to_string(x.size()));
    const double rho = spec_->instance().miner().rho;
    // Neumaier-compensated accumulation: the optimizer compares values that
    // differ near the rounding floor of a plain sum.
    double total = 0.0, comp = 0.0;
    auto add = [&](double v) {
        const double t = total + v;
        if (std::abs(total) >= std::abs(v))
            comp += (total - t) + v;
        else
            comp += (v - t) + total;
        total = t;
    };
    std::size_t k = 0;
    double pool_frac_sum = 0.0;
    for (const auto& t : pools_) {
        const double lam = x[k] * t.miner_power;
        pool_frac_sum += x[k];
        ++k;
        const double ratio = hash_share(lam, t.pool_hashrate);
        const double arg = rho * t.reward * (1.0 - t.fee) * ratio;
        add((lam + t.pool_hashrate) * t.time_norm * one_minus_exp_neg(arg));
    }
    if (has_pps_) {
        const double pps_frac = x[k];
        ++k;
        pool_frac_sum += pps_frac;
        add(pps_frac * single_power_ * (1.0 - pps_fee_) * rho * single_reward_);
    }
    if (solo_is_remainder_) {
        const double solo = (1.0 - pool_frac_sum) * single_power_;
        add(solo * one_minus_exp_neg(rho * single_reward_));
    } else {
        for (const auto& s : solos_) {
            const double lam = x[k] * s.miner_power;
            ++k;
            add(lam * s.time_norm * one_minus_exp_neg(rho * s.reward));
        }
    }
    return total + comp;
}

double FractionEvaluator::value_delta(std::span<const double> x, int i, int j,
                                      double delta) const {
    const double rho = spec_->instance().miner().rho;
    const int n_pools = static_cast<int>(pools_.size());
    const int pps_index = has_pps_ ? n_pools : -1;

    // Change contributed by moving one variable by d (in fraction units).
    auto component_delta = [&](int idx, double d) -> double {
        if (idx == pps_index)
            return d * single_power_ * (1.0 - pps_fee_) * rho * single_reward_;
        if (idx >= n_pools) {  // explicit solo variable
            const SoloTerm& s = solos_[static_cast<std::size_t>(idx - n_pools -
                                                                (has_pps_ ? 1 : 0))];
            return d * s.miner_power * s.time_norm * one_minus_exp_neg(rho * s.reward);
        }
        const PoolTerm& t = pools_[static_cast<std::size_t>(idx)];
        const double lam = x[static_cast<std::size_t>(idx)] * t.miner_power;
        const double dlam = d * t.miner_power;
        const double a = rho * t.reward * (1.0 - t.fee);
        const double w1 = a * hash_share(lam, t.pool_hashrate);
        const double e1 = std::exp(-std::clamp(w1, -700.0, 700.0));
        // w2 - w1 in product form, then e^{-w1} - e^{-w2} via expm1.
        const double dw = a * t.pool_hashrate * dlam /
                          ((lam + dlam + t.pool_hashrate) * (lam + t.pool_hashrate));
        const double dv = e1 * -std::expm1(-std::clamp(dw, -700.0, 700.0));
        const double v2 = -std::expm1(-std::clamp(w1 + dw, -700.0, 700.0));
        return (dlam * v2 + (lam + t.pool_hashrate) * dv) * t.time_norm;
    };

    double total = component_delta(i, delta);
    if (j >= 0) {
        total += component_delta(j, -delta);
    } else if (solo_is_remainder_) {
        // Slack trades against the solo remainder.
        total += -delta * single_power_ * one_minus_exp_neg(rho * single_reward_);
    }
    return total;
}

int FractionEvaluator::residual_count() const { return dimension() + 1; }

void FractionEvaluator::residuals(std::span<const double> x, std::span<double> out) const {
    if (static_cast<int>(x.size()) != dimension() ||
        static_cast<int>(out.size()) != residual_count())
        throw DimensionMismatch("residual buffer size mismatch");
    double sum = 0.0;
    for (double v : x) sum += v;
    out[0] = 1.0 - sum;
    for (int i = 0; i < dimension(); ++i) out[i + 1] = x[i];
}

Allocation FractionEvaluator::to_allocation(std::span<const double> x) const {
    if (static_cast<int>(x.size()) != dimension())
        throw DimensionMismatch("expected " + std::to_string(dimension()) + " fractions");
    Allocation alloc;
    std::size_t k = 0;
    double frac_sum = 0.0;
    for (const auto& t : pools_) {
        alloc.pool_alloc[t.id] = x[k] * t.miner_power;
        frac_sum += x[k];
        ++k;
    }
    if (has_pps_) {
        alloc.pps_alloc = x[k] * single_power_;
        frac_sum += x[k];
        ++k;
    }
    if (solo_is_remainder_) {
        alloc.solo_alloc[spec_->instance().currencies().front().id] =
            (1.0 - frac_sum) * single_power_;
    } else {
        for (const auto& s : solos_) {
            alloc.solo_alloc[s.currency] = x[k] * s.miner_power;
            ++k;
        }
    }
    return alloc;
}

std::vector<double> FractionEvaluator::to_fractions(const Allocation& alloc) const {
    const ProblemInstance& inst = spec_->instance();
    for (const auto& [id, v] : alloc.pool_alloc) {
        if (spec_->pps_pool() && id == *spec_->pps_pool())
            throw Error("pool '" + id + "' is the PPS pool; set pps_alloc instead");
        bool known = std::any_of(pools_.begin(), pools_.end(),
                                 [&](const PoolTerm& t) { return t.id == id; });
        if (!known) throw Error("allocation references unknown pool '" + id + "'");
    }
    for (const auto& [id, v] : alloc.solo_alloc) inst.currency(id);  // must resolve
    if (alloc.pps_alloc != 0.0 && !has_pps_)
        throw MissingPpsPool("allocation sets pps_alloc but the objective has no PPS pool");

    std::vector<double> x(dimension(), 0.0);
    std::size_t k = 0;
    double frac_sum = 0.0;
    for (const auto& t : pools_) {
        auto it = alloc.pool_alloc.find(t.id);
        x[k] = it == alloc.pool_alloc.end() ? 0.0 : it->second / t.miner_power;
        frac_sum += x[k];
        ++k;
    }
    if (has_pps_) {
        x[k] = alloc.pps_alloc / single_power_;
        frac_sum += x[k];
        ++k;
    }
    if (solo_is_remainder_) {
        // Solo is the budget remainder in the single-currency forms; an
        // explicit entry must agree with it.
        auto it = alloc.solo_alloc.find(spec_->instance().currencies().front().id);
        if (it != alloc.solo_alloc.end()) {
            const double remainder = (1.0 - frac_sum) * single_power_;
            if (std::abs(it->second - remainder) > 1e-9 * single_power_)
                throw InfeasibleAllocation(
                    "solo allocation " + std::to_string(it->second) +
                    " disagrees with the budget remainder " + std::to_string(remainder));
        }
    } else {
        for (const auto& s : solos_) {
            auto it = alloc.solo_alloc.find(s.currency);
            x[k] = it == alloc.solo_alloc.end() ? 0.0 : it->second / s.miner_power;
            ++k;
        }
    }
    return x;
}

}  // namespace detail

double worst_normalized_residual(const Allocation& alloc, const ObjectiveSpec& spec) {
    detail::FractionEvaluator eval(spec);
    const std::vector<double> x = eval.to_fractions(alloc);
    std::vector<double> res(eval.residual_count());
    eval.residuals(x, res);
    return *std::min_element(res.begin(), res.end());
}

double utility_single_pplns(const Allocation& alloc, const ObjectiveSpec& spec) {
    if (spec.variant() != Variant::SinglePplns)
        throw InvalidVariant("objective is not single_pplns");
    ensure_feasible(alloc, spec);
    detail::FractionEvaluator eval(spec);
    return eval.value(eval.to_fractions(alloc));
}

double utility_single_with_pps(const Allocation& alloc, const ObjectiveSpec& spec) {
    if (spec.variant() != Variant::SingleWithPps)
        throw InvalidVariant("objective is not single_with_pps");
    if (!spec.pps_pool()) throw MissingPpsPool("objective has no PPS pool");
    ensure_feasible(alloc, spec);
    detail::FractionEvaluator eval(spec);
    return eval.value(eval.to_fractions(alloc));
}

double utility_multi_currency(const Allocation& alloc, const ObjectiveSpec& spec,
                              bool include_tx_fees) {
    if (spec.variant() != Variant::MultiCurrency &&
        spec.variant() != Variant::MultiCurrencyTxFees && spec.variant() != Variant::MultiPow)
        throw InvalidVariant("objective is not a multi-currency form");
    if (include_tx_fees != spec.include_tx_fees()) {
        ObjectiveSpec flipped = ObjectiveSpec::make(
            include_tx_fees ? Variant::MultiCurrencyTxFees : Variant::MultiCurrency,
            spec.instance());
        return utility_multi_currency(alloc, flipped, include_tx_fees);
    }
    ensure_feasible(alloc, spec);
    detail::FractionEvaluator eval(spec);
    return eval.value(eval.to_fractions(alloc));
}

double utility_value(const Allocation& alloc, const ObjectiveSpec& spec) {
    switch (spec.variant()) {
        case Variant::SinglePplns: return utility_single_pplns(alloc, spec);
        case Variant::SingleWithPps: return utility_single_with_pps(alloc, spec);
        case Variant::MultiCurrency: return utility_multi_currency(alloc, spec, false);
        case Variant::MultiCurrencyTxFees: return utility_multi_currency(alloc, spec, true);
        case Variant::MultiPow: return utility_multi_currency(alloc, spec, false);
    }
    throw InvalidVariant("unhandled variant");
}

std::vector<double> constraint_residuals(const Allocation& alloc, const ObjectiveSpec& spec) {
    detail::FractionEvaluator eval(spec);
    const std::vector<double> x = eval.to_fractions(alloc);
    std::vector<double> res(eval.residual_count());
    eval.residuals(x, res);

    // Report in natural units: h/s for the single-algorithm budgets and
    // variables, the dimensionless normalized sum for multi-PoW.
    const ProblemInstance& inst = spec.instance();
    const bool multi_pow = spec.variant() == Variant::MultiPow;
    std::vector<double> out;
    out.reserve(res.size());
    if (multi_pow) {
        out.push_back(res[0]);
    } else {
        // All currencies share one algorithm outside the multi-PoW form.
        const double power = inst.miner_power_for(inst.currencies().front());
        out.push_back(res[0] * power);
    }
    const auto& names = eval.variable_names();
    for (std::size_t i = 0; i < names.size(); ++i) {
        double power;
        if (names[i] == "pps") {
            power = inst.miner_power_for(inst.currencies().front());
        } else if (names[i].rfind("solo:", 0) == 0) {
            power = inst.miner_power_for(inst.currency(names[i].substr(5)));
        } else {
            power = inst.miner_power_for(inst.currency(inst.pool(names[i]).currency));
        }
        out.push_back(res[i + 1] * power);
    }
    return out;
}

double expected_payoff(const Allocation& alloc, const ObjectiveSpec& spec) {
    ensure_feasible(alloc, spec);
    detail::FractionEvaluator eval(spec);
    const std::vector<double> x = eval.to_fractions(alloc);
    const Allocation full = eval.to_allocation(x);  // solo remainder made explicit

    const ProblemInstance& inst = spec.instance();
    const bool single =
        spec.variant() == Variant::SinglePplns || spec.variant() == Variant::SingleWithPps;
    const bool tx_fees = spec.include_tx_fees();
    // Single currency: expected blocks over one network block period.
    // Multi currency: expected blocks per day.
    double total = 0.0;
    for (const auto& p : spec.pplns_pools()) {
        const CurrencySpec& c = inst.currency(p.currency);
        const double lam = full.pool_alloc.at(p.id);
        const double share = hash_share(lam, p.hashrate);
        const double reward =
            c.block_reward + (tx_fees && p.pays_tx_fees ? c.avg_tx_fee : 0.0);
        const double mean = single
                                ? (lam + p.hashrate) / c.total_hashrate
                                : 86400.0 * (lam + p.hashrate) / (c.block_time * c.total_hashrate);
        total += share * (1.0 - p.fee) * reward * mean;
    }
    for (const auto& [cid, lam] : full.solo_alloc) {
        const CurrencySpec& c = inst.currency(cid);
        const double mean = single ? lam / c.total_hashrate
                                   : 86400.0 * lam / (c.block_time * c.total_hashrate);
        total += c.block_reward * mean;
    }
    if (spec.pps_pool()) {
        const CurrencySpec& c = inst.currencies().front();
        total += c.block_reward * full.pps_alloc * (1.0 - spec.pps_fee()) / c.total_hashrate;
    }
    return total;
}

namespace {

// Deterministic uniforms in [0,1) from the raw 64-bit stream; unlike
// std::poisson_distribution this is identical across standard libraries.
double next_uniform(std::mt19937_64& gen) {
    return static_cast<double>(gen() >> 11) * 0x1.0p-53;
}

long poisson_draw(double mean, std::mt19937_64& gen) {
    long total = 0;
    // Knuth's product-of-uniforms method per chunk; chunking keeps
    // exp(-mean) well away from underflow.
    while (mean > 0.0) {
        const double chunk = std::min(mean, 30.0);
        mean -= chunk;
        const double limit = std::exp(-chunk);
        long k = 0;
        double p = 1.0;
        do {
            ++k;
            p *= next_uniform(gen);
        } while (p > limit);
        total += k - 1;
    }
    return total;
}

}  // namespace

McUtility monte_carlo_utility(const Allocation& alloc, const ObjectiveSpec& spec,
                              std::int64_t draws, std::uint64_t seed) {
    if (draws < 1) throw ZeroDraws("draws must be >= 1");
    ensure_feasible(alloc, spec);
    detail::FractionEvaluator eval(spec);
    const Allocation full = eval.to_allocation(eval.to_fractions(alloc));

    const ProblemInstance& inst = spec.instance();
    const double rho = inst.miner().rho;
    const bool single =
        spec.variant() == Variant::SinglePplns || spec.variant() == Variant::SingleWithPps;
    const bool tx_fees = spec.include_tx_fees();

    struct RandomComponent {
        std::string id;
        double mean;    // expected block count over the sampling horizon
        double payoff;  // USD per counted block
    };
    std::vector<RandomComponent> comps;
    for (const auto& p : spec.pplns_pools()) {
        const CurrencySpec& c = inst.currency(p.currency);
        const double lam = full.pool_alloc.at(p.id);
        const double reward =
            c.block_reward + (tx_fees && p.pays_tx_fees ? c.avg_tx_fee : 0.0);
        const double mean = single
                                ? (lam + p.hashrate) / c.total_hashrate
                                : 86400.0 * (lam + p.hashrate) / (c.block_time * c.total_hashrate);
        comps.push_back({p.id, mean, hash_share(lam, p.hashrate) * (1.0 - p.fee) * reward});
    }
    for (const auto& [cid, lam] : full.solo_alloc) {
        const CurrencySpec& c = inst.currency(cid);
        const double mean = single ? lam / c.total_hashrate
                                   : 86400.0 * lam / (c.block_time * c.total_hashrate);
        comps.push_back({"solo:" + cid, mean, c.block_reward});
    }
    double deterministic = 0.0;
    if (spec.pps_pool()) {
        const CurrencySpec& c = inst.currencies().front();
        deterministic =
            c.block_reward * full.pps_alloc * (1.0 - spec.pps_fee()) / c.total_hashrate;
    }

    McUtility result;
    for (const auto& rc : comps) {
        McComponent mc;
        mc.id = rc.id;
        mc.mean = rc.mean;
        mc.log_weight = -rho * rc.payoff;
        mc.analytic_factor = std::exp(rc.mean * std::expm1(mc.log_weight));
        result.components.push_back(mc);
    }
    if (spec.pps_pool()) {
        McComponent mc;
        mc.id = "pps";
        mc.mean = 0.0;
        mc.log_weight = -rho * deterministic;
        mc.analytic_factor = std::exp(mc.log_weight);
        mc.mc_factor = mc.analytic_factor;
        result.components.push_back(mc);
    }

    const std::size_t n_random = comps.size();
    std::vector<double> factor_sum(n_random, 0.0), factor_sq(n_random, 0.0);
    double total_sum = 0.0, total_sq = 0.0;
    std::mt19937_64 gen(seed);
    std::vector<long> counts(n_random);
    for (std::int64_t d = 0; d < draws; ++d) {
        double neg_rho_payoff = -rho * deterministic;
        for (std::size_t i = 0; i < n_random; ++i) {
            counts[i] = poisson_draw(comps[i].mean, gen);
            neg_rho_payoff += -rho * comps[i].payoff * static_cast<double>(counts[i]);
        }
        for (std::size_t i = 0; i < n_random; ++i) {
            const double f =
                std::exp(-rho * comps[i].payoff * static_cast<double>(counts[i]));
            factor_sum[i] += f;
            factor_sq[i] += f * f;
        }
        const double v = -std::exp(neg_rho_payoff);
        total_sum += v;
        total_sq += v * v;
    }

    const double nd = static_cast<double>(draws);
    result.estimate = total_sum / nd;
    const double var = std::max(0.0, total_sq / nd - result.estimate * result.estimate);
    result.std_error = std::sqrt(var / nd);

    double log_analytic = -rho * deterministic;
    for (const auto& rc : comps) log_analytic += rc.mean * std::expm1(-rho * rc.payoff);
    result.analytic = -std::exp(log_analytic);

    for (std::size_t i = 0; i < n_random; ++i) {
        McComponent& mc = result.components[i];
        mc.mc_factor = factor_sum[i] / nd;
        const double fvar = std::max(0.0, factor_sq[i] / nd - mc.mc_factor * mc.mc_factor);
        mc.mc_factor_std_error = std::sqrt(fvar / nd);
    }
    return result;
}

}  // namespace poolopt
