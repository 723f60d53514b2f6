#include "poolopt/allocator.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <thread>

namespace poolopt {

namespace {

constexpr double kDustFraction = 1e-9;

ProblemInstance with_rho(const ProblemInstance& instance, double rho) {
    MinerProfile miner = instance.miner();
    miner.rho = rho;
    miner.crra.reset();  // rho no longer derives from crra/wealth
    return ProblemInstance::validate(instance.currencies(), instance.pools(), std::move(miner));
}

// Full-solo allocation: everything on the single currency's solo option,
// or on the solo option with the best reward rate when there are several.
Allocation full_solo(const ObjectiveSpec& spec) {
    const ProblemInstance& inst = spec.instance();
    Allocation alloc;
    for (const auto& p : spec.pplns_pools()) alloc.pool_alloc[p.id] = 0.0;
    const CurrencySpec* best = nullptr;
    double best_rate = -1.0;
    for (const auto& c : inst.currencies()) {
        // Reward per unit of hardware budget and time.
        const double rate =
            inst.miner_power_for(c) * c.block_reward / (c.block_time * c.total_hashrate);
        if (rate > best_rate) {
            best_rate = rate;
            best = &c;
        }
    }
    for (const auto& c : inst.currencies()) alloc.solo_alloc[c.id] = 0.0;
    alloc.solo_alloc[best->id] = inst.miner_power_for(*best);
    return alloc;
}

// Deterministic local polish along the simplex edge directions (pairwise
// exchanges and trades against the budget slack), using the evaluator's
// difference form so comparisons stay sharp where full values agree to
// twelve digits. The objectives are concave, so edge sweeps converge to
// the optimum; this pins the flat directions the solver leaves at coarse
// accuracy.
void polish_on_simplex(const detail::FractionEvaluator& eval, std::vector<double>& x) {
    const int n = eval.dimension();
    constexpr double invphi = 0.6180339887498949;

    auto golden_max = [&](int i, int j, double lo, double hi) {
        auto g = [&](double d) { return eval.value_delta(x, i, j, d); };
        double a = lo, b = hi;
        double c1 = b - invphi * (b - a);
        double c2 = a + invphi * (b - a);
        double f1 = g(c1), f2 = g(c2);
        for (int it = 0; it < 96 && b - a > 1e-15; ++it) {
            if (f1 >= f2) {
                b = c2;
                c2 = c1;
                f2 = f1;
                c1 = b - invphi * (b - a);
                f1 = g(c1);
            } else {
                a = c1;
                c1 = c2;
                f1 = f2;
                c2 = a + invphi * (b - a);
                f2 = g(c2);
            }
        }
        const double d = 0.5 * (a + b);
        return std::pair<double, double>(d, g(d));
    };

    for (int sweep = 0; sweep < 12; ++sweep) {
        bool moved = false;
        for (int i = 0; i < n; ++i) {
            for (int j = -1; j < n; ++j) {
                if (j == i) continue;
                double lo = -x[static_cast<std::size_t>(i)];
                double hi;
                if (j >= 0) {
                    hi = x[static_cast<std::size_t>(j)];
                } else {
                    double sum = 0.0;
                    for (double v : x) sum += v;
                    hi = 1.0 - sum;
                }
                if (!(hi > lo)) continue;
                const auto [d, gain] = golden_max(i, j, lo, hi);
                if (gain > 0.0 && d != 0.0) {
                    x[static_cast<std::size_t>(i)] =
                        std::max(0.0, x[static_cast<std::size_t>(i)] + d);
                    if (j >= 0)
                        x[static_cast<std::size_t>(j)] =
                            std::max(0.0, x[static_cast<std::size_t>(j)] - d);
                    moved = true;
                }
            }
        }
        if (!moved) break;
    }
}

void zero_dust_and_clip(std::vector<double>& x) {
    double sum = 0.0;
    for (double& v : x) {
        if (v < kDustFraction) v = 0.0;
        sum += v;
    }
    if (sum > 1.0) {
        for (double& v : x) v /= sum;
        sum = 0.0;
        for (double v : x) sum += v;
        if (sum > 1.0) {
            // A last ulp of overshoot comes out of the largest component.
            auto it = std::max_element(x.begin(), x.end());
            *it -= sum - 1.0;
        }
    }
}

}  // namespace

AllocationReport optimize(const ProblemInstance& instance, Variant variant, double rho,
                          const SolverConfig& config) {
    if (!(rho >= 0.0)) throw Error("rho must be >= 0");
    const ProblemInstance scoped = with_rho(instance, rho);
    const ObjectiveSpec spec = ObjectiveSpec::make(variant, scoped);

    AllocationReport report;
    report.rho = rho;
    report.variant = variant;

    if (rho == 0.0) {
        report.allocation = full_solo(spec);
        report.solver.x = detail::FractionEvaluator(spec).to_fractions(report.allocation);
        report.solver.objective = utility_value(report.allocation, spec);
        report.solver.feasible = true;
        report.solver.status = SolverStatus::Converged;
    } else {
        detail::FractionEvaluator eval(spec);
        const int n = eval.dimension();
        const int m = eval.residual_count();
        ObjectiveFn objective = [&](std::span<const double> x) { return eval.value(x); };
        ConstraintFn constraints = [&](std::span<const double> x, std::span<double> out) {
            eval.residuals(x, out);
        };
        SolverResult result = maximize(objective, constraints, m, n, config);
        if (!result.feasible)
            throw SolverFailed("solver returned an infeasible point (status " +
                               to_string(result.status) + ")");
        std::vector<double> x = result.x;
        polish_on_simplex(eval, x);
        zero_dust_and_clip(x);
        report.allocation = eval.to_allocation(x);
        result.x = x;
        result.objective = eval.value(x);
        report.solver = std::move(result);
    }

    report.utility = utility_value(report.allocation, spec);
    report.expected_payoff = expected_payoff(report.allocation, spec);
    return report;
}

SweepSeries sweep_rho(const ProblemInstance& instance, Variant variant,
                      const std::vector<double>& rho_grid, const SolverConfig& config,
                      int jobs) {
    for (std::size_t i = 0; i < rho_grid.size(); ++i) {
        if (!(rho_grid[i] >= 0.0)) throw NonMonotoneGrid("rho grid values must be >= 0");
        if (i > 0 && !(rho_grid[i] > rho_grid[i - 1]))
            throw NonMonotoneGrid("rho grid must be strictly increasing");
    }

    SweepSeries series;
    series.rho_values = rho_grid;
    series.reports.resize(rho_grid.size());
    {
        const ObjectiveSpec spec = ObjectiveSpec::make(variant, instance);
        series.columns = detail::FractionEvaluator(spec).variable_names();
    }
    if (rho_grid.empty()) return series;

    std::vector<std::string> failures(rho_grid.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&]() {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= rho_grid.size()) return;
            try {
                series.reports[i] = optimize(instance, variant, rho_grid[i], config);
            } catch (const std::exception& e) {
                failures[i] = e.what();
            }
        }
    };
    const int thread_count = std::max(1, std::min<int>(jobs, static_cast<int>(rho_grid.size())));
    if (thread_count == 1) {
        worker();
    } else {
        std::vector<std::thread> threads;
        for (int t = 0; t < thread_count; ++t) threads.emplace_back(worker);
        for (auto& t : threads) t.join();
    }
    for (std::size_t i = 0; i < rho_grid.size(); ++i) {
        if (!failures[i].empty())
            throw SolverFailed("rho=" + std::to_string(rho_grid[i]) + ": " + failures[i]);
    }
    return series;
}

SweepSeries exchange_rate_scenario(const ProblemInstance& instance, Variant variant,
                                   const std::map<std::string, double>& rate_overrides,
                                   const std::vector<double>& rho_grid,
                                   const SolverConfig& config, int jobs) {
    std::vector<CurrencySpec> currencies = instance.currencies();
    for (const auto& [id, rate] : rate_overrides) {
        bool found = false;
        for (auto& c : currencies) {
            if (c.id == id) {
                c = c.with_exchange_rate(rate);
                found = true;
            }
        }
        if (!found) throw UnknownCurrency("rate override references unknown currency '" + id + "'");
    }
    ProblemInstance adjusted =
        ProblemInstance::validate(std::move(currencies), instance.pools(), instance.miner());
    return sweep_rho(adjusted, variant, rho_grid, config, jobs);
}

std::vector<double> default_rho_grid() {
    std::vector<double> grid;
    const double lo = std::log10(1e-6), hi = std::log10(1e-4);
    for (int i = 0; i < 40; ++i) grid.push_back(std::pow(10.0, lo + (hi - lo) * i / 39.0));
    return grid;
}

namespace {

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::vector<double> allocation_row(const AllocationReport& r,
                                   const std::vector<std::string>& columns) {
    std::vector<double> row;
    for (const auto& name : columns) {
        if (name == "pps") {
            row.push_back(r.allocation.pps_alloc);
        } else if (name.rfind("solo:", 0) == 0) {
            auto it = r.allocation.solo_alloc.find(name.substr(5));
            row.push_back(it == r.allocation.solo_alloc.end() ? 0.0 : it->second);
        } else {
            auto it = r.allocation.pool_alloc.find(name);
            row.push_back(it == r.allocation.pool_alloc.end() ? 0.0 : it->second);
        }
    }
    return row;
}

}  // namespace

void write_sweep_csv(std::ostream& os, const SweepSeries& series) {
    os << "rho,utility,expected_payoff";
    for (const auto& c : series.columns) os << ',' << c;
    os << '\n';
    for (std::size_t i = 0; i < series.reports.size(); ++i) {
        const AllocationReport& r = series.reports[i];
        os << fmt(series.rho_values[i]) << ',' << fmt(r.utility) << ','
           << fmt(r.expected_payoff);
        for (double v : allocation_row(r, series.columns)) os << ',' << fmt(v);
        os << '\n';
    }
}

void write_report(std::ostream& os, const AllocationReport& report) {
    os << "variant=" << to_string(report.variant) << '\n';
    os << "rho=" << fmt(report.rho) << '\n';
    os << "utility=" << fmt(report.utility) << '\n';
    os << "expected_payoff=" << fmt(report.expected_payoff) << '\n';
    for (const auto& [id, v] : report.allocation.pool_alloc)
        os << "alloc." << id << '=' << fmt(v) << '\n';
    if (report.allocation.pps_alloc != 0.0 || report.variant == Variant::SingleWithPps)
        os << "alloc.pps=" << fmt(report.allocation.pps_alloc) << '\n';
    for (const auto& [id, v] : report.allocation.solo_alloc)
        os << "solo." << id << '=' << fmt(v) << '\n';
    os << "solver.status=" << to_string(report.solver.status) << '\n';
    os << "solver.feasible=" << (report.solver.feasible ? "true" : "false") << '\n';
    os << "solver.evals=" << report.solver.evals << '\n';
}

}  // namespace poolopt
