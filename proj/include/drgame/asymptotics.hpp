#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "drgame/errors.hpp"
#include "drgame/model.hpp"

namespace drgame {

/// The symmetric regime every limit formula assumes: identical consumers
/// (budget `budget_each`, gamma = zeta = 1) and companies that share one
/// horizon energy budget G_total spread evenly over the periods.
struct SymmetricSpec {
    int K = 1;
    int N = 1;
    double G_total = 1.0;      // per company, kWh over the horizon
    double budget_each = 1.0;  // per consumer, currency
};

/// Extracts the symmetric parameters from a concrete scenario, refusing
/// anything the limit formulas do not cover.
inline SymmetricSpec symmetric_spec_from(const Scenario& s) {
    SymmetricSpec spec;
    spec.K = s.K();
    spec.N = s.N();
    if (s.consumers.empty() || s.companies.empty())
        throw AsymmetricScenario("empty scenario");
    spec.budget_each = s.consumers.front().budget_B;
    for (const auto& c : s.consumers) {
        if (c.zeta != 1.0 || c.gamma != 1.0)
            throw AsymmetricScenario("regime formulas require gamma = zeta = 1");
        if (c.budget_B != spec.budget_each)
            throw AsymmetricScenario("regime formulas require identical budgets");
    }
    const auto& first = s.companies.front().capacity_G;
    double total = 0.0;
    for (double g : first) total += g;
    spec.G_total = total;
    for (const auto& co : s.companies) {
        if (co.capacity_G.size() != first.size())
            throw AsymmetricScenario("capacity vectors differ in length");
        for (std::size_t t = 0; t < first.size(); ++t)
            if (co.capacity_G[t] != first[t])
                throw AsymmetricScenario("regime formulas require identical company capacities");
        for (double g : co.capacity_G)
            if (g != first[0])
                throw AsymmetricScenario("regime formulas require capacities uniform over periods");
    }
    return spec;
}

enum class SweepAxis { periods, population };

struct SweepPoint {
    double axis_value = 0.0;
    double price = 0.0;            // per cell (identical across cells by symmetry)
    double demand_per_cell = 0.0;  // per consumer, per (company, period)
    double user_utility = 0.0;
    double company_revenue = 0.0;
};

struct RegimeSweepResult {
    SweepAxis axis = SweepAxis::periods;
    std::vector<SweepPoint> points;  // ascending in axis_value
    double utility_limit = 0.0;
    double demand_limit = 0.0;
    // Meaningful for the periods axis only (revenue = sum B / K for every T);
    // NaN on the population axis, where total budget grows with N.
    double revenue_constant = std::numeric_limits<double>::quiet_NaN();
};

namespace detail {

inline void check_spec(const SymmetricSpec& spec) {
    if (spec.K < 1 || spec.N < 1 || !(spec.G_total > 0.0) || !(spec.budget_each > 0.0))
        throw NonPositiveInput("symmetric spec needs K,N >= 1 and positive G_total, budget");
    if (spec.N > 1000000) throw ScaleTooLarge("population bounded at 1e6 in the regime sweeps");
}

}  // namespace detail

/// Horizon-length sweep at fixed population.  Per point:
///   price            = sum(B) / (K * G_total)          (no T dependence)
///   demand per cell  = G_total * B_n / (T * sum(B))
///   user utility     = K * T * ln(1 + G_total * B_n / (sum(B) * T))
///   company revenue  = sum(B) / K                      (constant)
/// and the utility tends to K * G_total * B_n / sum(B) from below.
inline RegimeSweepResult sweep_periods(const SymmetricSpec& spec, std::vector<int> T_values) {
    detail::check_spec(spec);
    std::sort(T_values.begin(), T_values.end());
    RegimeSweepResult r;
    r.axis = SweepAxis::periods;
    const double sumB = spec.budget_each * spec.N;
    const double a = spec.G_total * spec.budget_each / sumB;
    for (int T : T_values) {
        if (T < 1) throw NonPositiveInput("every T in the sweep must be >= 1");
        if (T > 4096) throw ScaleTooLarge("periods bounded at 4096 in the regime sweeps");
        SweepPoint p;
        p.axis_value = T;
        p.price = sumB / (spec.K * spec.G_total);
        p.demand_per_cell = a / T;
        p.user_utility = static_cast<double>(spec.K) * T * std::log1p(a / T);
        p.company_revenue = sumB / spec.K;
        r.points.push_back(p);
    }
    r.utility_limit = spec.K * a;
    r.demand_limit = 0.0;
    r.revenue_constant = sumB / spec.K;
    return r;
}

/// Population sweep at fixed horizon.  Per point:
///   price            = N * B_n / (K * T * G_star),  G_star = G_total / T
///   demand per cell  = G_total / (T * N)
///   user utility     = K * T * ln(1 + G_total / (T * N))
///   company revenue  = N * B_n / K
/// Prices grow without bound and demands vanish as N grows.
inline RegimeSweepResult sweep_population(const SymmetricSpec& spec, int T,
                                         std::vector<int> N_values) {
    detail::check_spec(spec);
    if (T < 1) throw NonPositiveInput("T must be >= 1");
    std::sort(N_values.begin(), N_values.end());
    RegimeSweepResult r;
    r.axis = SweepAxis::population;
    const double g_star = spec.G_total / T;
    for (int N : N_values) {
        if (N < 1) throw NonPositiveInput("every N in the sweep must be >= 1");
        if (N > 1000000) throw ScaleTooLarge("population bounded at 1e6 in the regime sweeps");
        SweepPoint p;
        p.axis_value = N;
        p.price = N * spec.budget_each / (spec.K * T * g_star);
        p.demand_per_cell = spec.G_total / (static_cast<double>(T) * N);
        p.user_utility = static_cast<double>(spec.K) * T * std::log1p(p.demand_per_cell);
        p.company_revenue = N * spec.budget_each / spec.K;
        r.points.push_back(p);
    }
    r.utility_limit = 0.0;
    r.demand_limit = 0.0;
    return r;
}

/// The market-balance threshold: with K/N at or above
///   B_n / (p_max * T * G_star)
/// the symmetric-regime price stays within p_max while revenues still exhaust
/// the budgets; below it the price formula exceeds p_max.
inline double min_company_ratio(double B_n, double p_max, int T, double G_star) {
    if (!(B_n > 0.0) || !(p_max > 0.0) || T < 1 || !(G_star > 0.0))
        throw NonPositiveInput("min_company_ratio requires strictly positive inputs");
    return B_n / (p_max * T * G_star);
}

}  // namespace drgame
