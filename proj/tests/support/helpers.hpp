#pragma once

// Shared test utilities: scenario generators with controllable ranges and an
// independent numerical solver for the single-consumer problem, used to
// cross-check the closed forms.

#include <algorithm>
#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "drgame/model.hpp"

namespace testsupport {

struct GenRanges {
    int K_min = 1, K_max = 6;
    int T_min = 1, T_max = 6;
    int N_min = 1, N_max = 100;
    double G_min = 0.1, G_max = 1e3;
    double B_min = 0.1, B_max = 1e3;
    double zeta_min = 1.0, zeta_max = 3.0;
};

inline drgame::Scenario random_scenario(std::mt19937& rng, const GenRanges& r = {}) {
    std::uniform_int_distribution<int> Kd(r.K_min, r.K_max), Td(r.T_min, r.T_max),
        Nd(r.N_min, r.N_max);
    std::uniform_real_distribution<double> Gd(r.G_min, r.G_max), Bd(r.B_min, r.B_max),
        Zd(r.zeta_min, r.zeta_max);
    drgame::Scenario s;
    int K = Kd(rng), T = Td(rng), N = Nd(rng);
    s.periods_T = T;
    for (int n = 0; n < N; ++n) {
        drgame::Consumer c;
        c.id = "c" + std::to_string(n + 1);
        c.budget_B = Bd(rng);
        c.energy_min_E = 0.0;
        c.gamma = 1.0;
        c.zeta = Zd(rng);
        s.consumers.push_back(std::move(c));
    }
    for (int k = 0; k < K; ++k) {
        drgame::Company c;
        c.id = "co" + std::to_string(k + 1);
        for (int t = 0; t < T; ++t) c.capacity_G.push_back(Gd(rng));
        for (double g : c.capacity_G) c.total_capacity_G_total += g;
        c.price_min.assign(static_cast<std::size_t>(T), 1e-9);
        c.price_max.assign(static_cast<std::size_t>(T), 1e9);
        s.companies.push_back(std::move(c));
    }
    return s;
}

inline drgame::PriceSchedule random_prices(std::mt19937& rng, int K, int T, double lo = 0.2,
                                           double hi = 5.0) {
    std::uniform_real_distribution<double> Pd(lo, hi);
    drgame::PriceSchedule p(K, T);
    for (double& x : p.v) x = Pd(rng);
    return p;
}

/// Independent solver for one consumer's horizon problem
///   max sum ln(zeta + d)  s.t.  sum p*d <= B,  d >= 0
/// via bisection on the budget multiplier with the non-negativity constraints
/// handled by truncation: d(lambda) = max(0, gamma/(lambda p) - zeta).
/// Spending is strictly decreasing in lambda, so bisection converges; this
/// shares no code with the production closed form.
struct KktSolution {
    drgame::KTGrid demand;
    double utility = 0.0;
    double spend = 0.0;
};

inline KktSolution consumer_kkt_oracle(const drgame::Consumer& c,
                                       const drgame::PriceSchedule& prices) {
    auto spend_at = [&](double lambda) {
        double s = 0.0;
        for (double p : prices.v) s += p * std::max(0.0, c.gamma / (lambda * p) - c.zeta);
        return s;
    };
    double lo = 1e-12, hi = 1.0;
    while (spend_at(hi) > c.budget_B) hi *= 2.0;   // too cheap -> overspend
    while (spend_at(lo) < c.budget_B) lo *= 0.5;   // ensure bracket
    for (int it = 0; it < 200; ++it) {
        double mid = 0.5 * (lo + hi);
        if (spend_at(mid) > c.budget_B)
            lo = mid;
        else
            hi = mid;
    }
    double lambda = 0.5 * (lo + hi);
    KktSolution sol;
    sol.demand = drgame::KTGrid(prices.K, prices.T);
    for (int i = 0; i < prices.cells(); ++i) {
        double d = std::max(0.0, c.gamma / (lambda * prices.v[i]) - c.zeta);
        sol.demand.v[i] = d;
        sol.spend += prices.v[i] * d;
        sol.utility += c.gamma * std::log(c.zeta + d);
    }
    return sol;
}

}  // namespace testsupport
