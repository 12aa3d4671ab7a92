#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <utility>
#include <vector>

#include "drgame/errors.hpp"
#include "drgame/model.hpp"

namespace drgame {

/// Per-company split of the horizon energy budget across periods.
struct AllocationProfile {
    KTGrid allocations;           // kWh per (company, period)
    std::vector<double> totals;   // row sums, certified equal to each G_total
};

namespace detail {

inline void require_unit_zeta(const Scenario& s) {
    for (const auto& c : s.consumers)
        if (c.zeta != 1.0)
            throw ZetaNotUniform("allocation game requires zeta = 1 for every consumer");
}

}  // namespace detail

/// Revenue of company k when the capacity board is `alloc`:
///   U_k = B * sum_t g_k(t) / ((g_k(t)+N) * (K*T - sum_{j,tau} N/(g_j(tau)+N))).
/// Only valid under the uniform-preference assumption zeta = 1 (aggregate
/// offset equals the head count N).
inline double revenue_given_allocation(int k, const KTGrid& alloc, const Scenario& s) {
    detail::require_unit_zeta(s);
    const double N = static_cast<double>(s.N());
    const double B = s.aggregate_B();
    const double KT = static_cast<double>(alloc.K) * alloc.T;

    double shrink = 0.0;  // sum over all cells of N/(g+N)
    for (double g : alloc.v) {
        if (g < 0.0) throw DomainError("allocation entries must be non-negative");
        shrink += N / (g + N);
    }
    double den = KT - shrink;
    if (!(den > 0.0))
        throw DegenerateDenominator("K*T - sum N/(G+N) must be strictly positive");

    double u = 0.0;
    for (int t = 0; t < alloc.T; ++t) {
        double g = alloc.at(k, t);
        u += B * g / ((g + N) * den);
    }
    return u;
}

/// The unique equilibrium split: every company spreads its total capacity
/// evenly, g_k(t) = G_total_k / T.
inline AllocationProfile allocation_nash_equilibrium(const Scenario& s) {
    detail::require_unit_zeta(s);
    const int K = s.K(), T = s.periods_T;
    AllocationProfile r;
    r.allocations = KTGrid(K, T);
    r.totals.assign(static_cast<std::size_t>(K), 0.0);
    for (int k = 0; k < K; ++k) {
        double total = s.companies[k].total_capacity_G_total;
        if (!(total > 0.0))
            throw DomainError("allocation equilibrium needs total_capacity > 0 for every company");
        double each = total / T;
        double acc = 0.0;
        for (int t = 0; t < T; ++t) {
            r.allocations.at(k, t) = each;
            acc += each;
        }
        // Certify the full budget is allocated (exact up to rounding of T
        // additions; repair the last cell so the row sums exactly).
        double gap = total - acc;
        r.allocations.at(k, T - 1) += gap;
        r.totals[static_cast<std::size_t>(k)] = total;
    }
    return r;
}

namespace detail {

/// Euclidean projection of y onto the scaled simplex {x >= 0, sum x = total}.
inline std::vector<double> project_simplex(std::vector<double> y, double total) {
    std::vector<double> u = y;
    std::sort(u.begin(), u.end(), std::greater<double>());
    double css = 0.0, theta = 0.0;
    int rho = 0;
    for (std::size_t j = 0; j < u.size(); ++j) {
        css += u[j];
        double th = (css - total) / static_cast<double>(j + 1);
        if (u[j] - th > 0.0) {
            rho = static_cast<int>(j + 1);
            theta = th;
        }
    }
    (void)rho;
    for (double& x : y) x = std::max(0.0, x - theta);
    return y;
}

}  // namespace detail

/// Numerically maximizes company k's revenue over its own row with the other
/// rows held fixed.  Projected-gradient ascent with seeded random restarts
/// (step shrinks geometrically once progress stalls); for T <= 3 a dense grid
/// pass additionally seeds the ascent.  Exists to certify the uniform split;
/// not a production path, hence the hard T <= 4 bound.
inline std::vector<double> best_response_oracle(int k, const KTGrid& board, const Scenario& s,
                                                int grid_resolution = 200, unsigned seed = 0) {
    if (board.T > 4) throw ScaleTooLarge("best_response_oracle supports T <= 4 only");
    if (grid_resolution < 10) throw DomainError("grid_resolution must be >= 10");
    detail::require_unit_zeta(s);

    const int T = board.T;
    const double total = s.companies[static_cast<std::size_t>(k)].total_capacity_G_total;

    KTGrid work = board;
    auto value = [&](const std::vector<double>& g) {
        for (int t = 0; t < T; ++t) work.at(k, t) = g[static_cast<std::size_t>(t)];
        return revenue_given_allocation(k, work, s);
    };

    const double N = static_cast<double>(s.N());
    const double B = s.aggregate_B();
    const double KT = static_cast<double>(board.K) * T;
    auto gradient = [&](const std::vector<double>& g) {
        // U = B * F / (c + F) with F = sum g/(g+N) and c collecting the
        // rivals' cells; dU/dg_t = B*c/(c+F)^2 * N/(g_t+N)^2.
        double rival = 0.0;
        for (int j = 0; j < board.K; ++j) {
            if (j == k) continue;
            for (int t = 0; t < T; ++t) rival += N / (board.at(j, t) + N);
        }
        double c = KT - static_cast<double>(T) - rival;  // gamma_{-k} in the concavity argument
        double F = 0.0;
        for (double x : g) F += x / (x + N);
        std::vector<double> grad(static_cast<std::size_t>(T));
        double scale = B * c / ((c + F) * (c + F));
        for (int t = 0; t < T; ++t) {
            double x = g[static_cast<std::size_t>(t)];
            grad[static_cast<std::size_t>(t)] = scale * N / ((x + N) * (x + N));
        }
        return grad;
    };

    auto ascend = [&](std::vector<double> g) {
        double step = 1e-2 * total;
        double best = value(g);
        int stale = 0;
        for (int it = 0; it < 10000 && step > 1e-14 * total; ++it) {
            std::vector<double> grad = gradient(g);
            std::vector<double> cand(g);
            double gnorm = 0.0;
            for (double x : grad) gnorm = std::max(gnorm, std::abs(x));
            if (gnorm == 0.0) break;
            for (int t = 0; t < T; ++t)
                cand[static_cast<std::size_t>(t)] += step / gnorm * grad[static_cast<std::size_t>(t)];
            cand = detail::project_simplex(std::move(cand), total);
            double v = value(cand);
            if (v > best) {
                best = v;
                g = std::move(cand);
                stale = 0;
            } else if (++stale >= 2) {
                step *= 0.5;
                stale = 0;
            }
        }
        return std::pair<double, std::vector<double>>(best, std::move(g));
    };

    // Degenerate flat objective: when the rivals hold no capacity at all
    // (always the case for K = 1), revenue conservation pins U_k at the whole
    // budget B for every feasible split — the gamma_{-k} factor above is
    // exactly zero and the gradient vanishes identically.  Every point is
    // optimal; return the uniform split as the canonical representative.
    {
        double rival = 0.0;
        for (int j = 0; j < board.K; ++j) {
            if (j == k) continue;
            for (int t = 0; t < T; ++t) rival += N / (board.at(j, t) + N);
        }
        if (KT - static_cast<double>(T) - rival <= 0.0)
            return std::vector<double>(static_cast<std::size_t>(T), total / T);
    }

    std::mt19937 rng(seed);
    std::exponential_distribution<double> expd(1.0);
    double best_v = -std::numeric_limits<double>::infinity();
    std::vector<double> best_g(static_cast<std::size_t>(T), total / T);

    std::vector<std::vector<double>> starts;
    for (int r = 0; r < 16; ++r) {
        std::vector<double> g(static_cast<std::size_t>(T));
        double sum = 0.0;
        for (double& x : g) {
            x = expd(rng);
            sum += x;
        }
        for (double& x : g) x *= total / sum;
        starts.push_back(std::move(g));
    }
    if (T == 1) {
        return {total};  // one-dimensional simplex is a point
    }
    if (T <= 3) {
        // dense grid pass: best cell becomes one more ascent seed
        double h = total / grid_resolution;
        std::vector<double> bestcell;
        double bestval = -std::numeric_limits<double>::infinity();
        for (int i = 0; i <= grid_resolution; ++i) {
            double g1 = i * h;
            if (T == 2) {
                // remainder clamped: h*grid_resolution can overshoot total by an ulp
                std::vector<double> g = {g1, std::max(0.0, total - g1)};
                double v = value(g);
                if (v > bestval) {
                    bestval = v;
                    bestcell = g;
                }
            } else {
                for (int j = 0; i + j <= grid_resolution; ++j) {
                    std::vector<double> g = {g1, j * h, std::max(0.0, total - g1 - j * h)};
                    double v = value(g);
                    if (v > bestval) {
                        bestval = v;
                        bestcell = g;
                    }
                }
            }
        }
        starts.push_back(std::move(bestcell));
    }

    for (auto& g0 : starts) {
        auto [v, g] = ascend(std::move(g0));
        if (v > best_v) {
            best_v = v;
            best_g = std::move(g);
        }
    }
    return best_g;
}

}  // namespace drgame
