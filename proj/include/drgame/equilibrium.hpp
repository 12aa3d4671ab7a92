#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "drgame/errors.hpp"
#include "drgame/model.hpp"

namespace drgame {

// Relative tolerance used for the algebraic identities (budget binding,
// capacity binding, revenue conservation).  These identities are exact in
// real arithmetic; 1e-9 absorbs double rounding only.
inline constexpr double kIdentityTol = 1e-9;

inline bool close_rel(double a, double b, double tol = kIdentityTol) {
    return std::abs(a - b) <= tol * std::max(1.0, std::abs(b));
}

namespace detail {

inline void require_positive_prices(const PriceSchedule& p) {
    for (double x : p.v)
        if (!(x > 0.0) || !std::isfinite(x))
            throw NonPositivePrice("price schedule contains a non-positive or non-finite entry");
}

}  // namespace detail

// --- consumer side ---------------------------------------------------------

/// Raw per-consumer optimum.  `demand` holds the interior-stationarity values
/// as-is: when the budget is too small relative to the price spread these can
/// dip below zero, which is recorded in `negative_cells` rather than clamped
/// away (clamping would silently break the budget identity).
struct ConsumerResponse {
    KTGrid demand;
    std::vector<CellRef> negative_cells;
    double payment = 0.0;  // sum of p*d, equal to the budget by construction

    bool negative() const { return !negative_cells.empty(); }
};

/// Interior optimum of one consumer's horizon problem at fixed prices:
///   d[k,t] = (B + zeta * sum(p)) / (K*T*p[k,t]) - zeta.
/// The price-weighted sum of these demands telescopes to exactly B, which is
/// computed and checked here as the budget-binding certificate.
inline ConsumerResponse consumer_best_response(const Consumer& n, const PriceSchedule& prices) {
    detail::require_positive_prices(prices);
    const int K = prices.K, T = prices.T;
    const double S = prices.sum();
    const double KT = static_cast<double>(K) * T;

    ConsumerResponse r;
    r.demand = KTGrid(K, T);
    for (int k = 0; k < K; ++k) {
        for (int t = 0; t < T; ++t) {
            double p = prices.at(k, t);
            double d = (n.budget_B + n.zeta * S) / (KT * p) - n.zeta;
            r.demand.at(k, t) = d;
            r.payment += p * d;
            if (d < 0.0) r.negative_cells.push_back({k, t});
        }
    }
    if (!close_rel(r.payment, n.budget_B))
        throw std::logic_error("budget-binding certificate failed (numerical defect)");
    return r;
}

/// gamma * sum over cells of ln(zeta + d).  Demands must be non-negative;
/// use the equilibrium assembly if you need utilities in a flagged regime.
inline double consumer_utility(const Consumer& n, const KTGrid& demand) {
    double u = 0.0;
    for (double d : demand.v) {
        if (d < 0.0) throw NegativeDemand("consumer_utility requires non-negative demands");
        u += std::log(n.zeta + d);
    }
    return n.gamma * u;
}

namespace detail {

/// Utility evaluated on raw (possibly negative) demands.  Defined whenever
/// every zeta + d stays positive; NaN otherwise.  Used by the equilibrium
/// assembly so that flagged outcomes still carry comparable utilities.
inline double utility_lenient(const Consumer& n, const KTGrid& demand) {
    double u = 0.0;
    for (double d : demand.v) {
        double arg = n.zeta + d;
        if (!(arg > 0.0)) return std::numeric_limits<double>::quiet_NaN();
        u += std::log(arg);
    }
    return n.gamma * u;
}

}  // namespace detail

/// Smallest budget for which the consumer's optimal demands meet the horizon
/// energy requirement E_min.  At exactly this budget the total demand equals
/// E_min, so it doubles as the billing-cost-minimizing budget.
inline double minimum_budget(const Consumer& n, const PriceSchedule& prices) {
    detail::require_positive_prices(prices);
    const double KT = static_cast<double>(prices.K) * prices.T;
    double S = prices.sum();
    double H = 0.0;  // sum of 1/(K*T*p)
    for (double p : prices.v) H += 1.0 / (KT * p);
    return (n.energy_min_E + n.zeta * KT) / H - n.zeta * S;
}

// --- company side: prices --------------------------------------------------

namespace detail {

/// Shared denominator K*T - sum over cells of Z/(G+Z).  Strictly positive
/// whenever at least one capacity is positive (each term is then < 1).
inline double price_denominator(const Scenario& s) {
    const double Z = s.aggregate_Z();
    const double KT = static_cast<double>(s.K()) * s.periods_T;
    double acc = 0.0;
    for (const auto& c : s.companies)
        for (double g : c.capacity_G) acc += Z / (g + Z);
    double den = KT - acc;
    if (!(den > KT * 1e-12))
        throw DegenerateDenominator(
            "price denominator K*T - sum Z/(G+Z) is not strictly positive "
            "(all capacities zero?)");
    return den;
}

}  // namespace detail

/// Unique revenue-maximizing price board:
///   p[k,t] = B / ((G[k,t] + Z) * (K*T - sum Z/(G+Z))).
/// This is the cheap production path; the linear solve below exists to
/// cross-check it.
inline PriceSchedule equilibrium_prices_closed_form(const Scenario& s) {
    require_valid(s);
    const double B = s.aggregate_B();
    if (B <= 0.0)
        throw ZeroAggregateBudget("aggregate budget is zero: prices would degenerate to zero");
    const double Z = s.aggregate_Z();
    const double den = detail::price_denominator(s);

    PriceSchedule p(s.K(), s.periods_T);
    for (int k = 0; k < p.K; ++k)
        for (int t = 0; t < p.T; ++t)
            p.at(k, t) = B / ((s.companies[k].capacity_G[t] + Z) * den);
    for (double x : p.v)
        if (!(x > 0.0)) throw std::logic_error("closed-form price not strictly positive");
    return p;
}

/// Closed form vs. an independent dense solve of the stationarity system.
struct PriceSolveReport {
    PriceSchedule closed_form_prices;
    PriceSchedule oracle_prices;
    double max_rel_discrepancy = 0.0;  // max |closed-oracle| / max(1, |oracle|)
    std::string matrix_condition_note;
};

/// Builds the full K*T x K*T stationarity matrix
///   A = K*T * diag(G+Z) - Z * ones,  Y = B * ones,
/// solves A P = Y by pivoted LU, and reports the discrepancy against the
/// closed form.  Also evaluates the rank-one (Sherman-Morrison) decomposition
/// A = K*T*diag(G+Z) - (Z*ones)*ones' and checks that its scalar complement
///   1 - (1/(K*T)) * sum Z/(G+Z)
/// matches 1 + v' Ahat^-1 u computed numerically; this is the invertibility
/// certificate for A.
inline PriceSolveReport equilibrium_prices_linear_solve(const Scenario& s) {
    require_valid(s);
    const double B = s.aggregate_B();
    if (B <= 0.0)
        throw ZeroAggregateBudget("aggregate budget is zero: prices would degenerate to zero");
    const double Z = s.aggregate_Z();
    const int K = s.K(), T = s.periods_T;
    const int m = K * T;
    const double KT = static_cast<double>(m);

    Eigen::MatrixXd A = Eigen::MatrixXd::Constant(m, m, -Z);
    Eigen::VectorXd Y = Eigen::VectorXd::Constant(m, B);
    Eigen::VectorXd gz(m);
    for (int k = 0; k < K; ++k)
        for (int t = 0; t < T; ++t) {
            int i = k * T + t;
            gz(i) = s.companies[k].capacity_G[t] + Z;
            A(i, i) = KT * gz(i) - Z;
        }

    Eigen::FullPivLU<Eigen::MatrixXd> lu(A);
    if (!lu.isInvertible())
        throw SingularMatrix("stationarity matrix A is numerically singular");
    Eigen::VectorXd P = lu.solve(Y);

    PriceSolveReport rep;
    rep.oracle_prices = PriceSchedule(K, T);
    for (int i = 0; i < m; ++i) rep.oracle_prices.v[i] = P(i);
    rep.closed_form_prices = equilibrium_prices_closed_form(s);

    for (int i = 0; i < m; ++i) {
        double c = rep.closed_form_prices.v[i], o = rep.oracle_prices.v[i];
        rep.max_rel_discrepancy =
            std::max(rep.max_rel_discrepancy, std::abs(c - o) / std::max(1.0, std::abs(o)));
    }

    // Rank-one certificate: Ahat = K*T*diag(G+Z), u = -Z*ones, v = ones.
    double numeric = 1.0;
    for (int i = 0; i < m; ++i) numeric -= Z / (KT * gz(i));
    double closed = 1.0;
    for (int i = 0; i < m; ++i) closed -= (1.0 / KT) * (Z / gz(i));
    std::ostringstream note;
    note << "rank-one complement 1 + v'Ahat^-1 u = " << numeric
         << ", closed form 1 - (1/KT) sum Z/(G+Z) = " << closed
         << ", |diff| = " << std::abs(numeric - closed) << ", dimension " << m;
    rep.matrix_condition_note = note.str();
    return rep;
}

// --- clamping and assembly -------------------------------------------------

struct ClampResult {
    PriceSchedule prices;
    std::vector<CellRef> clamped_cells;
};

/// Projects each price into the company's [price_min, price_max] band for
/// that period.  Clamped outcomes lose the equilibrium identities, so the
/// assembly records which cells were touched and stops asserting them.
inline ClampResult clamp_prices(const PriceSchedule& p, const std::vector<Company>& companies) {
    ClampResult r;
    r.prices = p;
    for (int k = 0; k < p.K; ++k) {
        const auto& c = companies[static_cast<std::size_t>(k)];
        for (int t = 0; t < p.T; ++t) {
            double lo = c.price_min[static_cast<std::size_t>(t)];
            double hi = c.price_max[static_cast<std::size_t>(t)];
            double x = p.at(k, t);
            double y = std::clamp(x, lo, hi);
            if (y != x) {
                r.prices.at(k, t) = y;
                r.clamped_cells.push_back({k, t});
            }
        }
    }
    return r;
}

/// Full two-level solution plus diagnostics.
struct EquilibriumOutcome {
    PriceSchedule prices;
    DemandProfile demands;
    std::vector<double> revenues;            // per company, currency
    std::vector<double> consumer_utilities;  // NaN when ln is undefined for that consumer

    std::vector<CellRef> clamped_cells;
    std::vector<CellRef> negative_demand_cells;       // union over consumers
    std::vector<std::string> infeasible_budget_ids;   // consumers whose energy need is unmet

    bool clamped() const { return !clamped_cells.empty(); }
    bool negative_demand_regime() const { return !negative_demand_cells.empty(); }
    bool flagged() const { return clamped() || negative_demand_regime(); }

    // Residuals of the equilibrium identities; populated (and asserted small)
    // only for unflagged outcomes.
    double max_capacity_residual = std::numeric_limits<double>::quiet_NaN();
    double revenue_conservation_residual = std::numeric_limits<double>::quiet_NaN();
};

/// Leader prices -> bound projection -> follower demands -> revenues and
/// utilities.  Regime violations (clamped cells, negative interior demands,
/// unmet energy minimums) are reported in the outcome, never thrown.
inline EquilibriumOutcome stackelberg_equilibrium(const Scenario& s) {
    EquilibriumOutcome out;
    PriceSchedule star = equilibrium_prices_closed_form(s);
    ClampResult cl = clamp_prices(star, s.companies);
    out.prices = cl.prices;
    out.clamped_cells = cl.clamped_cells;

    const int N = s.N(), K = s.K(), T = s.periods_T;
    out.demands = DemandProfile(N, K, T);
    out.revenues.assign(static_cast<std::size_t>(K), 0.0);
    out.consumer_utilities.assign(static_cast<std::size_t>(N), 0.0);

    for (int n = 0; n < N; ++n) {
        ConsumerResponse r = consumer_best_response(s.consumers[n], out.prices);
        for (const auto& cell : r.negative_cells) {
            if (std::find(out.negative_demand_cells.begin(), out.negative_demand_cells.end(),
                          cell) == out.negative_demand_cells.end())
                out.negative_demand_cells.push_back(cell);
        }
        double total = 0.0;
        for (int k = 0; k < K; ++k)
            for (int t = 0; t < T; ++t) {
                double d = r.demand.at(k, t);
                out.demands.at(n, k, t) = d;
                total += d;
            }
        out.consumer_utilities[n] = detail::utility_lenient(s.consumers[n], r.demand);
        if (total < s.consumers[n].energy_min_E * (1.0 - 1e-9) - 1e-12)
            out.infeasible_budget_ids.push_back(s.consumers[n].id);
    }

    for (int k = 0; k < K; ++k) {
        double u = 0.0;
        for (int t = 0; t < T; ++t) u += out.prices.at(k, t) * out.demands.aggregate(k, t);
        out.revenues[static_cast<std::size_t>(k)] = u;
    }

    if (!out.flagged()) {
        double cap_res = 0.0;
        for (int k = 0; k < K; ++k)
            for (int t = 0; t < T; ++t) {
                double g = s.companies[k].capacity_G[t];
                double agg = out.demands.aggregate(k, t);
                cap_res = std::max(cap_res, std::abs(agg - g) / std::max(1.0, std::abs(g)));
            }
        double rev_sum = 0.0;
        for (double u : out.revenues) rev_sum += u;
        double B = s.aggregate_B();
        double rev_res = std::abs(rev_sum - B) / std::max(1.0, std::abs(B));
        out.max_capacity_residual = cap_res;
        out.revenue_conservation_residual = rev_res;
        if (cap_res > kIdentityTol)
            throw std::logic_error("capacity-binding identity failed at unflagged equilibrium");
        if (rev_res > kIdentityTol)
            throw std::logic_error("revenue-conservation identity failed at unflagged equilibrium");
    }
    return out;
}

}  // namespace drgame
