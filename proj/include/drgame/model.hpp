#pragma once

#include <cmath>
#include <cstddef>
#include <numeric>
#include <string>
#include <vector>

#include "drgame/errors.hpp"

namespace drgame {

/// Dense K-by-T grid of doubles (row = company, column = period).
/// Used for prices, per-company demands and allocations alike; the only
/// structure the game ever needs is "one number per (company, period) cell".
struct KTGrid {
    int K = 0;
    int T = 0;
    std::vector<double> v;  // row-major, size K*T

    KTGrid() = default;
    KTGrid(int k, int t, double fill = 0.0) : K(k), T(t), v(static_cast<std::size_t>(k) * t, fill) {}

    double& at(int k, int t) { return v[static_cast<std::size_t>(k) * T + t]; }
    double at(int k, int t) const { return v[static_cast<std::size_t>(k) * T + t]; }

    double sum() const { return std::accumulate(v.begin(), v.end(), 0.0); }
    int cells() const { return K * T; }

    bool same_shape(const KTGrid& o) const { return K == o.K && T == o.T; }
    bool operator==(const KTGrid& o) const { return K == o.K && T == o.T && v == o.v; }
};

/// Prices in currency per kWh; every entry must be strictly positive when
/// fed to the solvers.
using PriceSchedule = KTGrid;

/// One (company, period) coordinate, used in diagnostics and flags.
struct CellRef {
    int company = 0;
    int period = 0;
    bool operator==(const CellRef& o) const { return company == o.company && period == o.period; }
};

/// Per-consumer, per-company, per-period demands in kWh.
struct DemandProfile {
    int N = 0;
    int K = 0;
    int T = 0;
    std::vector<double> v;  // index (n,k,t), n-major

    DemandProfile() = default;
    DemandProfile(int n, int k, int t, double fill = 0.0)
        : N(n), K(k), T(t), v(static_cast<std::size_t>(n) * k * t, fill) {}

    double& at(int n, int k, int t) {
        return v[(static_cast<std::size_t>(n) * K + k) * T + t];
    }
    double at(int n, int k, int t) const {
        return v[(static_cast<std::size_t>(n) * K + k) * T + t];
    }

    /// Aggregate demand at one (k,t) cell across all consumers.
    double aggregate(int k, int t) const {
        double s = 0.0;
        for (int n = 0; n < N; ++n) s += at(n, k, t);
        return s;
    }
};

struct Consumer {
    std::string id;
    double budget_B = 0.0;     // currency the consumer is willing to spend over the horizon
    double energy_min_E = 0.0; // kWh the consumer must receive over the horizon
    double gamma = 1.0;        // preference weight, > 0
    double zeta = 1.0;         // preference offset, >= 1
};

struct Company {
    std::string id;
    std::vector<double> capacity_G;        // kWh per period, length T
    double total_capacity_G_total = 0.0;   // kWh budget for the allocation game
    std::vector<double> price_min;         // currency/kWh per period, length T, > 0
    std::vector<double> price_max;         // currency/kWh per period, length T
};

struct Scenario {
    std::vector<Consumer> consumers;
    std::vector<Company> companies;
    int periods_T = 1;

    int N() const { return static_cast<int>(consumers.size()); }
    int K() const { return static_cast<int>(companies.size()); }

    // Aggregates are recomputed on demand so they can never drift from the
    // member lists.
    double aggregate_Z() const {
        double z = 0.0;
        for (const auto& c : consumers) z += c.zeta;
        return z;
    }
    double aggregate_B() const {
        double b = 0.0;
        for (const auto& c : consumers) b += c.budget_B;
        return b;
    }
};

// --- validation ------------------------------------------------------------

enum class Severity { error, warning };

struct Violation {
    std::string entity;  // e.g. "consumer[3] (id=c3)" or "scenario"
    std::string field;
    std::string rule;    // human-readable statement of the broken invariant
    Severity severity = Severity::error;
};

namespace detail {
inline bool finite(double x) { return std::isfinite(x); }
}

/// Checks every structural invariant and returns the full list of breaches.
/// Never throws; an empty list means the scenario is well-formed.  Zero
/// capacity entries are reported as warnings: the price formulas stay finite
/// but the constant-product interpretation of prices breaks down.
inline std::vector<Violation> validate_scenario(const Scenario& s) {
    std::vector<Violation> out;
    auto err = [&](std::string entity, std::string field, std::string rule,
                   Severity sev = Severity::error) {
        out.push_back({std::move(entity), std::move(field), std::move(rule), sev});
    };

    if (s.periods_T < 1) err("scenario", "periods_T", "periods_T >= 1");
    if (s.consumers.empty()) err("scenario", "consumers", "at least one consumer (N >= 1)");
    if (s.companies.empty()) err("scenario", "companies", "at least one company (K >= 1)");

    for (std::size_t i = 0; i < s.consumers.size(); ++i) {
        const auto& c = s.consumers[i];
        std::string who = "consumer[" + std::to_string(i) + "] (id=" + c.id + ")";
        if (!(c.gamma > 0.0) || !detail::finite(c.gamma))
            err(who, "gamma", "gamma > 0");
        if (!(c.zeta >= 1.0) || !detail::finite(c.zeta))
            err(who, "zeta", "zeta >= 1");
        if (!(c.budget_B >= 0.0) || !detail::finite(c.budget_B))
            err(who, "budget_B", "budget finite and >= 0");
        if (!(c.energy_min_E >= 0.0) || !detail::finite(c.energy_min_E))
            err(who, "energy_min_E", "energy_min finite and >= 0");
    }

    const std::size_t T = s.periods_T > 0 ? static_cast<std::size_t>(s.periods_T) : 0;
    for (std::size_t i = 0; i < s.companies.size(); ++i) {
        const auto& c = s.companies[i];
        std::string who = "company[" + std::to_string(i) + "] (id=" + c.id + ")";
        if (c.capacity_G.size() != T)
            err(who, "capacity_G", "capacity length = T");
        if (c.price_min.size() != T)
            err(who, "price_min", "price_min length = T");
        if (c.price_max.size() != T)
            err(who, "price_max", "price_max length = T");
        for (std::size_t t = 0; t < c.capacity_G.size(); ++t) {
            double g = c.capacity_G[t];
            if (!(g >= 0.0) || !detail::finite(g)) {
                err(who, "capacity_G[" + std::to_string(t) + "]", "capacity finite and >= 0");
            } else if (g == 0.0) {
                err(who, "capacity_G[" + std::to_string(t) + "]",
                    "zero capacity: price formulas degenerate to a constant-product violation",
                    Severity::warning);
            }
        }
        for (std::size_t t = 0; t < c.price_min.size(); ++t) {
            if (!(c.price_min[t] > 0.0) || !detail::finite(c.price_min[t]))
                err(who, "price_min[" + std::to_string(t) + "]", "price_min > 0");
        }
        const std::size_t nb = std::min(c.price_min.size(), c.price_max.size());
        for (std::size_t t = 0; t < nb; ++t) {
            if (!(c.price_min[t] <= c.price_max[t]))
                err(who, "price_max[" + std::to_string(t) + "]", "price_min <= price_max");
        }
        if (!(c.total_capacity_G_total >= 0.0) || !detail::finite(c.total_capacity_G_total))
            err(who, "total_capacity_G_total", "total capacity finite and >= 0");
    }
    return out;
}

inline bool has_errors(const std::vector<Violation>& vs) {
    for (const auto& v : vs)
        if (v.severity == Severity::error) return true;
    return false;
}

/// Convenience: throws DomainError when validation reports real errors
/// (warnings pass).  Solvers call this at their entry points.
inline void require_valid(const Scenario& s) {
    auto vs = validate_scenario(s);
    if (!has_errors(vs)) return;
    std::string msg = "invalid scenario:";
    for (const auto& v : vs) {
        if (v.severity != Severity::error) continue;
        msg += " [" + v.entity + "." + v.field + ": " + v.rule + "]";
    }
    throw DomainError(msg);
}

}  // namespace drgame
