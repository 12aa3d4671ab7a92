#pragma once

#include <charconv>
#include <fstream>
#include <ostream>
#include <string>
#include <system_error>
#include <vector>

#include "json.hpp"

#include "drgame/allocation.hpp"
#include "drgame/asymptotics.hpp"
#include "drgame/distributed.hpp"
#include "drgame/equilibrium.hpp"
#include "drgame/errors.hpp"
#include "drgame/model.hpp"

namespace drgame {

// ordered_json keeps insertion order, which makes every emitted document
// reproducible byte-for-byte.
using json = nlohmann::ordered_json;

namespace detail {

/// Shortest round-trip decimal form, used for CSV cells.
inline std::string fmt_double(double x) {
    char buf[32];
    auto res = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, res.ptr);
}

inline json grid_to_json(const KTGrid& g) {
    json rows = json::array();
    for (int k = 0; k < g.K; ++k) {
        json row = json::array();
        for (int t = 0; t < g.T; ++t) row.push_back(g.at(k, t));
        rows.push_back(std::move(row));
    }
    return rows;
}

/// Accepts either a JSON array of length T or a single number to broadcast.
inline std::vector<double> vector_or_broadcast(const json& j, std::size_t T,
                                               const std::string& what) {
    std::vector<double> v;
    if (j.is_number()) {
        v.assign(T, j.get<double>());
    } else if (j.is_array()) {
        for (const auto& x : j) v.push_back(x.get<double>());
        if (v.size() != T)
            throw ParseError(what + ": expected " + std::to_string(T) + " entries, got " +
                             std::to_string(v.size()));
    } else {
        throw ParseError(what + ": expected number or array");
    }
    return v;
}

}  // namespace detail

// --- scenario -------------------------------------------------------------

inline json scenario_to_json(const Scenario& s) {
    json j;
    j["periods"] = s.periods_T;
    j["consumers"] = json::array();
    for (const auto& c : s.consumers) {
        j["consumers"].push_back({{"id", c.id},
                                  {"budget", c.budget_B},
                                  {"energy_min", c.energy_min_E},
                                  {"gamma", c.gamma},
                                  {"zeta", c.zeta}});
    }
    j["companies"] = json::array();
    for (const auto& c : s.companies) {
        j["companies"].push_back({{"id", c.id},
                                  {"capacity", c.capacity_G},
                                  {"price_min", c.price_min},
                                  {"price_max", c.price_max},
                                  {"total_capacity", c.total_capacity_G_total}});
    }
    return j;
}

/// Schema: {periods, consumers: [{id, budget, energy_min?, gamma?, zeta?}],
/// companies: [{id, capacity, price_min?, price_max?, total_capacity?}]}.
/// capacity/price_min/price_max take an array of length `periods` or a single
/// number to broadcast; omitted bounds default to (1e-9, 1e9) and an omitted
/// total_capacity to the capacity sum.
inline Scenario scenario_from_json(const json& j) {
    try {
        Scenario s;
        s.periods_T = j.at("periods").get<int>();
        const std::size_t T = s.periods_T > 0 ? static_cast<std::size_t>(s.periods_T) : 0;
        for (const auto& cj : j.at("consumers")) {
            Consumer c;
            c.id = cj.at("id").get<std::string>();
            c.budget_B = cj.at("budget").get<double>();
            c.energy_min_E = cj.value("energy_min", 0.0);
            c.gamma = cj.value("gamma", 1.0);
            c.zeta = cj.value("zeta", 1.0);
            s.consumers.push_back(std::move(c));
        }
        for (const auto& cj : j.at("companies")) {
            Company c;
            c.id = cj.at("id").get<std::string>();
            c.capacity_G = detail::vector_or_broadcast(cj.at("capacity"), T,
                                                       "company " + c.id + " capacity");
            if (cj.contains("price_min"))
                c.price_min = detail::vector_or_broadcast(cj.at("price_min"), T,
                                                          "company " + c.id + " price_min");
            else
                c.price_min.assign(T, 1e-9);
            if (cj.contains("price_max"))
                c.price_max = detail::vector_or_broadcast(cj.at("price_max"), T,
                                                          "company " + c.id + " price_max");
            else
                c.price_max.assign(T, 1e9);
            if (cj.contains("total_capacity"))
                c.total_capacity_G_total = cj.at("total_capacity").get<double>();
            else
                for (double g : c.capacity_G) c.total_capacity_G_total += g;
            s.companies.push_back(std::move(c));
        }
        return s;
    } catch (const json::exception& e) {
        throw ParseError(std::string("scenario JSON: ") + e.what());
    }
}

inline Scenario load_scenario(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ParseError(path + ": " + e.what());
    }
    return scenario_from_json(j);
}

inline json violations_to_json(const std::vector<Violation>& vs) {
    json arr = json::array();
    for (const auto& v : vs)
        arr.push_back({{"entity", v.entity},
                       {"field", v.field},
                       {"rule", v.rule},
                       {"severity", v.severity == Severity::error ? "error" : "warning"}});
    return arr;
}

// --- equilibrium outcome ---------------------------------------------------

inline json cells_to_json(const std::vector<CellRef>& cells) {
    json arr = json::array();
    for (const auto& c : cells) arr.push_back({{"company", c.company}, {"period", c.period}});
    return arr;
}

inline json outcome_to_json(const EquilibriumOutcome& o, const Scenario& s) {
    json j;
    j["periods"] = s.periods_T;
    j["company_ids"] = json::array();
    for (const auto& c : s.companies) j["company_ids"].push_back(c.id);
    j["prices"] = detail::grid_to_json(o.prices);
    KTGrid agg(o.prices.K, o.prices.T);
    for (int k = 0; k < agg.K; ++k)
        for (int t = 0; t < agg.T; ++t) agg.at(k, t) = o.demands.aggregate(k, t);
    j["aggregate_demand"] = detail::grid_to_json(agg);
    j["revenues"] = o.revenues;
    j["consumer_utilities"] = o.consumer_utilities;
    j["flags"] = {{"clamped_cells", cells_to_json(o.clamped_cells)},
                  {"negative_demand_cells", cells_to_json(o.negative_demand_cells)},
                  {"infeasible_budget_ids", o.infeasible_budget_ids}};
    j["residuals"] = {{"capacity_binding", o.max_capacity_residual},
                      {"revenue_conservation", o.revenue_conservation_residual}};
    return j;
}

inline json allocation_to_json(const AllocationProfile& a, const Scenario& s) {
    json j;
    j["company_ids"] = json::array();
    for (const auto& c : s.companies) j["company_ids"].push_back(c.id);
    j["allocations"] = detail::grid_to_json(a.allocations);
    j["totals"] = a.totals;
    json rev = json::array();
    for (int k = 0; k < a.allocations.K; ++k)
        rev.push_back(revenue_given_allocation(k, a.allocations, s));
    j["revenues_at_equilibrium"] = rev;
    return j;
}

// --- distributed trace -----------------------------------------------------

namespace detail {

inline std::string agent_label(const AgentRef& a) {
    if (a.kind == AgentKind::consumer)
        return a.index < 0 ? "consumers" : "consumer:" + std::to_string(a.index);
    return "company:" + std::to_string(a.index);
}

inline const char* kind_label(PayloadKind k) {
    switch (k) {
        case PayloadKind::price_update: return "price-update";
        case PayloadKind::demand_report: return "demand-report";
        case PayloadKind::no_change: return "no-change";
        case PayloadKind::budget_disclosure: return "budget-disclosure";
        default: return "capacity-disclosure";
    }
}

}  // namespace detail

/// One JSON object per line, one line per message.
inline void write_trace_jsonl(const IterationTrace& trace, std::ostream& out) {
    for (const auto& m : trace.message_log) {
        json j = {{"round", m.round},
                  {"sender", detail::agent_label(m.sender)},
                  {"receiver", detail::agent_label(m.receiver)},
                  {"kind", detail::kind_label(m.kind)},
                  {"period", m.period},
                  {"company", m.company},
                  {"value", m.value}};
        out << j.dump() << '\n';
    }
}

inline json trace_summary_json(const IterationTrace& trace) {
    json j;
    j["outcome"] = to_string(trace.outcome);
    j["rounds"] = trace.final_round;
    j["final_prices"] = detail::grid_to_json(trace.final_prices);
    j["max_residual"] = trace.max_residual;
    if (std::isfinite(trace.closed_form_max_rel))
        j["closed_form_max_rel"] = trace.closed_form_max_rel;
    if (std::isfinite(trace.min_epsilon_slack))
        j["epsilon_slack_min"] = trace.min_epsilon_slack;
    if (trace.divergence_cell)
        j["divergence_cell"] = {{"company", trace.divergence_cell->company},
                                {"period", trace.divergence_cell->period}};
    return j;
}

// --- regime sweeps ---------------------------------------------------------

inline void write_sweep_csv(const RegimeSweepResult& r, std::ostream& out) {
    out << "axis_value,price,demand_per_cell,user_utility,company_revenue\n";
    for (const auto& p : r.points) {
        out << detail::fmt_double(p.axis_value) << ',' << detail::fmt_double(p.price) << ','
            << detail::fmt_double(p.demand_per_cell) << ',' << detail::fmt_double(p.user_utility)
            << ',' << detail::fmt_double(p.company_revenue) << '\n';
    }
}

inline json sweep_limits_json(const RegimeSweepResult& r) {
    json j;
    j["axis"] = r.axis == SweepAxis::periods ? "periods" : "population";
    j["utility_limit"] = r.utility_limit;
    j["demand_limit"] = r.demand_limit;
    j["revenue_constant"] = r.revenue_constant;  // null on the population axis
    return j;
}

}  // namespace drgame
