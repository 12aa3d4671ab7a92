#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "drgame/equilibrium.hpp"
#include "drgame/errors.hpp"
#include "drgame/model.hpp"

namespace drgame {

// --- agents ---------------------------------------------------------------
//
// Each agent owns only its local data.  Companies know their own capacities,
// the public consumer head count, and the prices they have announced;
// consumers know their own preferences and the latest announced price board.
// Nothing else ever enters an agent, which is what the privacy audit relies
// on.

struct CompanyAgent {
    int index = 0;
    std::string id;
    std::vector<double> capacity_G;        // own capacities only
    std::vector<double> prices;            // own current price row
    std::vector<double> observed_demand;   // aggregate demand per period, as reported
    int population_N = 0;                  // public head count
    double delta = 0.0;                    // step-size offset
    double tol = 1e-8;                     // no-change threshold (relative)
};

struct ConsumerAgent {
    int index = 0;
    std::string id;
    double budget_B = 0.0;
    double energy_min_E = 0.0;
    double gamma = 1.0;
    double zeta = 1.0;
    PriceSchedule board;                   // latest announced prices, all companies
};

/// Denominator of the tatonnement step:  eps = (G_k(t) + N)/p + delta.
/// With delta >= 0 this is large enough that a price can never be driven to
/// zero by an undershooting demand report.
inline double epsilon_schedule(const CompanyAgent& a, int t, double p) {
    if (!(p > 0.0)) throw NonPositivePrice("epsilon_schedule requires p > 0");
    return (a.capacity_G[static_cast<std::size_t>(t)] + a.population_N) / p + a.delta;
}

struct PriceUpdateResult {
    double new_price = 0.0;
    bool changed = false;  // |new - old| exceeded the no-change threshold
};

/// One excess-demand step:  p <- p + (sum_d - G)/eps.  The no-change decision
/// uses the relative threshold |step| <= tol * max(1, p).
inline PriceUpdateResult price_update(const CompanyAgent& a, int t, double aggregate_demand) {
    double p = a.prices[static_cast<std::size_t>(t)];
    double eps = epsilon_schedule(a, t, p);
    double step = (aggregate_demand - a.capacity_G[static_cast<std::size_t>(t)]) / eps;
    PriceUpdateResult r;
    r.changed = std::abs(step) > a.tol * std::max(1.0, std::abs(p));
    r.new_price = r.changed ? p + step : p;
    return r;
}

// --- trace ----------------------------------------------------------------

enum class PayloadKind : std::uint8_t {
    price_update,
    demand_report,
    no_change,
    // The runner never emits these; they exist so a tampered trace has a
    // typed representation for the audit to reject.
    budget_disclosure,
    capacity_disclosure,
};

enum class AgentKind : std::uint8_t { company, consumer };

/// `index < 0` on a consumer receiver means "all consumers" (a broadcast).
struct AgentRef {
    AgentKind kind = AgentKind::company;
    int index = 0;
};

struct Message {
    int round = 0;
    AgentRef sender;
    AgentRef receiver;
    PayloadKind kind = PayloadKind::price_update;
    int company = -1;  // cell the payload refers to
    int period = -1;
    double value = 0.0;
};

struct RoundRecord {
    int round = 0;
    PriceSchedule prices;        // board after this round's updates
    KTGrid aggregate_demand;     // as last reported within the round
    KTGrid price_delta;          // per-cell change applied during the round
};

enum class RunOutcome { converged, diverged, cap_exceeded };

inline const char* to_string(RunOutcome o) {
    switch (o) {
        case RunOutcome::converged: return "converged";
        case RunOutcome::diverged: return "diverged";
        default: return "cap-exceeded";
    }
}

struct IterationTrace {
    std::vector<RoundRecord> rounds;
    std::vector<Message> message_log;
    RunOutcome outcome = RunOutcome::cap_exceeded;
    int final_round = 0;
    PriceSchedule final_prices;
    double max_residual = std::numeric_limits<double>::quiet_NaN();  // |sum_d - G| rel., last board
    // Distance to the closed-form prices, filled after convergence whenever
    // the closed form applies un-clamped and in-regime.
    double closed_form_max_rel = std::numeric_limits<double>::quiet_NaN();
    std::optional<CellRef> divergence_cell;
    // Diagnostic: smallest margin, over every update step taken, by which the
    // chosen denominator exceeded the tight positivity bound (G - sum_d)/p.
    // That bound cannot be used as the schedule itself (it depends on private
    // budgets), but traced runs can verify the chosen one clears it.
    double min_epsilon_slack = std::numeric_limits<double>::infinity();
};

enum class UpdateOrder {
    sequential,   // one cell at a time in (company, period) order, demands
                  // refreshed after every applied change — the literal reading
    synchronous,  // whole board updates against one demand snapshot per round
                  // (cheaper; NOT the literal protocol)
};

struct RunOptions {
    double delta = 0.0;
    double tol = 1e-8;
    int max_rounds = 10000;
    UpdateOrder order = UpdateOrder::sequential;
    double initial_price = 1.0;
    bool record_messages = true;
    bool record_rounds = true;
    // Negative delta breaks the convergence guarantee and is only meaningful
    // to demonstrate divergence; require an explicit opt-in.
    bool divergence_demo = false;
};

namespace detail {

inline double raw_demand(const ConsumerAgent& c, const PriceSchedule& board, int k, int t) {
    double S = board.sum();
    double KT = static_cast<double>(board.K) * board.T;
    return (c.budget_B + c.zeta * S) / (KT * board.at(k, t)) - c.zeta;
}

inline bool price_sane(double p) {
    return p > 0.0 && std::isfinite(p) && std::abs(p) <= 1e12;
}

}  // namespace detail

/// Runs the distributed price computation on an in-process message bus.
///
/// Round structure (sequential order): consumers report demands for the
/// current board; companies visit their cells in (k,t) order; every applied
/// update is broadcast and consumers re-report before the next cell is
/// visited.  A round in which every cell reports no-change terminates the
/// run.  Synchronous order reuses one demand snapshot for the whole round.
///
/// Divergence (price <= 0, non-finite, or magnitude above 1e12) and the
/// round cap are reported in the trace outcome, not thrown.
inline IterationTrace run_algorithm1(const Scenario& s, const RunOptions& opt) {
    require_valid(s);
    if (!(opt.tol > 0.0)) throw DomainError("tol must be > 0");
    if (opt.max_rounds < 1) throw DomainError("max_rounds must be >= 1");
    if (opt.delta < 0.0 && !opt.divergence_demo)
        throw DomainError("negative delta requires divergence_demo mode");

    const int N = s.N(), K = s.K(), T = s.periods_T;

    std::vector<CompanyAgent> companies;
    companies.reserve(static_cast<std::size_t>(K));
    for (int k = 0; k < K; ++k) {
        CompanyAgent a;
        a.index = k;
        a.id = s.companies[k].id;
        a.capacity_G = s.companies[k].capacity_G;
        a.prices.assign(static_cast<std::size_t>(T), opt.initial_price);
        a.observed_demand.assign(static_cast<std::size_t>(T), 0.0);
        a.population_N = N;
        a.delta = opt.delta;
        a.tol = opt.tol;
        companies.push_back(std::move(a));
    }
    std::vector<ConsumerAgent> consumers;
    consumers.reserve(static_cast<std::size_t>(N));
    for (int n = 0; n < N; ++n) {
        ConsumerAgent a;
        a.index = n;
        a.id = s.consumers[n].id;
        a.budget_B = s.consumers[n].budget_B;
        a.energy_min_E = s.consumers[n].energy_min_E;
        a.gamma = s.consumers[n].gamma;
        a.zeta = s.consumers[n].zeta;
        a.board = PriceSchedule(K, T, opt.initial_price);
        consumers.push_back(std::move(a));
    }

    IterationTrace trace;
    PriceSchedule board(K, T, opt.initial_price);
    KTGrid agg(K, T);

    auto report_demands = [&](int round) {
        for (int k = 0; k < K; ++k)
            for (int t = 0; t < T; ++t) agg.at(k, t) = 0.0;
        for (auto& c : consumers) {
            c.board = board;
            for (int k = 0; k < K; ++k)
                for (int t = 0; t < T; ++t) {
                    double d = detail::raw_demand(c, c.board, k, t);
                    agg.at(k, t) += d;
                    if (opt.record_messages)
                        trace.message_log.push_back({round,
                                                     {AgentKind::consumer, c.index},
                                                     {AgentKind::company, k},
                                                     PayloadKind::demand_report,
                                                     k,
                                                     t,
                                                     d});
                }
        }
        for (int k = 0; k < K; ++k)
            for (int t = 0; t < T; ++t)
                companies[static_cast<std::size_t>(k)].observed_demand[static_cast<std::size_t>(t)] =
                    agg.at(k, t);
    };

    const AgentRef all_consumers{AgentKind::consumer, -1};
    bool done = false;
    // In sequential order consumers re-report right after each applied change,
    // so the next round's board is already covered; only re-report at a round
    // boundary when the snapshot went stale (first round, synchronous rounds).
    bool agg_fresh = false;

    for (int round = 1; round <= opt.max_rounds && !done; ++round) {
        PriceSchedule before = board;
        if (!agg_fresh) report_demands(round);
        agg_fresh = true;
        bool any_change = false;

        for (int k = 0; k < K && !done; ++k) {
            auto& agent = companies[static_cast<std::size_t>(k)];
            for (int t = 0; t < T && !done; ++t) {
                {
                    double p_cur = agent.prices[static_cast<std::size_t>(t)];
                    double eps = epsilon_schedule(agent, t, p_cur);
                    double tight =
                        (agent.capacity_G[static_cast<std::size_t>(t)] - agg.at(k, t)) / p_cur;
                    trace.min_epsilon_slack = std::min(trace.min_epsilon_slack, eps - tight);
                }
                PriceUpdateResult up = price_update(agent, t, agg.at(k, t));
                if (!up.changed) {
                    if (opt.record_messages)
                        trace.message_log.push_back({round,
                                                     {AgentKind::company, k},
                                                     all_consumers,
                                                     PayloadKind::no_change,
                                                     k,
                                                     t,
                                                     up.new_price});
                    continue;
                }
                any_change = true;
                agent.prices[static_cast<std::size_t>(t)] = up.new_price;
                board.at(k, t) = up.new_price;
                if (opt.record_messages)
                    trace.message_log.push_back({round,
                                                 {AgentKind::company, k},
                                                 all_consumers,
                                                 PayloadKind::price_update,
                                                 k,
                                                 t,
                                                 up.new_price});
                if (!detail::price_sane(up.new_price)) {
                    trace.outcome = RunOutcome::diverged;
                    trace.final_round = round;
                    trace.divergence_cell = CellRef{k, t};
                    done = true;
                    break;
                }
                if (opt.order == UpdateOrder::sequential)
                    report_demands(round);
                else
                    agg_fresh = false;
            }
        }

        if (opt.record_rounds) {
            RoundRecord rec;
            rec.round = round;
            rec.prices = board;
            rec.aggregate_demand = agg;
            rec.price_delta = KTGrid(K, T);
            for (int i = 0; i < K * T; ++i) rec.price_delta.v[i] = board.v[i] - before.v[i];
            trace.rounds.push_back(std::move(rec));
        }

        if (!done && !any_change) {
            trace.outcome = RunOutcome::converged;
            trace.final_round = round;
            done = true;
        }
    }

    if (!done) {
        trace.outcome = RunOutcome::cap_exceeded;
        trace.final_round = opt.max_rounds;
    }
    trace.final_prices = board;

    double res = 0.0;
    for (int k = 0; k < K; ++k)
        for (int t = 0; t < T; ++t) {
            double g = s.companies[k].capacity_G[t];
            res = std::max(res, std::abs(agg.at(k, t) - g) / std::max(1.0, std::abs(g)));
        }
    trace.max_residual = res;

    if (trace.outcome == RunOutcome::converged && s.aggregate_B() > 0.0) {
        PriceSchedule star = equilibrium_prices_closed_form(s);
        // The closed form only claims the equilibrium when no bound clamping
        // or negative-demand regime would kick in; skip the cross-check there.
        bool applies = clamp_prices(star, s.companies).clamped_cells.empty();
        if (applies) {
            double S = star.sum();
            double KT = static_cast<double>(K) * T;
            for (const auto& c : s.consumers)
                for (double p : star.v)
                    if ((c.budget_B + c.zeta * S) / (KT * p) - c.zeta < 0.0) applies = false;
        }
        if (applies) {
            double m = 0.0;
            for (int i = 0; i < K * T; ++i)
                m = std::max(m, std::abs(board.v[i] - star.v[i]) / std::max(1.0, std::abs(star.v[i])));
            trace.closed_form_max_rel = m;
            if (m > 10.0 * opt.tol)
                throw std::logic_error(
                    "converged prices disagree with the closed form beyond 10*tol");
        }
    }
    return trace;
}

inline IterationTrace run_algorithm1(const Scenario& s, double delta, double tol, int max_rounds,
                                     UpdateOrder order = UpdateOrder::sequential) {
    RunOptions opt;
    opt.delta = delta;
    opt.tol = tol;
    opt.max_rounds = max_rounds;
    opt.order = order;
    opt.divergence_demo = delta < 0.0;  // an explicitly negative delta is the demo
    return run_algorithm1(s, opt);
}

// --- audit ----------------------------------------------------------------

struct AuditReport {
    bool pass = true;
    std::vector<std::size_t> offending_messages;  // indices into the log
    std::size_t price_updates = 0;
    std::size_t demand_reports = 0;
    std::size_t no_changes = 0;
    std::string note;
};

/// Verifies type discipline over the message log: only price updates, demand
/// reports and no-change markers may appear, senders must match the payload
/// direction, and disclosure payloads (the typed representation of a leak)
/// fail the audit.  Agent structs carry no fields for rival capacities or
/// budgets, so locality of state holds by construction; the audit re-checks
/// what actually went over the wire.
inline AuditReport privacy_audit(const IterationTrace& trace, const Scenario& s) {
    AuditReport rep;
    const int K = s.K(), N = s.N();
    for (std::size_t i = 0; i < trace.message_log.size(); ++i) {
        const Message& m = trace.message_log[i];
        bool ok = true;
        switch (m.kind) {
            case PayloadKind::demand_report:
                ++rep.demand_reports;
                ok = m.sender.kind == AgentKind::consumer && m.sender.index >= 0 &&
                     m.sender.index < N && m.receiver.kind == AgentKind::company &&
                     m.receiver.index >= 0 && m.receiver.index < K;
                break;
            case PayloadKind::price_update:
                ++rep.price_updates;
                ok = m.sender.kind == AgentKind::company && m.sender.index >= 0 &&
                     m.sender.index < K && m.receiver.kind == AgentKind::consumer;
                break;
            case PayloadKind::no_change:
                ++rep.no_changes;
                ok = m.sender.kind == AgentKind::company;
                break;
            default:
                ok = false;  // budget/capacity disclosure or unknown kind
                break;
        }
        if (!ok) {
            rep.pass = false;
            rep.offending_messages.push_back(i);
        }
    }
    rep.note = rep.pass ? "message log restricted to prices, demands and no-change markers"
                        : "log contains out-of-protocol payloads";
    return rep;
}

}  // namespace drgame
