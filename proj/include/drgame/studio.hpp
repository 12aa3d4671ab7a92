#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "drgame/allocation.hpp"
#include "drgame/distributed.hpp"
#include "drgame/equilibrium.hpp"
#include "drgame/errors.hpp"
#include "drgame/model.hpp"
#include "drgame/serialize.hpp"

namespace drgame {

// --- experimental series ---------------------------------------------------

struct ExperimentSeries {
    int periods_T = 0;
    std::vector<double> experimental_prices;  // currency per kWh
    std::vector<double> experimental_load;    // kWh per period (aggregate)
    std::string currency_label;               // e.g. "DKK", taken from the header
    int population_N = 0;
};

namespace detail {

inline std::string lower(std::string s) {
    for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return s;
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream ss(line);
    while (std::getline(ss, cell, ',')) {
        while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.pop_back();
        std::size_t b = cell.find_first_not_of(' ');
        out.push_back(b == std::string::npos ? "" : cell.substr(b));
    }
    return out;
}

inline double parse_double(const std::string& s, std::size_t line_no, const std::string& what) {
    try {
        std::size_t used = 0;
        double v = std::stod(s, &used);
        if (used != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw ParseError("cannot parse " + what + " value '" + s + "'", line_no);
    }
}

}  // namespace detail

/// Reads an hourly price/load CSV.  Expected columns (any order):
///   hour (or period), price_<currency>_per_<kwh|mwh>, load_<kwh|mwh>.
/// MWh quantities and per-MWh prices are converted to the kWh system on the
/// way in; a price or load column that does not declare its unit is refused.
inline ExperimentSeries load_case_data(const std::string& path, int population_N) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open " + path);

    std::string line;
    if (!std::getline(in, line)) throw ParseError(path + " is empty");
    auto headers = detail::split_csv_line(line);

    int hour_col = -1, price_col = -1, load_col = -1;
    double price_scale = 1.0, load_scale = 1.0;
    std::string currency;
    for (std::size_t i = 0; i < headers.size(); ++i) {
        std::string h = detail::lower(headers[i]);
        if (h == "hour" || h == "period") {
            hour_col = static_cast<int>(i);
        } else if (h.rfind("price", 0) == 0) {
            // price_<currency>_per_<unit>
            std::size_t p1 = h.find('_');
            std::size_t p2 = h.find("_per_");
            if (p1 == std::string::npos || p2 == std::string::npos || p2 <= p1)
                throw UnitError("price column '" + headers[i] +
                                "' must be of the form price_<currency>_per_<kwh|mwh>");
            currency = h.substr(p1 + 1, p2 - p1 - 1);
            std::string unit = h.substr(p2 + 5);
            if (unit == "kwh")
                price_scale = 1.0;
            else if (unit == "mwh")
                price_scale = 1e-3;
            else
                throw UnitError("unknown price unit '" + unit + "' in column '" + headers[i] + "'");
            price_col = static_cast<int>(i);
        } else if (h.rfind("load", 0) == 0) {
            std::size_t p1 = h.find('_');
            if (p1 == std::string::npos)
                throw UnitError("load column '" + headers[i] + "' must declare kwh or mwh");
            std::string unit = h.substr(p1 + 1);
            if (unit == "kwh")
                load_scale = 1.0;
            else if (unit == "mwh")
                load_scale = 1e3;
            else
                throw UnitError("unknown load unit '" + unit + "' in column '" + headers[i] + "'");
            load_col = static_cast<int>(i);
        }
    }
    if (price_col < 0 || load_col < 0)
        throw ParseError(path + ": need price_<currency>_per_<unit> and load_<unit> columns");

    ExperimentSeries series;
    for (char& c : currency) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    series.currency_label = currency;
    series.population_N = population_N;

    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line == "\r") continue;
        auto cells = detail::split_csv_line(line);
        std::size_t need = static_cast<std::size_t>(std::max(price_col, load_col)) + 1;
        if (cells.size() < need) throw ParseError("row has too few columns", line_no);
        double price = detail::parse_double(cells[static_cast<std::size_t>(price_col)], line_no,
                                            "price") * price_scale;
        double load = detail::parse_double(cells[static_cast<std::size_t>(load_col)], line_no,
                                           "load") * load_scale;
        if (!(price > 0.0)) throw ParseError("price must be strictly positive", line_no);
        if (load < 0.0) throw ParseError("load must be non-negative", line_no);
        series.experimental_prices.push_back(price);
        series.experimental_load.push_back(load);
    }
    (void)hour_col;
    series.periods_T = static_cast<int>(series.experimental_prices.size());
    if (series.periods_T < 1) throw ParseError(path + " contains no data rows");
    return series;
}

// --- scenario derivation ---------------------------------------------------

struct BudgetClass {
    int count = 0;
    double budget = 0.0;
};

/// Either "derive every budget as the billing-minimizing minimum at the
/// experimental prices" or an explicit list of budget classes.
struct BudgetSpec {
    bool minimum = true;
    std::vector<BudgetClass> classes;

    static BudgetSpec from_minimum() { return {}; }
    static BudgetSpec from_classes(std::vector<BudgetClass> cs) { return {false, std::move(cs)}; }
};

enum class CapacityShape {
    load_shaped,  // G_k(t) proportional to the experimental load in hour t
    uniform,      // G_k(t) = share_k * total / T (the allocation-game split)
};

/// Builds a playable scenario from the measured day:
///   capacities  G_k(t) = share_k * load(t)   (or the uniform split),
///   energy need E_min  = total load / N      (homogeneous),
///   budgets     minimum_budget at the experimental prices replicated across
///               the K companies, or the given explicit classes.
inline Scenario derive_scenario_from_experiment(const ExperimentSeries& series,
                                               const std::vector<double>& company_shares,
                                               const BudgetSpec& budgets,
                                               CapacityShape shape = CapacityShape::load_shaped) {
    const int T = series.periods_T;
    const int N = series.population_N;
    if (N < 1) throw CountMismatch("population must be >= 1");

    double share_sum = 0.0;
    for (double s : company_shares) {
        if (s < 0.0) throw ShareSumError("company shares must be non-negative");
        share_sum += s;
    }
    if (std::abs(share_sum - 1.0) > 1e-9)
        throw ShareSumError("company shares must sum to 1 (got " + std::to_string(share_sum) + ")");

    double total_load = 0.0;
    for (double l : series.experimental_load) total_load += l;

    Scenario s;
    s.periods_T = T;
    const int K = static_cast<int>(company_shares.size());
    for (int k = 0; k < K; ++k) {
        Company c;
        c.id = "co" + std::to_string(k + 1);
        c.capacity_G.resize(static_cast<std::size_t>(T));
        for (int t = 0; t < T; ++t)
            c.capacity_G[static_cast<std::size_t>(t)] =
                shape == CapacityShape::load_shaped
                    ? company_shares[static_cast<std::size_t>(k)] *
                          series.experimental_load[static_cast<std::size_t>(t)]
                    : company_shares[static_cast<std::size_t>(k)] * total_load / T;
        c.total_capacity_G_total = company_shares[static_cast<std::size_t>(k)] * total_load;
        c.price_min.assign(static_cast<std::size_t>(T), 1e-9);
        c.price_max.assign(static_cast<std::size_t>(T), 1e9);
        s.companies.push_back(std::move(c));
    }

    const double e_min = total_load / N;
    Consumer proto;
    proto.energy_min_E = e_min;

    std::vector<double> budgets_by_consumer;
    if (budgets.minimum) {
        // The budget derivation needs a full K x T price board; the measured
        // prices are replicated across companies as the minimal completion.
        PriceSchedule board(K, T);
        for (int k = 0; k < K; ++k)
            for (int t = 0; t < T; ++t)
                board.at(k, t) = series.experimental_prices[static_cast<std::size_t>(t)];
        double b = minimum_budget(proto, board);
        budgets_by_consumer.assign(static_cast<std::size_t>(N), b);
    } else {
        int total_count = 0;
        for (const auto& c : budgets.classes) total_count += c.count;
        if (total_count != N)
            throw CountMismatch("budget class counts sum to " + std::to_string(total_count) +
                                ", expected " + std::to_string(N));
        for (const auto& c : budgets.classes)
            budgets_by_consumer.insert(budgets_by_consumer.end(), static_cast<std::size_t>(c.count),
                                       c.budget);
    }

    for (int n = 0; n < N; ++n) {
        Consumer c = proto;
        c.id = "c" + std::to_string(n + 1);
        c.budget_B = budgets_by_consumer[static_cast<std::size_t>(n)];
        s.consumers.push_back(std::move(c));
    }
    return s;
}

// --- savings ---------------------------------------------------------------

struct SavingsReport {
    double experimental_billing = 0.0;  // aggregate, currency
    double game_billing = 0.0;          // = sum of budgets (payments bind)
    double savings_fraction = 0.0;      // 1 - game/experimental
    std::vector<double> cumulative_experimental;  // per period, aggregate
    std::vector<double> cumulative_game;
};

/// Compares what the population paid under the measured tariff with what it
/// pays at the game equilibrium for the same total energy.
inline SavingsReport billing_savings_report(const ExperimentSeries& series,
                                            const EquilibriumOutcome& outcome) {
    SavingsReport r;
    double cum = 0.0;
    for (int t = 0; t < series.periods_T; ++t) {
        cum += series.experimental_prices[static_cast<std::size_t>(t)] *
               series.experimental_load[static_cast<std::size_t>(t)];
        r.cumulative_experimental.push_back(cum);
    }
    r.experimental_billing = cum;

    cum = 0.0;
    for (int t = 0; t < outcome.prices.T; ++t) {
        for (int k = 0; k < outcome.prices.K; ++k)
            cum += outcome.prices.at(k, t) * outcome.demands.aggregate(k, t);
        r.cumulative_game.push_back(cum);
    }
    r.game_billing = cum;
    r.savings_fraction = 1.0 - r.game_billing / r.experimental_billing;
    return r;
}

// --- case-study pipeline ---------------------------------------------------

struct DistributedSpec {
    double delta = 0.0;
    double tol = 1e-8;
    int max_rounds = 10000;
    UpdateOrder order = UpdateOrder::sequential;
    // Run the iteration on the day-aggregate single-period reduction of the
    // scenario (capacities summed over the horizon).  Keeps traces at a size
    // fit for an artifact while exercising the same population.
    bool day_aggregate = false;
};

struct CaseConfig {
    std::string name;
    std::string data_path;  // resolved against the config file's directory
    int population = 0;
    std::vector<double> shares{1.0};
    BudgetSpec budgets;
    CapacityShape capacity_shape = CapacityShape::load_shaped;
    std::optional<DistributedSpec> distributed;
    std::vector<int> sweep_T;
};

inline CaseConfig load_case_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ParseError(path + ": " + e.what());
    }
    try {
        CaseConfig cfg;
        cfg.name = j.value("name", "case");
        cfg.data_path =
            (std::filesystem::path(path).parent_path() / j.at("data").get<std::string>()).string();
        cfg.population = j.at("population").get<int>();
        if (j.contains("shares")) cfg.shares = j.at("shares").get<std::vector<double>>();
        if (j.contains("budgets")) {
            const auto& b = j.at("budgets");
            if (b.is_string()) {
                if (b.get<std::string>() != "minimum")
                    throw ParseError("budgets must be \"minimum\" or {classes:[...]}");
                cfg.budgets = BudgetSpec::from_minimum();
            } else {
                std::vector<BudgetClass> classes;
                for (const auto& cj : b.at("classes"))
                    classes.push_back({cj.at("count").get<int>(), cj.at("budget").get<double>()});
                cfg.budgets = BudgetSpec::from_classes(std::move(classes));
            }
        }
        if (j.value("capacity_shape", "load") == "uniform")
            cfg.capacity_shape = CapacityShape::uniform;
        if (j.contains("distributed")) {
            const auto& d = j.at("distributed");
            DistributedSpec ds;
            ds.delta = d.value("delta", 0.0);
            ds.tol = d.value("tol", 1e-8);
            ds.max_rounds = d.value("max_rounds", 10000);
            ds.order = d.value("order", "sequential") == std::string("synchronous")
                           ? UpdateOrder::synchronous
                           : UpdateOrder::sequential;
            ds.day_aggregate = d.value("day_aggregate", false);
            cfg.distributed = ds;
        }
        if (j.contains("sweep_T")) {
            const auto& sw = j.at("sweep_T");
            if (sw.is_array()) {
                cfg.sweep_T = sw.get<std::vector<int>>();
            } else {
                int from = sw.at("from").get<int>(), to = sw.at("to").get<int>();
                for (int t = from; t <= to; ++t) cfg.sweep_T.push_back(t);
            }
        }
        return cfg;
    } catch (const json::exception& e) {
        throw ParseError(path + ": " + e.what());
    }
}

/// Per-T row of the horizon sweep run on the derived population: company
/// revenues and the mean utility within each budget class.
struct CaseSweepRow {
    int T = 0;
    std::vector<double> company_revenues;
    std::vector<double> class_mean_utilities;
};

struct CaseStudyResult {
    CaseConfig config;
    ExperimentSeries series;
    Scenario scenario;
    EquilibriumOutcome outcome;
    SavingsReport savings;
    std::optional<IterationTrace> trace;
    std::optional<Scenario> trace_scenario;  // what the iteration actually ran on
    std::vector<CaseSweepRow> sweep_rows;
    std::vector<int> class_offsets;  // consumer index where each class starts
};

namespace detail {

template <typename Fn>
auto stage(const char* name, Fn&& fn) {
    try {
        return fn();
    } catch (const ParseError& e) {
        throw ParseError(std::string(name) + ": " + e.what());
    } catch (const UnitError& e) {
        throw UnitError(std::string(name) + ": " + e.what());
    } catch (const DomainError& e) {
        throw DomainError(std::string(name) + ": " + e.what());
    }
}

}  // namespace detail

inline CaseStudyResult run_case_study(const CaseConfig& cfg) {
    CaseStudyResult r;
    r.config = cfg;
    r.series = detail::stage("load",
                             [&] { return load_case_data(cfg.data_path, cfg.population); });
    r.scenario = detail::stage("derive", [&] {
        return derive_scenario_from_experiment(r.series, cfg.shares, cfg.budgets,
                                               cfg.capacity_shape);
    });
    r.outcome = detail::stage("equilibrium", [&] { return stackelberg_equilibrium(r.scenario); });
    r.savings =
        detail::stage("savings", [&] { return billing_savings_report(r.series, r.outcome); });

    if (!cfg.budgets.minimum) {
        int off = 0;
        for (const auto& c : cfg.budgets.classes) {
            r.class_offsets.push_back(off);
            off += c.count;
        }
    } else {
        r.class_offsets.push_back(0);
    }

    if (cfg.distributed) {
        detail::stage("distributed", [&] {
            Scenario target = r.scenario;
            if (cfg.distributed->day_aggregate) {
                target.periods_T = 1;
                for (auto& co : target.companies) {
                    double total = 0.0;
                    for (double g : co.capacity_G) total += g;
                    co.capacity_G = {total};
                    co.price_min = {co.price_min.front()};
                    co.price_max = {co.price_max.front()};
                }
            }
            RunOptions opt;
            opt.delta = cfg.distributed->delta;
            opt.tol = cfg.distributed->tol;
            opt.max_rounds = cfg.distributed->max_rounds;
            opt.order = cfg.distributed->order;
            opt.divergence_demo = cfg.distributed->delta < 0.0;
            r.trace = run_algorithm1(target, opt);
            r.trace_scenario = std::move(target);
            return 0;
        });
    }

    if (!cfg.sweep_T.empty()) {
        detail::stage("sweep", [&] {
            for (int T : cfg.sweep_T) {
                // Same population and budgets as the base case; capacities are
                // each company's horizon total spread uniformly over T periods
                // (the allocation-game equilibrium split).
                Scenario st;
                st.periods_T = T;
                st.consumers = r.scenario.consumers;
                for (const auto& co : r.scenario.companies) {
                    Company c;
                    c.id = co.id;
                    c.capacity_G.assign(static_cast<std::size_t>(T),
                                        co.total_capacity_G_total / T);
                    c.total_capacity_G_total = co.total_capacity_G_total;
                    c.price_min.assign(static_cast<std::size_t>(T), 1e-9);
                    c.price_max.assign(static_cast<std::size_t>(T), 1e9);
                    st.companies.push_back(std::move(c));
                }
                EquilibriumOutcome out = stackelberg_equilibrium(st);
                CaseSweepRow row;
                row.T = T;
                row.company_revenues = out.revenues;
                if (!cfg.budgets.minimum) {
                    for (std::size_t ci = 0; ci < cfg.budgets.classes.size(); ++ci) {
                        int start = r.class_offsets[ci];
                        int count = cfg.budgets.classes[ci].count;
                        double acc = 0.0;
                        for (int n = start; n < start + count; ++n)
                            acc += out.consumer_utilities[static_cast<std::size_t>(n)];
                        row.class_mean_utilities.push_back(acc / count);
                    }
                } else {
                    double acc = 0.0;
                    for (double u : out.consumer_utilities) acc += u;
                    row.class_mean_utilities.push_back(acc / st.N());
                }
                r.sweep_rows.push_back(std::move(row));
            }
            return 0;
        });
    }
    return r;
}

// --- bundle ----------------------------------------------------------------

inline void write_case_bundle(const CaseStudyResult& r, const std::string& out_dir) {
    namespace fs = std::filesystem;
    fs::create_directories(out_dir);
    auto open = [&](const char* name) {
        std::ofstream f(fs::path(out_dir) / name, std::ios::binary);
        if (!f) throw DomainError(std::string("cannot write ") + name + " in " + out_dir);
        return f;
    };

    {
        auto f = open("equilibrium.json");
        f << outcome_to_json(r.outcome, r.scenario).dump(2) << '\n';
    }
    {
        json j;
        j["case"] = r.config.name;
        j["currency"] = r.series.currency_label;
        j["population"] = r.series.population_N;
        j["experimental_billing"] = r.savings.experimental_billing;
        j["game_billing"] = r.savings.game_billing;
        j["savings_fraction"] = r.savings.savings_fraction;
        j["budget_per_consumer"] =
            r.scenario.consumers.empty() ? 0.0 : r.scenario.consumers.front().budget_B;
        auto f = open("savings.json");
        f << j.dump(2) << '\n';
    }
    {
        auto f = open("series.csv");
        f << "period,experimental_price,experimental_load,experimental_payment,"
             "experimental_cumulative,game_payment,game_cumulative,game_mean_price,"
             "game_total_demand\n";
        for (int t = 0; t < r.series.periods_T; ++t) {
            double ep = r.series.experimental_prices[static_cast<std::size_t>(t)];
            double el = r.series.experimental_load[static_cast<std::size_t>(t)];
            double gpay = 0.0, gdem = 0.0, gpr = 0.0;
            for (int k = 0; k < r.outcome.prices.K; ++k) {
                double agg = r.outcome.demands.aggregate(k, t);
                gpay += r.outcome.prices.at(k, t) * agg;
                gdem += agg;
                gpr += r.outcome.prices.at(k, t);
            }
            gpr /= r.outcome.prices.K;
            f << (t + 1) << ',' << detail::fmt_double(ep) << ',' << detail::fmt_double(el) << ','
              << detail::fmt_double(ep * el) << ','
              << detail::fmt_double(r.savings.cumulative_experimental[static_cast<std::size_t>(t)])
              << ',' << detail::fmt_double(gpay) << ','
              << detail::fmt_double(r.savings.cumulative_game[static_cast<std::size_t>(t)]) << ','
              << detail::fmt_double(gpr) << ',' << detail::fmt_double(gdem) << '\n';
        }
    }
    if (r.trace) {
        {
            auto f = open("trace.jsonl");
            write_trace_jsonl(*r.trace, f);
        }
        auto f = open("trace_summary.json");
        f << trace_summary_json(*r.trace).dump(2) << '\n';
    }
    if (!r.sweep_rows.empty()) {
        auto f = open("sweep.csv");
        f << "T";
        for (const auto& co : r.scenario.companies) f << ",revenue_" << co.id;
        for (std::size_t ci = 0; ci < r.sweep_rows.front().class_mean_utilities.size(); ++ci)
            f << ",utility_class_" << (ci + 1);
        f << '\n';
        for (const auto& row : r.sweep_rows) {
            f << row.T;
            for (double v : row.company_revenues) f << ',' << detail::fmt_double(v);
            for (double v : row.class_mean_utilities) f << ',' << detail::fmt_double(v);
            f << '\n';
        }
    }
}

}  // namespace drgame
