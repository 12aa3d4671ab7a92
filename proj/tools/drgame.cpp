// Command-line front end: solve/allocate/iterate/sweep/casestudy/validate.
//
// Exit codes: 0 success, 2 validation failure, 3 divergence or round-cap,
// 4 parse error.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"

#include "drgame/drgame.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 2;
constexpr int kExitDivergence = 3;
constexpr int kExitParse = 4;

void write_or_print(const std::optional<std::string>& out_dir, const char* name,
                    const std::string& payload) {
    if (out_dir) {
        std::filesystem::create_directories(*out_dir);
        std::ofstream f(std::filesystem::path(*out_dir) / name, std::ios::binary);
        f << payload;
    } else {
        std::cout << payload;
    }
}

int cmd_validate(const std::string& path) {
    drgame::Scenario s = drgame::load_scenario(path);
    auto vs = drgame::validate_scenario(s);
    std::cout << drgame::violations_to_json(vs).dump(2) << "\n";
    return drgame::has_errors(vs) ? kExitValidation : kExitOk;
}

int cmd_solve(const std::string& path, const std::optional<std::string>& out_dir) {
    drgame::Scenario s = drgame::load_scenario(path);
    auto outcome = drgame::stackelberg_equilibrium(s);
    write_or_print(out_dir, "equilibrium.json",
                   drgame::outcome_to_json(outcome, s).dump(2) + "\n");
    return kExitOk;
}

int cmd_allocate(const std::string& path, const std::optional<std::string>& out_dir) {
    drgame::Scenario s = drgame::load_scenario(path);
    auto profile = drgame::allocation_nash_equilibrium(s);
    write_or_print(out_dir, "allocation.json",
                   drgame::allocation_to_json(profile, s).dump(2) + "\n");
    return kExitOk;
}

int cmd_iterate(const std::string& path, double delta, double tol, int max_rounds,
                const std::string& order, unsigned seed,
                const std::optional<std::string>& out_dir) {
    drgame::Scenario s = drgame::load_scenario(path);
    drgame::RunOptions opt;
    opt.delta = delta;
    opt.tol = tol;
    opt.max_rounds = max_rounds;
    opt.order = order == "synchronous" ? drgame::UpdateOrder::synchronous
                                       : drgame::UpdateOrder::sequential;
    opt.divergence_demo = delta < 0.0;  // explicit negative delta = divergence demo
    auto trace = drgame::run_algorithm1(s, opt);

    drgame::json summary = drgame::trace_summary_json(trace);
    summary["seed"] = seed;  // recorded for provenance; the run is deterministic
    if (out_dir) {
        std::filesystem::create_directories(*out_dir);
        std::ofstream f(std::filesystem::path(*out_dir) / "trace.jsonl", std::ios::binary);
        drgame::write_trace_jsonl(trace, f);
        std::ofstream g(std::filesystem::path(*out_dir) / "summary.json", std::ios::binary);
        g << summary.dump(2) << "\n";
    } else {
        std::cout << summary.dump(2) << "\n";
    }
    auto audit = drgame::privacy_audit(trace, s);
    if (!audit.pass) {
        std::cerr << "privacy audit FAILED: " << audit.note << "\n";
        return kExitValidation;
    }
    return trace.outcome == drgame::RunOutcome::converged ? kExitOk : kExitDivergence;
}

int cmd_sweep(const std::string& axis, int K, int N, double g_total, double budget, int t_fixed,
              int from, int to, const std::optional<std::string>& out_dir) {
    drgame::SymmetricSpec spec;
    spec.K = K;
    spec.N = N;
    spec.G_total = g_total;
    spec.budget_each = budget;
    std::vector<int> values;
    for (int v = from; v <= to; ++v) values.push_back(v);

    drgame::RegimeSweepResult res;
    if (axis == "periods")
        res = drgame::sweep_periods(spec, values);
    else if (axis == "population")
        res = drgame::sweep_population(spec, t_fixed, values);
    else
        throw drgame::DomainError("--axis must be periods or population");

    std::ostringstream csv;
    drgame::write_sweep_csv(res, csv);
    if (out_dir) {
        std::filesystem::create_directories(*out_dir);
        std::ofstream f(std::filesystem::path(*out_dir) / "sweep.csv", std::ios::binary);
        f << csv.str();
        std::ofstream g(std::filesystem::path(*out_dir) / "limits.json", std::ios::binary);
        g << drgame::sweep_limits_json(res).dump(2) << "\n";
    } else {
        std::cout << csv.str();
        std::cout << drgame::sweep_limits_json(res).dump(2) << "\n";
    }
    return kExitOk;
}

int cmd_casestudy(const std::string& path, const std::string& out_dir,
                  std::optional<double> tol, std::optional<double> delta) {
    drgame::CaseConfig cfg = drgame::load_case_config(path);
    if (cfg.distributed) {
        if (tol) cfg.distributed->tol = *tol;
        if (delta) cfg.distributed->delta = *delta;
    }
    drgame::CaseStudyResult res = drgame::run_case_study(cfg);
    drgame::write_case_bundle(res, out_dir);
    std::cout << "wrote bundle to " << out_dir << " (savings "
              << res.savings.savings_fraction << ")\n";
    if (res.trace && res.trace->outcome != drgame::RunOutcome::converged) return kExitDivergence;
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"multi-period demand-response game toolkit"};
    app.require_subcommand(1);

    std::string scenario_path, config_path, axis = "periods", order = "sequential";
    std::optional<std::string> out_dir;
    std::string case_out = "case_out";
    double delta = 0.0, tol = 1e-8;
    int max_rounds = 10000;
    unsigned seed = 0;
    int sw_k = 1, sw_n = 1, sw_t = 1, sw_from = 1, sw_to = 64;
    double sw_g = 10.0, sw_b = 1.0;
    std::optional<double> cs_tol, cs_delta;

    auto* validate = app.add_subcommand("validate", "check a scenario file");
    validate->add_option("scenario", scenario_path, "scenario JSON")->required();

    auto* solve = app.add_subcommand("solve", "closed-form equilibrium of a scenario");
    solve->add_option("scenario", scenario_path, "scenario JSON")->required();
    solve->add_option("--out", out_dir, "output directory (default: stdout)");

    auto* allocate = app.add_subcommand("allocate", "power-allocation equilibrium");
    allocate->add_option("scenario", scenario_path, "scenario JSON")->required();
    allocate->add_option("--out", out_dir, "output directory (default: stdout)");

    auto* iterate = app.add_subcommand("iterate", "distributed price iteration");
    iterate->add_option("scenario", scenario_path, "scenario JSON")->required();
    iterate->add_option("--delta", delta, "step-size offset (negative = divergence demo)");
    iterate->add_option("--tol", tol, "no-change threshold (relative)");
    iterate->add_option("--max-rounds", max_rounds, "round cap");
    iterate->add_option("--order", order, "sequential|synchronous")
        ->check(CLI::IsMember({"sequential", "synchronous"}));
    iterate->add_option("--seed", seed, "recorded in the summary");
    iterate->add_option("--out", out_dir, "write trace.jsonl + summary.json here");

    auto* sweep = app.add_subcommand("sweep", "symmetric-regime sweep");
    sweep->add_option("--axis", axis, "periods|population")
        ->check(CLI::IsMember({"periods", "population"}));
    sweep->add_option("--companies", sw_k, "K");
    sweep->add_option("--consumers", sw_n, "N (periods axis)");
    sweep->add_option("--g-total", sw_g, "per-company horizon energy");
    sweep->add_option("--budget", sw_b, "per-consumer budget");
    sweep->add_option("--t-fixed", sw_t, "T (population axis)");
    sweep->add_option("--from", sw_from, "first axis value");
    sweep->add_option("--to", sw_to, "last axis value");
    sweep->add_option("--out", out_dir, "write sweep.csv + limits.json here");

    auto* casestudy = app.add_subcommand("casestudy", "run a case-study config");
    casestudy->add_option("config", config_path, "case config JSON")->required();
    casestudy->add_option("--out", case_out, "bundle directory");
    casestudy->add_option("--tol", cs_tol, "override distributed tol");
    casestudy->add_option("--delta", cs_delta, "override distributed delta");

    CLI11_PARSE(app, argc, argv);

    try {
        if (validate->parsed()) return cmd_validate(scenario_path);
        if (solve->parsed()) return cmd_solve(scenario_path, out_dir);
        if (allocate->parsed()) return cmd_allocate(scenario_path, out_dir);
        if (iterate->parsed())
            return cmd_iterate(scenario_path, delta, tol, max_rounds, order, seed, out_dir);
        if (sweep->parsed())
            return cmd_sweep(axis, sw_k, sw_n, sw_g, sw_b, sw_t, sw_from, sw_to, out_dir);
        if (casestudy->parsed()) return cmd_casestudy(config_path, case_out, cs_tol, cs_delta);
    } catch (const drgame::ParseError& e) {
        std::cerr << "parse error: " << e.what() << "\n";
        return kExitParse;
    } catch (const drgame::UnitError& e) {
        std::cerr << "unit error: " << e.what() << "\n";
        return kExitParse;
    } catch (const drgame::DomainError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return 1;
    }
    return kExitOk;
}
