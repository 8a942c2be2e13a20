#pragma once

#include <filesystem>
#include <iostream>
#include <set>
#include <string>

#include "riskstop/bellman.hpp"
#include "riskstop/builtin_models.hpp"
#include "riskstop/closed_form.hpp"
#include "riskstop/config.hpp"
#include "riskstop/diagnostics.hpp"
#include "riskstop/pdmp.hpp"
#include "riskstop/policy.hpp"
#include "riskstop/report.hpp"

namespace riskstop::cli {

namespace fs = std::filesystem;

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 1;
inline constexpr int kExitNumeric = 2;
inline constexpr int kExitDivergent = 3;

// ---------------------------------------------------------------------------
// Model resolution
// ---------------------------------------------------------------------------

struct ResolvedModel {
    MarkovModel model; // discrete model; for the pdmp family, the embedding
    std::optional<PdmpParams> pdmp;
    std::string family;
};

inline ResolvedModel resolve_model(const Config& cfg) {
    const std::string family = cfg.get_string("model", "family", "");
    if (family.empty()) throw ConfigError("model.family is required");
    ResolvedModel out;
    out.family = family;
    if (family == "ex3") {
        out.model = reset_climb_model(cfg.require_double("model", "alpha"),
                                      cfg.require_double("model", "c"));
    } else if (family == "ex1") {
        out.model = iid_pareto_model(cfg.require_double("model", "c"),
                                     cfg.get_long("model", "atom_max", 64));
    } else if (family == "pdmp") {
        PdmpParams p(cfg.require_double("model", "lambda"),
                     cfg.require_double("model", "d"),
                     cfg.require_double("model", "alpha"));
        out.pdmp = p;
        out.model = embed(p);
    } else if (family == "custom-atoms") {
        const auto rows_text = cfg.get_all("model", "row");
        if (rows_text.empty()) throw ConfigError("custom-atoms model needs row entries");
        std::map<State, KernelRow> rows;
        for (const std::string& line : rows_text) {
            // row syntax: <state> : <state>=<prob>, <state>=<prob>, ...
            const auto colon = line.find(':');
            if (colon == std::string::npos)
                throw ConfigError("row needs '<state> : <state>=<p>, ...'");
            const State from = State::decode(Config::trim(line.substr(0, colon)));
            KernelRow row;
            std::string_view rest = std::string_view(line).substr(colon + 1);
            while (!rest.empty()) {
                const auto comma = rest.find(',');
                std::string_view item = Config::trim(rest.substr(0, comma));
                if (!item.empty()) {
                    const auto eq = item.find('=');
                    if (eq == std::string_view::npos)
                        throw ConfigError("row atom needs <state>=<prob>");
                    const State to = State::decode(Config::trim(item.substr(0, eq)));
                    const std::string prob(Config::trim(item.substr(eq + 1)));
                    double pval = 0.0;
                    auto [p, ec] = std::from_chars(prob.data(), prob.data() + prob.size(), pval);
                    if (ec != std::errc{} || p != prob.data() + prob.size())
                        throw ConfigError("bad probability '" + prob + "'");
                    row.atoms.emplace_back(to, pval);
                }
                if (comma == std::string_view::npos) break;
                rest = rest.substr(comma + 1);
            }
            rows[from] = std::move(row);
        }
        const double g_const = cfg.require_double("model", "g");
        const std::string G_spec = cfg.get_string("model", "G", "coord");
        std::function<double(const State&)> G;
        TerminalGrowth growth;
        if (G_spec == "coord") {
            G = [](const State& s) { return s.coord(); };
            growth = TerminalGrowth::linear_coordinate;
        } else {
            const double G_const = cfg.require_double("model", "G");
            G = [G_const](const State&) { return G_const; };
            growth = TerminalGrowth::bounded;
        }
        out.model = atoms_model(std::move(rows), [g_const](const State&) { return g_const; },
                                std::move(G), cfg.get_double("model", "c_lower", g_const),
                                cfg.get_double("model", "g_upper", g_const), growth);
    } else {
        throw ConfigError("unknown model family '" + family + "'");
    }
    return out;
}

inline IterateOptions resolve_iterate_options(const Config& cfg) {
    IterateOptions opt;
    opt.tol = cfg.get_double("numeric", "tol", 1e-8);
    opt.max_iter = int(cfg.get_long("numeric", "max_iter", 500));
    opt.window_depth = int(cfg.get_long("numeric", "window_depth", 64));
    return opt;
}

inline State resolve_x0(const Config& cfg) {
    return State(cfg.require_double("numeric", "x0"));
}

inline std::uint64_t require_seed(const Config& cfg) {
    auto v = cfg.get("numeric", "seed");
    if (!v) throw ConfigError("numeric.seed is required for stochastic commands");
    return std::uint64_t(cfg.get_long("numeric", "seed", 0));
}

/// Policy selection: hitting-u (default), hitting-w, or stop-set:<coords>.
inline StoppingPolicy resolve_policy(const Config& cfg, const ResolvedModel& rm,
                                     const State& x0) {
    const std::string spec = cfg.get_string("numeric", "policy", "hitting-u");
    const IterateOptions opt = resolve_iterate_options(cfg);
    if (spec == "hitting-u")
        return hitting_policy(rm.model, iterate_from_below(rm.model, x0, opt).final_fn);
    if (spec == "hitting-w")
        return hitting_policy(rm.model, iterate_from_above(rm.model, x0, opt).final_fn);
    if (spec.rfind("stop-set:", 0) == 0) {
        std::set<double> coords;
        std::string_view rest = std::string_view(spec).substr(9);
        while (!rest.empty()) {
            const auto comma = rest.find(',');
            const std::string item(Config::trim(rest.substr(0, comma)));
            if (!item.empty()) coords.insert(State::decode(item).coord());
            if (comma == std::string_view::npos) break;
            rest = rest.substr(comma + 1);
        }
        double top = 64.0;
        for (double c : coords) top = std::max(top, c + 1.0);
        std::vector<State> grid;
        std::vector<double> vals;
        for (long k = 0; k <= long(top); ++k) {
            const State s{double(k)};
            grid.push_back(s);
            vals.push_back(coords.count(s.coord()) ? rm.model.G(s) : 0.0);
        }
        return hitting_policy(rm.model, LogValueFn(x0, grid, vals, Closure::zero, 0.0));
    }
    throw ConfigError("unknown policy '" + spec + "'");
}

// ---------------------------------------------------------------------------
// Shared report pieces
// ---------------------------------------------------------------------------

inline void meta_section(ReportWriter& rep, const Config& cfg, const std::string& command) {
    rep.section("meta");
    rep.kv("command", command);
    rep.kv("config_hash", cfg.hash());
    rep.kv("seed", cfg.get_string("numeric", "seed", "none"));
}

inline void model_section(ReportWriter& rep, const Config& cfg, const ResolvedModel& rm) {
    rep.section("model");
    rep.kv("family", rm.family);
    for (const char* key : {"alpha", "c", "lambda", "d"})
        if (auto v = cfg.get("model", key)) rep.kv(key, *v);
    if (rm.pdmp) rep.kv("c_embed", rm.pdmp->c_embed());
}

inline void run_section(ReportWriter& rep, const std::string& name, const BellmanRun& run) {
    rep.section(name);
    rep.kv("converged", run.converged);
    rep.kv("iterations", long(run.iteration_count));
    rep.kv("value_at_x0", run.value_at_base());
    rep.kv("final_residual", run.final_residual());
    rep.kv("tol", run.tol);
}

inline void run_csv(const fs::path& path, const BellmanRun& run) {
    // per-iteration rows at the base point, then the final iterate across
    // the window (see docs/csv-schema.md)
    CsvWriter csv({"iteration", "state", "value", "residual"});
    for (std::size_t k = 0; k < run.base_trace.size(); ++k)
        csv.row({std::to_string(k), run.base.encode(), format_number(run.base_trace[k]),
                 format_number(k == 0 ? kInf : run.residuals[k - 1])});
    const MarkovModel& m = *run.model;
    for (const State& s : run.window_states)
        csv.row({std::to_string(run.iteration_count), s.encode(),
                 format_number(run.final_fn.value_at(m, s)),
                 format_number(run.final_residual())});
    csv.write(path);
}

inline void mc_section(ReportWriter& rep, const std::string& name, const McEstimate& est) {
    rep.section(name);
    rep.kv("log_mean", est.log_mean);
    rep.kv("ci_low", est.ci_low);
    rep.kv("ci_high", est.ci_high);
    rep.kv("n_traj", est.n_traj);
    rep.kv("n_censored", est.n_censored);
    rep.kv("seed", long(est.seed));
}

// ---------------------------------------------------------------------------
// Commands
// ---------------------------------------------------------------------------

inline int cmd_solve(const Config& cfg, const fs::path& out) {
    ResolvedModel rm = resolve_model(cfg);
    const State x0 = resolve_x0(cfg);
    const IterateOptions opt = resolve_iterate_options(cfg);

    BellmanRun u = iterate_from_below(rm.model, x0, opt);
    BellmanRun w = iterate_from_above(rm.model, x0, opt);
    GapReport gaps = gap_report(u, w, u.window_states, cfg.get_double("numeric", "gap_tol", 1e-6));

    ReportWriter rep;
    meta_section(rep, cfg, "solve");
    model_section(rep, cfg, rm);
    rep.section("assumptions");
    {
        std::vector<State> probes = u.window_states;
        if (probes.size() > 64) probes.resize(64);
        auto vr = validate_costs(rm.model, probes);
        rep.kv("a1_probes", long(probes.size()));
        rep.kv("a1_violations", long(vr.issues.size()));
        rep.kv("a2_a3", std::string("not checked (path-supremum integrability; "
                                    "analytic hypotheses outside desk scale)"));
    }
    run_section(rep, "u", u);
    run_section(rep, "w", w);
    rep.section("gap");
    rep.kv("verdict", std::string(gaps.unique_solution() ? "unique-solution" : "non-unique"));
    rep.kv("flagged_states", long(gaps.entries.size()));
    rep.kv("threshold", gaps.threshold);
    double max_gap = 0.0;
    for (const auto& e : gaps.entries) max_gap = std::max(max_gap, e.gap);
    rep.kv("max_gap", max_gap);
    rep.write(out / "report.txt");

    run_csv(out / "u_run.csv", u);
    run_csv(out / "w_run.csv", w);
    CsvWriter values({"state", "u", "w", "gap"});
    for (const State& s : u.window_states) {
        if (!w.final_fn.covers(s)) continue;
        const double uv = u.final_fn.value_at(rm.model, s);
        const double wv = w.final_fn.value_at(rm.model, s);
        values.row({s.encode(), format_number(uv), format_number(wv), format_number(wv - uv)});
    }
    values.write(out / "values.csv");
    return u.converged && w.converged ? kExitOk : kExitNumeric;
}

inline int cmd_simulate(const Config& cfg, const fs::path& out) {
    ResolvedModel rm = resolve_model(cfg);
    const State x0 = resolve_x0(cfg);
    const std::uint64_t seed = require_seed(cfg);
    const long n_traj = cfg.get_long("numeric", "n_traj", 100000);
    StoppingPolicy policy = resolve_policy(cfg, rm, x0);
    const bool want_traces = cfg.get_string("output", "traces", "false") == "true";

    ReportWriter rep;
    meta_section(rep, cfg, "simulate");
    model_section(rep, cfg, rm);

    McEstimate est;
    if (rm.pdmp) {
        est = simulate_and_evaluate(*rm.pdmp, x0, policy, n_traj,
                                    cfg.get_double("numeric", "t_cap", 10000.0), seed);
        if (want_traces) {
            CsvWriter traces({"traj_id", "step", "state", "action", "running_cost"});
            const long limit = std::min<long>(n_traj, 100);
            for (long i = 0; i < limit; ++i) {
                RngStream rng(seed, std::uint64_t(i));
                auto tr = simulate_trajectory(*rm.pdmp, x0,
                                              cfg.get_double("numeric", "t_cap", 10000.0), rng);
                for (std::size_t j = 0; j < tr.states.size(); ++j) {
                    const double t = j == 0 ? 0.0 : tr.jump_times[j - 1];
                    const bool stop = policy.decision(rm.model, tr.states[j], int(j));
                    traces.row({std::to_string(i), std::to_string(j), tr.states[j].encode(),
                                stop ? "stop" : "continue", format_number(rm.pdmp->d * t)});
                    if (stop) break;
                }
            }
            traces.write(out / "traces.csv");
        }
    } else {
        std::vector<TraceRow> trace_rows;
        est = evaluate_policy_mc(rm.model, policy, x0, n_traj,
                                 cfg.get_long("numeric", "horizon_cap", 10000), seed,
                                 want_traces ? &trace_rows : nullptr);
        if (want_traces) {
            CsvWriter traces({"traj_id", "step", "state", "action", "running_cost"});
            for (const TraceRow& r : trace_rows)
                traces.row({std::to_string(r.traj_id), std::to_string(r.step),
                            r.state.encode(), r.stopped ? "stop" : "continue",
                            format_number(r.running_cost)});
            traces.write(out / "traces.csv");
        }
    }
    mc_section(rep, "mc", est);
    rep.write(out / "report.txt");
    return kExitOk;
}

inline int cmd_diagnose(const Config& cfg, const fs::path& out) {
    ResolvedModel rm = resolve_model(cfg);
    const State x0 = resolve_x0(cfg);
    const std::string method_s = cfg.get_string("numeric", "method", "auto");
    UiMethod method = method_s == "analytic" ? UiMethod::analytic
                      : method_s == "mc"     ? UiMethod::monte_carlo
                                             : UiMethod::automatic;
    UiOptions uopt;
    uopt.tol = cfg.get_double("numeric", "ui_tol", 1e-8);
    if (method == UiMethod::monte_carlo || cfg.get("numeric", "seed")) {
        if (method == UiMethod::monte_carlo) uopt.seed = require_seed(cfg);
        else uopt.seed = std::uint64_t(cfg.get_long("numeric", "seed", 1));
        uopt.n_traj = cfg.get_long("numeric", "n_traj", 100000);
    }

    std::vector<long> T_grid;
    for (double t : cfg.get_list("numeric", "T_grid")) T_grid.push_back(long(t));
    if (T_grid.empty()) T_grid = {1, 2, 4, 8, 16, 32, 64};

    StoppingPolicy policy = resolve_policy(cfg, rm, x0);
    UiProfile prof = ui_profile(rm.model, policy, x0, T_grid, method, uopt);

    ReportWriter rep;
    meta_section(rep, cfg, "diagnose");
    model_section(rep, cfg, rm);
    rep.section("ui");
    rep.kv("mode", std::string(prof.mode == UiMethod::analytic ? "analytic" : "monte-carlo"));
    const char* verdict = prof.verdict == UiVerdict::vanishing       ? "vanishing"
                          : prof.verdict == UiVerdict::non_vanishing ? "non-vanishing"
                          : prof.verdict == UiVerdict::divergent     ? "divergent"
                                                                     : "inconclusive";
    rep.kv("verdict", std::string(verdict));
    if (prof.growth_rate) rep.kv("growth_rate", *prof.growth_rate);
    if (rm.model.reset_climb) {
        rep.section("regime");
        const auto r = regime_classifier(rm.model.reset_climb->alpha, rm.model.reset_climb->c);
        rep.kv("classification", std::string(r == Ex3Regime::stop_now ? "stop-now"
                                             : r == Ex3Regime::gap    ? "gap"
                                                                      : "wait"));
    }
    rep.write(out / "report.txt");

    CsvWriter csv({"T", "log_value"});
    for (std::size_t i = 0; i < prof.T_grid.size(); ++i)
        csv.row({std::to_string(prof.T_grid[i]), format_number(prof.values[i])});
    csv.write(out / "ui.csv");
    return kExitOk;
}

inline int cmd_dyadic(const Config& cfg, const fs::path& out) {
    ResolvedModel rm = resolve_model(cfg);
    if (!rm.pdmp) throw ConfigError("dyadic requires the pdmp model family");
    const State x0 = resolve_x0(cfg);

    std::vector<double> T_grid = cfg.get_list("numeric", "T_grid");
    if (T_grid.empty()) T_grid = {cfg.get_double("numeric", "T", 30.0)};
    std::vector<double> m_list = cfg.get_list("numeric", "m_grid");
    if (m_list.empty()) m_list = {double(cfg.get_long("numeric", "m", 8))};

    DyadicOptions dopt;
    dopt.k_max = cfg.get_long("numeric", "k_max", 12);
    dopt.accuracy = cfg.get_double("numeric", "accuracy", kInf);

    ReportWriter rep;
    meta_section(rep, cfg, "dyadic");
    model_section(rep, cfg, rm);
    CsvWriter csv({"T", "m", "delta", "value", "budget"});
    rep.section("dyadic");
    rep.kv("k_max", dopt.k_max);
    for (double T : T_grid) {
        for (double md : m_list) {
            const int m = int(md);
            DyadicResult r = dyadic_finite_horizon(*rm.pdmp, x0, T, m, dopt);
            csv.row({format_number(T), std::to_string(m), format_number(r.delta),
                     format_number(r.value), format_number(r.budget)});
        }
    }
    csv.write(out / "dyadic.csv");
    rep.write(out / "report.txt");
    return kExitOk;
}

// ---------------------------------------------------------------------------
// Example reproductions
// ---------------------------------------------------------------------------

namespace detail {

struct CheckTable {
    CsvWriter csv{{"check", "computed", "expected", "tolerance", "status"}};
    int failures = 0;
    int total = 0;

    void check(const std::string& name, double computed, double expected, double tol) {
        const bool ok = std::abs(computed - expected) <= tol ||
                        (computed == expected); // covers matching infinities
        csv.row({name, format_number(computed), format_number(expected),
                 format_number(tol), ok ? "pass" : "fail"});
        ++total;
        if (!ok) ++failures;
    }
    void check_true(const std::string& name, bool ok) {
        csv.row({name, ok ? "true" : "false", "true", "0", ok ? "pass" : "fail"});
        ++total;
        if (!ok) ++failures;
    }
};

inline void example_ex3(const Config& cfg, CheckTable& t) {
    Ex3Params p(cfg.get_double("model", "alpha", 0.5), cfg.get_double("model", "c", 0.5));
    auto m = reset_climb_model(p.alpha, p.c);
    const auto regime = p.regime();

    std::vector<State> grid;
    for (int k = 0; k <= 10; ++k) grid.push_back(State(double(k)));
    auto u_exact = make_value_fn(m, State(5.0), grid, [&](const State& s) {
        return ex3_values(p, s.coord()).first;
    });
    auto w_exact = make_value_fn(m, State(5.0), grid, [&](const State& s) {
        return ex3_values(p, s.coord()).second;
    });
    t.check("residual_u_closed_form", residual(m, u_exact, grid), 0.0, 1e-12);
    t.check("residual_w_closed_form", residual(m, w_exact, grid), 0.0, 1e-12);

    for (double x : {0.0, 2.0, 5.0, 10.0}) {
        auto below = iterate_from_below(m, State(x));
        auto above = iterate_from_above(m, State(x));
        const auto [ue, we] = ex3_values(p, x);
        t.check("u_at_" + format_number(x), below.value_at_base(), ue, 1e-6);
        t.check("w_at_" + format_number(x), above.value_at_base(), we, 1e-6);
    }
    if (regime == Ex3Regime::gap) {
        auto urun = iterate_from_below(m, State(5.0));
        auto wrun = iterate_from_above(m, State(5.0));
        auto cand = make_value_fn(m, State(5.0), grid, [&](const State& s) {
            return ex3_discontinuous_solution(p, s.coord());
        });
        t.check("residual_discontinuous_solution", residual(m, cand, grid), 0.0, 1e-12);
        auto sw = verify_sandwich(urun, wrun, cand, grid);
        t.check_true("discontinuous_solution_in_sandwich", sw.zero_violations());
        auto gaps = gap_report(urun, wrun, grid, 1e-6);
        t.check_true("gap_verdict_non_unique", !gaps.unique_solution());
    }
}

inline void example_ex1(const Config& cfg, CheckTable& t) {
    Ex1Params p(cfg.get_double("model", "c", 0.5));
    auto m = iid_pareto_model(p.c);
    const double lnB = std::log(p.B());
    const double blim = ex1_b_limit(p);

    auto above = iterate_from_above(m, State(10.0));
    bool all_G = true;
    for (double v : above.base_trace) all_G = all_G && v == 10.0;
    t.check_true("from_above_stays_at_G", all_G);

    auto below = iterate_from_below(m, State(10.0));
    t.check("u_at_10", below.value_at_base(), std::min(10.0, blim), 1e-8);
    t.check_true("u_below_lnB", below.value_at_base() <= lnB + 1e-10);
    t.check("b_limit_under_lnB_gap", std::max(0.0, blim - lnB), 0.0, 1e-12);

    LogValueFn vG(State(10.0), {}, {}, Closure::terminal_cost);
    t.check_true("certified_infinite_expectation",
                 log_mgf(m, State(10.0), vG) == kInf);
}

inline void example_ex5(const Config& cfg, CheckTable& t) {
    PdmpParams p(cfg.get_double("model", "lambda", 2.0), cfg.get_double("model", "d", 1.0),
                 cfg.get_double("model", "alpha", 0.9));
    const std::uint64_t seed = std::uint64_t(cfg.get_long("numeric", "seed", 1));
    auto m = embed(p);
    t.check("c_embed", p.c_embed(), std::log(p.lambda) - std::log(p.lambda - p.d), 0.0);

    auto run = iterate_from_below(m, State(5.0));
    const Ex3Params emb(p.alpha, p.c_embed());
    const double expect = std::min(5.0, emb.K());
    t.check("embedded_u_at_5", run.value_at_base(), expect, 1e-6);

    auto pol = hitting_policy(m, run.final_fn);
    auto est = simulate_and_evaluate(p, State(5.0), pol, cfg.get_long("numeric", "n_traj", 100000),
                                     cfg.get_double("numeric", "t_cap", 10000.0), seed);
    t.check_true("mc_brackets_closed_form",
                 est.ci_low <= expect && expect <= est.ci_high);

    DyadicOptions dopt;
    dopt.k_max = cfg.get_long("numeric", "k_max", 40);
    auto c6 = dyadic_finite_horizon(p, State(5.0), 10.0, 6, dopt);
    auto c8 = dyadic_finite_horizon(p, State(5.0), 10.0, 8, dopt);
    t.check_true("dyadic_decreases_in_m",
                 c6.value >= c8.value - c6.budget - c8.budget - 1e-9);
    t.check_true("dyadic_above_u", c8.value >= expect - c8.budget - 1e-9);
}

} // namespace detail

inline int cmd_example(const Config& cfg, const fs::path& out) {
    const std::string which = cfg.get_string("model", "family", "");
    detail::CheckTable t;
    if (which == "ex3")
        detail::example_ex3(cfg, t);
    else if (which == "ex1")
        detail::example_ex1(cfg, t);
    else if (which == "ex5" || which == "pdmp")
        detail::example_ex5(cfg, t);
    else
        throw ConfigError("example expects family ex1, ex3 or ex5");

    ReportWriter rep;
    meta_section(rep, cfg, "example");
    rep.section("example");
    rep.kv("which", which);
    rep.kv("checks", long(t.total));
    rep.kv("failures", long(t.failures));
    rep.kv("status", std::string(t.failures == 0 ? "pass" : "fail"));
    rep.write(out / "report.txt");
    t.csv.write(out / "checks.csv");
    return t.failures == 0 ? kExitOk : kExitNumeric;
}

// ---------------------------------------------------------------------------
// Entry point
// ---------------------------------------------------------------------------

inline int run(const std::string& command, Config cfg) {
    try {
        const fs::path out = cfg.get_string("output", "directory", "out");
        fs::create_directories(out);
        if (command == "solve") return cmd_solve(cfg, out);
        if (command == "simulate") return cmd_simulate(cfg, out);
        if (command == "diagnose") return cmd_diagnose(cfg, out);
        if (command == "example") return cmd_example(cfg, out);
        if (command == "dyadic") return cmd_dyadic(cfg, out);
        throw ConfigError("unknown command '" + command + "'");
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const InvalidParams& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const DivergentTarget& e) {
        std::cerr << "refused: " << e.what() << '\n';
        return kExitDivergent;
    } catch (const std::exception& e) {
        std::cerr << "numeric failure: " << e.what() << '\n';
        return kExitNumeric;
    }
}

} // namespace riskstop::cli
