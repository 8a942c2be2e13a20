// Command-line front end: parse flags and a config file into the shared
// key-value configuration, then dispatch.
#include <CLI11.hpp>

#include <fstream>
#include <sstream>

#include "riskstop/cli.hpp"

namespace {

struct CommonFlags {
    std::string config_path;
    std::string out_dir;
    std::string family;
    std::string policy;
    std::string method;
    // numeric overrides; NaN / LONG_MIN mean "not set"
    double alpha = NAN, c = NAN, lambda = NAN, d = NAN, x0 = NAN, tol = NAN;
    double T = NAN, t_cap = NAN;
    long max_iter = LONG_MIN, n_traj = LONG_MIN, horizon_cap = LONG_MIN;
    long seed = LONG_MIN, m = LONG_MIN, k_max = LONG_MIN;
    std::string T_grid;
    bool traces = false;
};

void add_common(CLI::App* cmd, CommonFlags& f) {
    cmd->add_option("--config", f.config_path, "configuration file");
    cmd->add_option("--out", f.out_dir, "output directory");
    cmd->add_option("--seed", f.seed, "rng seed");
    cmd->add_option("--alpha", f.alpha, "reset probability");
    cmd->add_option("--c", f.c, "running cost per step");
    cmd->add_option("--lambda", f.lambda, "jump intensity");
    cmd->add_option("--d", f.d, "running cost rate");
    cmd->add_option("--x0", f.x0, "initial state coordinate");
    cmd->add_option("--tol", f.tol, "iteration tolerance");
    cmd->add_option("--max-iter", f.max_iter, "iteration cap");
    cmd->add_option("--n-traj", f.n_traj, "trajectory count");
    cmd->add_option("--horizon-cap", f.horizon_cap, "censoring horizon (steps)");
    cmd->add_option("--t-cap", f.t_cap, "censoring horizon (continuous time)");
    cmd->add_option("--T-grid", f.T_grid, "comma-separated horizon grid");
    cmd->add_option("--T", f.T, "dyadic horizon");
    cmd->add_option("--m", f.m, "dyadic grid exponent");
    cmd->add_option("--k-max", f.k_max, "poisson truncation order");
    cmd->add_option("--policy", f.policy, "hitting-u | hitting-w | stop-set:a,b");
    cmd->add_option("--method", f.method, "diagnose method: auto | analytic | mc");
    cmd->add_flag("--traces", f.traces, "write rollout traces");
}

riskstop::Config build_config(const CommonFlags& f, const std::string& positional_family) {
    riskstop::Config cfg;
    if (!f.config_path.empty()) {
        std::ifstream in(f.config_path, std::ios::binary);
        if (!in) throw riskstop::ConfigError("cannot read " + f.config_path);
        std::ostringstream ss;
        ss << in.rdbuf();
        cfg = riskstop::Config::parse(ss.str());
    }
    auto setd = [&](const char* sec, const char* key, double v) {
        if (!std::isnan(v)) cfg.set(sec, key, riskstop::format_number(v));
    };
    auto setl = [&](const char* sec, const char* key, long v) {
        if (v != LONG_MIN) cfg.set(sec, key, std::to_string(v));
    };
    if (!positional_family.empty()) cfg.set("model", "family", positional_family);
    if (!f.family.empty()) cfg.set("model", "family", f.family);
    setd("model", "alpha", f.alpha);
    setd("model", "c", f.c);
    setd("model", "lambda", f.lambda);
    setd("model", "d", f.d);
    setd("numeric", "x0", f.x0);
    setd("numeric", "tol", f.tol);
    setd("numeric", "T", f.T);
    setd("numeric", "t_cap", f.t_cap);
    setl("numeric", "max_iter", f.max_iter);
    setl("numeric", "n_traj", f.n_traj);
    setl("numeric", "horizon_cap", f.horizon_cap);
    setl("numeric", "seed", f.seed);
    setl("numeric", "m", f.m);
    setl("numeric", "k_max", f.k_max);
    if (!f.T_grid.empty()) cfg.set("numeric", "T_grid", f.T_grid);
    if (!f.policy.empty()) cfg.set("numeric", "policy", f.policy);
    if (!f.method.empty()) cfg.set("numeric", "method", f.method);
    if (f.traces) cfg.set("output", "traces", "true");
    if (!f.out_dir.empty()) cfg.set("output", "directory", f.out_dir);
    return cfg;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"risk-sensitive optimal stopping solver"};
    app.require_subcommand(1);

    std::map<std::string, CommonFlags> flags;
    std::map<std::string, std::string> families;
    for (const char* name : {"solve", "simulate", "diagnose", "example", "dyadic"}) {
        CLI::App* cmd = app.add_subcommand(name);
        add_common(cmd, flags[name]);
        cmd->add_option("family", families[name],
                        "model family (ex1 | ex3 | pdmp | custom-atoms)");
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : riskstop::cli::kExitConfig;
    }

    const std::string command = app.get_subcommands().front()->get_name();
    try {
        riskstop::Config cfg = build_config(flags[command], families[command]);
        return riskstop::cli::run(command, std::move(cfg));
    } catch (const std::exception& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return riskstop::cli::kExitConfig;
    }
}
