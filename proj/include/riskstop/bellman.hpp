#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "riskstop/model.hpp"
#include "riskstop/value_fn.hpp"

namespace riskstop {

/// Tie width in min(G, continuation): the stopping branch wins within this,
/// matching the ">=" convention of hitting-time definitions.
inline constexpr double kStopTieTol = 1e-14;

inline double stop_or_continue(double stop, double cont) {
    return (stop <= cont + kStopTieTol) ? stop : cont;
}

// ---------------------------------------------------------------------------
// One application of the Bellman operator (log domain)
// ---------------------------------------------------------------------------

/// v'(x) = min(G(x), g(x) + ln E_x[e^{v(X_1)}]) on the evaluation set.
/// Output is capped by G pointwise; closure is inherited from v. On
/// uniform-kernel models with constant running cost the output carries the
/// exact tail cap g + ln E[e^v].
inline LogValueFn apply_bellman(const MarkovModel& model, const LogValueFn& v,
                                std::vector<State> eval_set) {
    std::sort(eval_set.begin(), eval_set.end());
    eval_set.erase(std::unique(eval_set.begin(), eval_set.end()), eval_set.end());
    if (eval_set.empty()) throw InvalidParams("apply_bellman: empty evaluation set");

    std::optional<double> out_cap;
    std::optional<double> shared_mgf;
    if (model.uniform_kernel) {
        shared_mgf = log_mgf(model, eval_set.front(), v);
        if (model.costs.lower_bound == model.costs.upper_bound &&
            std::isfinite(*shared_mgf))
            out_cap = model.costs.lower_bound + *shared_mgf;
    }

    std::vector<double> vals;
    vals.reserve(eval_set.size());
    for (const State& x : eval_set) {
        const double mgf = shared_mgf ? *shared_mgf : log_mgf(model, x, v);
        vals.push_back(stop_or_continue(model.G(x), model.g(x) + mgf));
    }
    return LogValueFn(v.base(), std::move(eval_set), std::move(vals), v.closure(), out_cap);
}

/// Fixed-point defect: sup over the evaluation set of |v - ln S e^v|.
/// Zero exactly when v solves the Bellman equation there.
inline double residual(const MarkovModel& model, const LogValueFn& v,
                       const std::vector<State>& eval_set) {
    double worst = 0.0;
    for (const State& x : eval_set) {
        const double applied =
            stop_or_continue(model.G(x), model.g(x) + log_mgf(model, x, v));
        worst = std::max(worst, std::abs(v.value_at(model, x) - applied));
    }
    return worst;
}

// ---------------------------------------------------------------------------
// Monotone value iteration
// ---------------------------------------------------------------------------

enum class Direction { from_below, from_above };

struct IterateOptions {
    double tol = 1e-8;
    int max_iter = 500;
    /// Convergence is tested on the states reachable within depth
    /// min(iteration, window_depth); pointwise monotone limits can stall at
    /// far states, the window keeps the test finite.
    int window_depth = 64;
    /// Sup-change must stay under tol for this many consecutive iterations.
    int consecutive = 3;
    /// Retain every iterate (needed for finite-horizon policy tables).
    bool keep_iterates = false;
    /// Run all max_iter iterations even after convergence.
    bool stop_early = true;
};

struct BellmanRun {
    Direction direction = Direction::from_below;
    double tol = 0.0;
    bool converged = false;
    int iteration_count = 0;
    std::vector<double> residuals;   // residuals[k-1]: sup-change of iteration k on the window
    std::vector<double> base_trace;  // base_trace[k]: k-th iterate at the base point
    std::vector<LogValueFn> iterates; // filled iff keep_iterates
    LogValueFn final_fn;
    std::vector<State> window_states;
    std::vector<int> convergence_depth; // last iteration whose change exceeded tol
    State base;
    std::string model_family;
    const MarkovModel* model = nullptr;

    double value_at_base() const { return base_trace.back(); }
    double final_residual() const { return residuals.empty() ? 0.0 : residuals.back(); }
    /// Slack for comparisons against this run's limit.
    double slack() const { return tol + final_residual(); }
};

namespace detail {

struct Successor {
    double logp;
    long idx;     // index into the support, or -1 when outside
    double fixed; // closure value contribution when outside the support
};

/// Iteration engine for models whose reachable set is enumerable. The
/// support covers every state reachable within max_iter steps, so the n-th
/// iterate at the base point is exact: paths of length n never leave it.
inline BellmanRun iterate_enumerable(const MarkovModel& model, const State& x0,
                                     Direction dir, const IterateOptions& opt) {
    const ReachableSet reach = reachable(model, x0, opt.max_iter);
    const std::size_t n = reach.states.size();
    const Closure closure =
        dir == Direction::from_below ? Closure::zero : Closure::terminal_cost;

    std::vector<double> Gv(n), gv(n);
    for (std::size_t i = 0; i < n; ++i) {
        Gv[i] = model.G(reach.states[i]);
        gv[i] = model.g(reach.states[i]);
    }

    std::vector<std::vector<Successor>> succ(n);
    for (std::size_t i = 0; i < n; ++i) {
        KernelRow row = model.kernel(reach.states[i]);
        if (row.tail)
            throw InvalidParams("enumerable iteration requires pure-atom kernel rows");
        for (const auto& [y, p] : row.atoms) {
            if (p <= 0.0) continue;
            auto it = std::lower_bound(reach.states.begin(), reach.states.end(), y);
            if (it != reach.states.end() && *it == y)
                succ[i].push_back({std::log(p), it - reach.states.begin(), 0.0});
            else
                succ[i].push_back({std::log(p), -1,
                                   closure == Closure::zero ? 0.0 : model.G(y)});
        }
    }

    const std::size_t base_idx =
        std::size_t(std::lower_bound(reach.states.begin(), reach.states.end(), x0) -
                    reach.states.begin());

    BellmanRun run;
    run.direction = dir;
    run.tol = opt.tol;
    run.base = x0;
    run.model_family = model.family;
    run.model = &model;

    std::vector<double> cur(n), next(n);
    for (std::size_t i = 0; i < n; ++i)
        cur[i] = dir == Direction::from_below ? 0.0 : Gv[i];
    std::vector<int> last_change(n, 0);

    auto snapshot = [&](const std::vector<double>& vals) {
        return LogValueFn(x0, reach.states, vals, closure);
    };
    run.base_trace.push_back(cur[base_idx]);
    if (opt.keep_iterates) run.iterates.push_back(snapshot(cur));

    int streak = 0;
    for (int k = 1; k <= opt.max_iter; ++k) {
        for (std::size_t i = 0; i < n; ++i) {
            double m = kNegInf;
            for (const Successor& s : succ[i])
                m = std::max(m, s.logp + (s.idx >= 0 ? cur[std::size_t(s.idx)] : s.fixed));
            double sum = 0.0;
            for (const Successor& s : succ[i])
                sum += std::exp(s.logp + (s.idx >= 0 ? cur[std::size_t(s.idx)] : s.fixed) - m);
            next[i] = stop_or_continue(Gv[i], gv[i] + m + std::log(sum));
        }
        const int wd = std::min(k, opt.window_depth);
        double res = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double change = std::abs(next[i] - cur[i]);
            if (change > opt.tol) last_change[i] = k;
            if (reach.depth[i] <= wd) res = std::max(res, change);
        }
        cur.swap(next);
        run.residuals.push_back(res);
        run.base_trace.push_back(cur[base_idx]);
        if (opt.keep_iterates) run.iterates.push_back(snapshot(cur));
        run.iteration_count = k;
        streak = res <= opt.tol ? streak + 1 : 0;
        if (streak >= opt.consecutive) {
            run.converged = true;
            if (opt.stop_early) break;
        }
    }

    run.final_fn = snapshot(cur);
    const int wd = std::min(run.iteration_count, opt.window_depth);
    for (std::size_t i = 0; i < n; ++i) {
        if (reach.depth[i] <= wd) {
            run.window_states.push_back(reach.states[i]);
            run.convergence_depth.push_back(last_change[i]);
        }
    }
    return run;
}

/// Iteration engine for uniform-kernel (i.i.d.) models with constant running
/// cost. Every iterate has the shape min(G, constant) outside the integer
/// window, carried exactly by the tail cap, so iterates at the base point
/// are exact at every depth despite the infinite support.
inline BellmanRun iterate_uniform(const MarkovModel& model, const State& x0,
                                  Direction dir, const IterateOptions& opt) {
    if (model.costs.lower_bound != model.costs.upper_bound)
        throw InvalidParams("uniform-kernel iteration requires constant running cost");
    const double g = model.costs.lower_bound;
    const Closure closure =
        dir == Direction::from_below ? Closure::zero : Closure::terminal_cost;

    KernelRow row = model.kernel(x0);
    double atom_top = 1.0;
    for (const auto& [y, p] : row.atoms) atom_top = std::max(atom_top, y.coord());

    auto build_grid = [&](long top) {
        std::vector<State> grid;
        for (long k = 1; k <= top; ++k) grid.push_back(State(double(k)));
        if (x0.coord() != std::floor(x0.coord()) || x0.coord() > double(top) ||
            x0.coord() < 1.0)
            grid.push_back(x0);
        std::sort(grid.begin(), grid.end());
        return grid;
    };
    long top = std::lround(std::max(std::ceil(x0.coord()), atom_top));
    std::vector<State> grid = build_grid(top);

    auto initial = [&](const State& s) {
        return dir == Direction::from_below ? 0.0 : model.G(s);
    };
    std::vector<double> cur;
    for (const State& s : grid) cur.push_back(initial(s));
    std::optional<double> cap =
        dir == Direction::from_below ? std::optional<double>(0.0) : std::nullopt;

    BellmanRun run;
    run.direction = dir;
    run.tol = opt.tol;
    run.base = x0;
    run.model_family = model.family;
    run.model = &model;

    auto snapshot = [&](const std::vector<double>& vals, std::optional<double> c) {
        return LogValueFn(x0, grid, vals, closure, c);
    };
    auto base_value = [&]() {
        auto it = std::lower_bound(grid.begin(), grid.end(), x0);
        return cur[std::size_t(it - grid.begin())];
    };
    run.base_trace.push_back(base_value());
    if (opt.keep_iterates) run.iterates.push_back(snapshot(cur, cap));

    std::vector<int> last_change(grid.size(), 0);
    int streak = 0;
    for (int k = 1; k <= opt.max_iter; ++k) {
        const LogValueFn v = snapshot(cur, cap);
        const double mgf = log_mgf(model, x0, v);
        const double cont = g + mgf;
        std::optional<double> new_cap =
            std::isfinite(cont) ? std::optional<double>(cont) : std::nullopt;

        if (new_cap && std::ceil(*new_cap) + 1.0 > double(top)) {
            const long grown = std::lround(std::ceil(*new_cap)) + 2;
            std::vector<State> bigger = build_grid(grown);
            std::vector<double> vals;
            for (const State& s : bigger) vals.push_back(v.value_at(model, s));
            grid = std::move(bigger);
            cur = std::move(vals);
            last_change.assign(grid.size(), k); // fresh states count as changed
            top = grown;
        }

        double res = 0.0;
        for (std::size_t i = 0; i < grid.size(); ++i) {
            const double nv = stop_or_continue(model.G(grid[i]), cont);
            const double change = std::abs(nv - cur[i]);
            if (change > opt.tol) last_change[i] = k;
            res = std::max(res, change);
            cur[i] = nv;
        }
        cap = new_cap;
        run.residuals.push_back(res);
        run.base_trace.push_back(base_value());
        if (opt.keep_iterates) run.iterates.push_back(snapshot(cur, cap));
        run.iteration_count = k;
        streak = res <= opt.tol ? streak + 1 : 0;
        if (streak >= opt.consecutive) {
            run.converged = true;
            if (opt.stop_early) break;
        }
    }

    run.final_fn = snapshot(cur, cap);
    run.window_states = grid;
    run.convergence_depth = last_change;
    return run;
}

} // namespace detail

/// Monotone iteration started from 0; the limit is the minimal Bellman
/// solution u. Depth-exact: the n-th iterate at x0 has no truncation error.
inline BellmanRun iterate_from_below(const MarkovModel& model, const State& x0,
                                     const IterateOptions& opt = {}) {
    if (!(opt.tol > 0.0)) throw InvalidParams("tol must be positive");
    if (opt.max_iter < 1) throw InvalidParams("max_iter must be at least 1");
    return model.uniform_kernel
               ? detail::iterate_uniform(model, x0, Direction::from_below, opt)
               : detail::iterate_enumerable(model, x0, Direction::from_below, opt);
}

/// Monotone iteration started from G; the limit is the maximal solution w.
inline BellmanRun iterate_from_above(const MarkovModel& model, const State& x0,
                                     const IterateOptions& opt = {}) {
    if (!(opt.tol > 0.0)) throw InvalidParams("tol must be positive");
    if (opt.max_iter < 1) throw InvalidParams("max_iter must be at least 1");
    return model.uniform_kernel
               ? detail::iterate_uniform(model, x0, Direction::from_above, opt)
               : detail::iterate_enumerable(model, x0, Direction::from_above, opt);
}

// ---------------------------------------------------------------------------
// Truncated terminal cost
// ---------------------------------------------------------------------------

/// For each level n, run the from-below iteration on the model with terminal
/// cost G wedge n. The returned values grow in n toward u(x0).
inline std::vector<std::pair<double, double>> truncated_terminal_iteration(
    const MarkovModel& model, const State& x0, const std::vector<double>& levels,
    double tol, int max_iter = 500) {
    for (std::size_t i = 1; i < levels.size(); ++i)
        if (!(levels[i] > levels[i - 1]))
            throw InvalidParams("levels must be strictly increasing");
    IterateOptions opt;
    opt.tol = tol;
    opt.max_iter = max_iter;
    std::vector<std::pair<double, double>> out;
    for (double level : levels) {
        MarkovModel capped = with_capped_terminal(model, level);
        BellmanRun run = iterate_from_below(capped, x0, opt);
        out.emplace_back(level, run.value_at_base());
    }
    return out;
}

// ---------------------------------------------------------------------------
// Sandwich check
// ---------------------------------------------------------------------------

struct SandwichReport {
    double max_below_violation = 0.0; // how far the candidate dips under u
    double max_above_violation = 0.0; // how far it rises over w
    std::vector<State> violating_states;
    std::vector<State> skipped_states; // outside the runs' computed support
    std::size_t checked = 0;
    double slack = 0.0;
    bool zero_violations() const {
        return max_below_violation <= 0.0 && max_above_violation <= 0.0;
    }
};

/// Check u <= candidate <= w on the evaluation set, with slack from the two
/// runs' tolerances and final residuals. States where either run has no
/// computed value are reported as skipped rather than silently passed
/// through the closure rule. The candidate must live in [0, G]; otherwise
/// BadCandidate.
inline SandwichReport verify_sandwich(const BellmanRun& u_run, const BellmanRun& w_run,
                                      const LogValueFn& candidate,
                                      const std::vector<State>& eval_set) {
    if (u_run.model && w_run.model && u_run.model != w_run.model)
        throw ModelMismatch("sandwich runs come from different models");
    const MarkovModel& model = *u_run.model;

    for (const State& x : eval_set) {
        const double cv = candidate.value_at(model, x);
        if (cv < -1e-12 || cv > model.G(x) + 1e-12)
            throw BadCandidate("candidate violates 0 <= v <= G at state " + x.encode());
    }

    SandwichReport rep;
    rep.slack = u_run.slack() + w_run.slack();
    for (const State& x : eval_set) {
        if (!u_run.final_fn.covers(x) || !w_run.final_fn.covers(x)) {
            rep.skipped_states.push_back(x);
            continue;
        }
        ++rep.checked;
        const double cv = candidate.value_at(model, x);
        const double below = u_run.final_fn.value_at(model, x) - cv - rep.slack;
        const double above = cv - w_run.final_fn.value_at(model, x) - rep.slack;
        if (below > 0.0 || above > 0.0) rep.violating_states.push_back(x);
        rep.max_below_violation = std::max(rep.max_below_violation, below);
        rep.max_above_violation = std::max(rep.max_above_violation, above);
    }
    return rep;
}

} // namespace riskstop
