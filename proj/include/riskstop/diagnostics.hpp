#pragma once

#include <cmath>
#include <optional>
#include <vector>

#include "riskstop/bellman.hpp"
#include "riskstop/closed_form.hpp"
#include "riskstop/policy.hpp"

namespace riskstop {

// ---------------------------------------------------------------------------
// Uniform-integrability profile
// ---------------------------------------------------------------------------

enum class UiVerdict { vanishing, non_vanishing, divergent, inconclusive };
enum class UiMethod { analytic, monte_carlo, automatic };

/// Horizon profile of ln E_x[1_{tau > T} Z_T]. The family Z_{tau wedge T} is
/// uniformly integrable exactly when these values have liminf zero, which is
/// the sufficient condition for u = w.
struct UiProfile {
    std::vector<long> T_grid;
    std::vector<double> values; // extended-log-real per T
    UiMethod mode = UiMethod::analytic;
    UiVerdict verdict = UiVerdict::inconclusive;
    std::optional<double> growth_rate; // log-value slope per unit T
    double tol = 1e-8;
};

struct UiOptions {
    double tol = 1e-8;     // "vanished" once values sink below ln(tol)
    long n_traj = 100000;  // Monte Carlo mode
    std::uint64_t seed = 1;
};

namespace detail {

inline void ui_verdict_analytic(UiProfile& p) {
    for (double v : p.values) {
        if (v == kInf) {
            p.verdict = UiVerdict::divergent;
            return;
        }
    }
    const std::size_t half = p.values.size() / 2;
    bool decreasing = true;
    for (std::size_t i = std::max<std::size_t>(half, 1); i < p.values.size(); ++i)
        if (p.values[i] > p.values[i - 1] + 1e-12) decreasing = false;
    if (decreasing && p.values.back() <= std::log(p.tol))
        p.verdict = UiVerdict::vanishing;
    else
        p.verdict = UiVerdict::non_vanishing;
}

inline void ui_fit_growth(UiProfile& p) {
    std::size_t finite = 0;
    for (double v : p.values)
        if (std::isfinite(v)) ++finite;
    if (finite < 3) return;
    const std::size_t half = p.T_grid.size() / 2;
    std::vector<double> xs, ys;
    for (std::size_t i = half; i < p.T_grid.size(); ++i) {
        if (std::isfinite(p.values[i])) {
            xs.push_back(double(p.T_grid[i]));
            ys.push_back(p.values[i]);
        }
    }
    if (xs.size() >= 2 && xs.front() != xs.back())
        p.growth_rate = lsq_slope(xs, ys);
}

/// Closed-form survival-weighted expectation for the reset-or-climb family:
/// survivors of {tau > T} are exactly the reset-free climbs, provided the
/// origin stops (it always does for value functions with v(0) = 0 = G(0)).
inline std::optional<double> ui_analytic_reset_climb(const MarkovModel& model,
                                                     const StoppingPolicy& policy,
                                                     const State& x0, long T) {
    const auto& shape = *model.reset_climb;
    if (!policy.decision(model, State(0.0), 0)) return std::nullopt;
    if (policy.decision(model, x0, 0)) return kNegInf; // tau = 0
    for (long k = 1; k <= T; ++k)
        if (policy.decision(model, State(x0.coord() + double(k)), int(k)))
            return kNegInf; // the climb itself enters the stop region by T
    if (shape.alpha >= 1.0) return kNegInf;
    // (1-alpha)^T e^{cT} e^{x0 + T}
    return x0.coord() + double(T) * (shape.c + 1.0 + std::log1p(-shape.alpha));
}

} // namespace detail

/// Compute ln E_{x0}[1_{tau>T} Z_T] on the horizon grid. Analytic mode uses
/// the built-in families' closed forms and admits +infinity entries;
/// Monte Carlo mode can only certify a positive floor (non-vanishing) or
/// return inconclusive. `automatic` tries analytic first.
inline UiProfile ui_profile(const MarkovModel& model, const StoppingPolicy& policy,
                            const State& x0, const std::vector<long>& T_grid,
                            UiMethod method = UiMethod::automatic,
                            const UiOptions& opt = {}) {
    if (T_grid.empty()) throw InvalidParams("empty horizon grid");
    for (std::size_t i = 0; i < T_grid.size(); ++i)
        if (T_grid[i] < 1 || (i > 0 && T_grid[i] <= T_grid[i - 1]))
            throw InvalidParams("horizon grid must be increasing and positive");

    UiProfile prof;
    prof.T_grid = T_grid;
    prof.tol = opt.tol;

    const bool analytic_possible =
        policy.is_hitting() && (model.reset_climb || model.iid_pareto);
    if (method == UiMethod::analytic && !analytic_possible)
        throw InvalidParams("analytic ui_profile unavailable for this model/policy");

    if (analytic_possible && method != UiMethod::monte_carlo) {
        prof.mode = UiMethod::analytic;
        bool ok = true;
        for (long T : T_grid) {
            std::optional<double> v;
            if (model.reset_climb) {
                v = detail::ui_analytic_reset_climb(model, policy, x0, T);
            } else {
                // i.i.d. Pareto: any surviving path ends with a free draw
                // whose terminal expectation E[e^X] is infinite
                v = policy.decision(model, x0, 0) ? kNegInf : kInf;
            }
            if (!v) {
                ok = false;
                break;
            }
            prof.values.push_back(*v);
        }
        if (ok) {
            detail::ui_verdict_analytic(prof);
            detail::ui_fit_growth(prof);
            return prof;
        }
        if (method == UiMethod::analytic)
            throw InvalidParams("analytic ui_profile unavailable for this policy");
        prof.values.clear();
    }

    // Monte Carlo fallback
    prof.mode = UiMethod::monte_carlo;
    const long horizon = T_grid.back();
    const std::size_t nc = T_grid.size();
    std::vector<double> z(std::size_t(opt.n_traj) * nc, kNegInf);
    parallel_for(std::size_t(opt.n_traj), [&](std::size_t i) {
        RngStream rng(opt.seed, std::uint64_t(i));
        State x = x0;
        double acc = 0.0;
        std::size_t ci = 0;
        for (long step = 0; step <= horizon && ci < nc; ++step) {
            if (policy.decision(model, x, int(step))) break; // tau <= step kills later T
            if (step == T_grid[ci]) {
                // still running at T: contribute Z_T
                z[i * nc + ci] = acc + model.G(x);
                ++ci;
            }
            acc += model.g(x);
            x = sample_next(model, x, rng);
        }
    });
    std::vector<double> lows;
    for (std::size_t c = 0; c < nc; ++c) {
        std::vector<double> col(static_cast<std::size_t>(opt.n_traj));
        for (long i = 0; i < opt.n_traj; ++i) col[std::size_t(i)] = z[std::size_t(i) * nc + c];
        McEstimate est = detail::aggregate_log_costs(col, opt.seed, 0);
        prof.values.push_back(est.log_mean);
        lows.push_back(std::isfinite(est.ci_low) ? est.ci_low : kNegInf);
    }
    bool floor_holds = true;
    for (std::size_t i = nc / 2; i < nc; ++i)
        if (!(lows[i] > std::log(opt.tol))) floor_holds = false;
    prof.verdict = floor_holds ? UiVerdict::non_vanishing : UiVerdict::inconclusive;
    detail::ui_fit_growth(prof);
    return prof;
}

// ---------------------------------------------------------------------------
// u-w gap
// ---------------------------------------------------------------------------

struct GapEntry {
    State state;
    double gap;
};

struct GapReport {
    std::vector<GapEntry> entries;     // states with w - u beyond threshold
    std::vector<State> skipped_states; // outside either run's support
    double threshold = 0.0;
    bool unique_solution() const { return entries.empty(); }
};

/// List states where the maximal solution exceeds the minimal one by more
/// than tol plus the combined run slack. An empty list is the
/// unique-solution verdict on the evaluation set.
inline GapReport gap_report(const BellmanRun& u_run, const BellmanRun& w_run,
                            const std::vector<State>& eval_set, double tol) {
    if (u_run.model && w_run.model && u_run.model != w_run.model)
        throw ModelMismatch("gap_report runs come from different models");
    if (!(u_run.base == w_run.base))
        throw ModelMismatch("gap_report runs have different base points");
    const MarkovModel& model = *u_run.model;

    GapReport rep;
    rep.threshold = tol + u_run.slack() + w_run.slack();
    for (const State& x : eval_set) {
        if (!u_run.final_fn.covers(x) || !w_run.final_fn.covers(x)) {
            rep.skipped_states.push_back(x);
            continue;
        }
        const double gap =
            w_run.final_fn.value_at(model, x) - u_run.final_fn.value_at(model, x);
        if (gap > rep.threshold) rep.entries.push_back({x, gap});
    }
    return rep;
}

// ---------------------------------------------------------------------------
// Regime classification
// ---------------------------------------------------------------------------

/// Parameter regime of the reset-or-climb family: stop-now (u = w = x), gap
/// (u = x wedge K < w = x at large x), wait (u = w = x wedge K).
inline Ex3Regime regime_classifier(double alpha, double c) {
    return ex3_regime(alpha, c);
}

} // namespace riskstop
