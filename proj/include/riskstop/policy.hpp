#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <variant>
#include <vector>

#include "riskstop/bellman.hpp"
#include "riskstop/model.hpp"
#include "riskstop/parallel.hpp"
#include "riskstop/value_fn.hpp"

namespace riskstop {

// ---------------------------------------------------------------------------
// Stopping policies
// ---------------------------------------------------------------------------

/// Stationary hitting rule (stop when v >= G, ties stop) or a finite-horizon
/// table rule (stop when the remaining-horizon iterate touches G, forced
/// stop at the horizon).
class StoppingPolicy {
public:
    static StoppingPolicy hitting(LogValueFn v) {
        StoppingPolicy p;
        p.kind_ = Kind::hitting;
        p.table_.push_back(std::move(v));
        return p;
    }

    /// `table[j]` must be the depth-j from-above iterate, j = 0..horizon.
    static StoppingPolicy finite_horizon(std::vector<LogValueFn> table, int horizon) {
        if (horizon < 0 || table.size() < std::size_t(horizon) + 1)
            throw InvalidParams("finite-horizon policy needs iterates 0..horizon");
        StoppingPolicy p;
        p.kind_ = Kind::finite_horizon;
        p.table_ = std::move(table);
        p.horizon_ = horizon;
        return p;
    }

    bool is_hitting() const { return kind_ == Kind::hitting; }
    int horizon() const { return horizon_; }
    const LogValueFn& value_fn() const { return table_.front(); }

    bool decision(const MarkovModel& model, const State& x, int step) const {
        if (kind_ == Kind::hitting)
            return table_[0].value_at(model, x) >= model.G(x) - kStopTieTol;
        if (step >= horizon_) return true;
        return table_[std::size_t(horizon_ - step)].value_at(model, x) >=
               model.G(x) - kStopTieTol;
    }

private:
    enum class Kind { hitting, finite_horizon };
    Kind kind_ = Kind::hitting;
    std::vector<LogValueFn> table_;
    int horizon_ = 0;
};

/// Hitting policy of a value function; requires v <= G on its support.
inline StoppingPolicy hitting_policy(const MarkovModel& model, const LogValueFn& v) {
    for (std::size_t i = 0; i < v.support().size(); ++i)
        if (v.values()[i] > model.G(v.support()[i]) + 1e-12)
            throw InvalidParams("hitting policy requires v <= G on the support");
    return StoppingPolicy::hitting(v);
}

// ---------------------------------------------------------------------------
// Monte Carlo estimates
// ---------------------------------------------------------------------------

/// Log-domain mean estimate with a 99% confidence interval from batch means
/// (16 batches, normal quantile 2.576).
struct McEstimate {
    double log_mean = 0.0;
    double ci_low = 0.0;
    double ci_high = 0.0;
    long n_traj = 0;
    long n_censored = 0;
    std::uint64_t seed = 0;
};

inline constexpr int kMcBatches = 16;
inline constexpr double kMcQuantile = 2.576; // two-sided 99% normal

namespace detail {

/// log-mean and CI over per-trajectory log costs, reduced in index order.
inline McEstimate aggregate_log_costs(const std::vector<double>& log_costs,
                                      std::uint64_t seed, long censored) {
    const std::size_t n = log_costs.size();
    McEstimate est;
    est.n_traj = long(n);
    est.n_censored = censored;
    est.seed = seed;
    est.log_mean = log_sum_exp(log_costs) - std::log(double(n));

    const int nb = int(std::min<std::size_t>(kMcBatches, n));
    std::vector<double> batch_means;
    batch_means.reserve(std::size_t(nb));
    for (int b = 0; b < nb; ++b) {
        const std::size_t lo = n * std::size_t(b) / std::size_t(nb);
        const std::size_t hi = n * std::size_t(b + 1) / std::size_t(nb);
        std::span<const double> chunk(log_costs.data() + lo, hi - lo);
        batch_means.push_back(log_sum_exp(chunk) - std::log(double(hi - lo)));
    }
    double mean = 0.0;
    for (double m : batch_means) mean += m;
    mean /= double(nb);
    double var = 0.0;
    for (double m : batch_means) var += (m - mean) * (m - mean);
    var = nb > 1 ? var / double(nb - 1) : 0.0;
    const double hw = kMcQuantile * std::sqrt(var / double(nb));
    est.ci_low = est.log_mean - hw;
    est.ci_high = est.log_mean + hw;
    return est;
}

/// Family-specific certificate that the policy's objective from x0 has an
/// infinite expectation. nullopt means no certificate either way.
inline std::optional<bool> certify_divergent(const MarkovModel& model,
                                             const StoppingPolicy& policy,
                                             const State& x0) {
    if (!policy.is_hitting()) return false; // bounded stopping, finite atoms
    if (policy.decision(model, x0, 0)) return false;

    if (model.reset_climb) {
        const auto& shape = *model.reset_climb;
        // resets land on 0 where v(0) >= 0 = G(0) always stops; survivors
        // climb the ray. If the ray never stops, the value is the geometric
        // series of e^c against the reset probability.
        for (int k = 1; k <= 4096; ++k)
            if (policy.decision(model, State(x0.coord() + double(k)), k)) return false;
        return (1.0 - shape.alpha) * std::exp(shape.c) >= 1.0;
    }
    if (model.iid_pareto) {
        const auto& shape = *model.iid_pareto;
        const LogValueFn& v = policy.value_fn();
        if (!v.tail_cap() && v.closure() == Closure::terminal_cost)
            return false; // v = G past the window: every tail state stops
        // stop-set mass over the explicit window; beyond it min(G, cap) < G,
        // so no tail state stops
        double q = 0.0;
        const long upto = std::lround(
            std::max(double(shape.atom_max), std::ceil(v.max_coord())));
        for (long k = 1; k <= upto; ++k)
            if (policy.decision(model, State(double(k)), 1))
                q += 1.0 / (kBaselSum * double(k) * double(k));
        if (q <= 0.0) return true; // never stops; censoring meets E[e^X] = +inf
        return std::exp(shape.c) * (1.0 - q) >= 1.0;
    }
    return std::nullopt;
}

} // namespace detail

/// Per-step record for optional rollout traces.
struct TraceRow {
    long traj_id;
    int step;
    State state;
    bool stopped;
    double running_cost; // accumulated log cost before the action
};

/// Simulate the policy from x0 and estimate ln E[exp(total cost)] where the
/// total cost is sum of g along the way plus G at the stop. Trajectories
/// still running at horizon_cap pay the cap-time cost (the tau wedge T
/// convention) and are counted as censored. Refuses with DivergentTarget
/// when the model certifies an infinite target expectation.
inline McEstimate evaluate_policy_mc(const MarkovModel& model, const StoppingPolicy& policy,
                                     const State& x0, long n_traj, long horizon_cap,
                                     std::uint64_t seed,
                                     std::vector<TraceRow>* traces = nullptr,
                                     long trace_limit = 100) {
    if (n_traj < 2) throw InvalidParams("n_traj must be at least 2");
    if (horizon_cap < 1) throw InvalidParams("horizon_cap must be at least 1");
    if (auto divergent = detail::certify_divergent(model, policy, x0);
        divergent.has_value() && *divergent)
        throw DivergentTarget("policy objective has certified infinite expectation");

    std::vector<double> log_costs(static_cast<std::size_t>(n_traj));
    std::vector<unsigned char> censored(std::size_t(n_traj), 0);

    const long traced = traces ? std::min(n_traj, trace_limit) : 0;
    auto simulate = [&](std::size_t i) {
        RngStream rng(seed, std::uint64_t(i));
        State x = x0;
        double acc = 0.0;
        for (long step = 0;; ++step) {
            const bool stop = policy.decision(model, x, int(step));
            if (traces && long(i) < traced)
                traces->push_back({long(i), int(step), x, stop || step == horizon_cap, acc});
            if (stop || step == horizon_cap) {
                log_costs[i] = acc + model.G(x);
                censored[i] = (!stop && step == horizon_cap) ? 1 : 0;
                break;
            }
            acc += model.g(x);
            x = sample_next(model, x, rng);
        }
    };
    if (traces) {
        // sequential when tracing: rows stay in trajectory order
        for (std::size_t i = 0; i < std::size_t(n_traj); ++i) simulate(i);
    } else {
        parallel_for(std::size_t(n_traj), simulate);
    }
    long n_censored = 0;
    for (unsigned char c : censored) n_censored += c;
    return detail::aggregate_log_costs(log_costs, seed, n_censored);
}

// ---------------------------------------------------------------------------
// Martingale structure check
// ---------------------------------------------------------------------------

struct MartingaleReport {
    std::vector<long> checkpoints;
    std::vector<McEstimate> stopped;   // E[z_v(tau_v wedge n)] per checkpoint
    std::vector<McEstimate> unstopped; // E[z_v(n)] per checkpoint
    double max_pairwise_gap = 0.0;     // stopped series, log domain
    bool martingale_ok = true;         // stopped series CI-flat
    bool submartingale_ok = true;      // unstopped series never CI-decreases
};

/// Estimate E[z_v(tau_v wedge n)] and E[z_v(n)] at the checkpoints, where
/// z_v(n) = exp(sum g + v(X_n)) and tau_v is the hitting time of {v >= G}.
/// The stopped sequence must be flat (martingale), the unstopped one must
/// not significantly decrease (submartingale). v must solve the Bellman
/// equation within `residual_tol` on its support.
inline MartingaleReport martingale_check(const MarkovModel& model, const LogValueFn& v,
                                         const State& x0, long n_traj,
                                         const std::vector<long>& checkpoints,
                                         std::uint64_t seed,
                                         double residual_tol = 1e-6) {
    if (n_traj < 2) throw InvalidParams("n_traj must be at least 2");
    if (checkpoints.empty()) throw InvalidParams("no checkpoints");
    for (std::size_t i = 0; i < checkpoints.size(); ++i)
        if (checkpoints[i] < 1 || (i > 0 && checkpoints[i] <= checkpoints[i - 1]))
            throw InvalidParams("checkpoints must be increasing and positive");

    // check the fixed-point defect where it is computable: states whose
    // one-step successors all carry actual values
    std::vector<State> checkable;
    for (const State& s : v.support()) {
        KernelRow row = model.kernel(s);
        if (row.tail && !(v.tail_cap() || v.closure() == Closure::terminal_cost)) continue;
        bool ok = true;
        for (const auto& [y, pr] : row.atoms)
            if (pr > 0.0 && !v.covers(y)) ok = false;
        if (ok) checkable.push_back(s);
    }
    if (checkable.empty())
        throw InvalidParams("v covers no state with fully covered successors");
    const double defect = residual(model, v, checkable);
    if (defect > residual_tol)
        throw InvalidParams("v does not solve the Bellman equation on its support");

    const long horizon = checkpoints.back();
    const std::size_t nc = checkpoints.size();
    std::vector<double> stopped_z(std::size_t(n_traj) * nc);
    std::vector<double> unstopped_z(std::size_t(n_traj) * nc);

    auto hits = [&](const State& s) {
        return v.value_at(model, s) >= model.G(s) - kStopTieTol;
    };
    parallel_for(std::size_t(n_traj), [&](std::size_t i) {
        RngStream rng(seed, std::uint64_t(i));
        State x = x0;
        double acc = 0.0; // running log cost of the unstopped walk
        bool hit = hits(x);
        double frozen = hit ? v.value_at(model, x) : 0.0; // z at tau_v once hit
        std::size_t ci = 0;
        for (long step = 1; step <= horizon && ci < nc; ++step) {
            acc += model.g(x);
            x = sample_next(model, x, rng);
            if (!hit && hits(x)) {
                hit = true;
                frozen = acc + v.value_at(model, x);
            }
            if (step == checkpoints[ci]) {
                unstopped_z[i * nc + ci] = acc + v.value_at(model, x);
                stopped_z[i * nc + ci] = hit ? frozen : acc + v.value_at(model, x);
                ++ci;
            }
        }
    });

    MartingaleReport rep;
    rep.checkpoints = checkpoints;
    for (std::size_t c = 0; c < nc; ++c) {
        std::vector<double> col(static_cast<std::size_t>(n_traj));
        for (long i = 0; i < n_traj; ++i) col[std::size_t(i)] = stopped_z[std::size_t(i) * nc + c];
        rep.stopped.push_back(detail::aggregate_log_costs(col, seed, 0));
        for (long i = 0; i < n_traj; ++i) col[std::size_t(i)] = unstopped_z[std::size_t(i) * nc + c];
        rep.unstopped.push_back(detail::aggregate_log_costs(col, seed, 0));
    }
    for (std::size_t a = 0; a < nc; ++a) {
        for (std::size_t b = a + 1; b < nc; ++b) {
            const double hw = (rep.stopped[a].ci_high - rep.stopped[a].ci_low) / 2.0 +
                              (rep.stopped[b].ci_high - rep.stopped[b].ci_low) / 2.0;
            const double gap = std::abs(rep.stopped[a].log_mean - rep.stopped[b].log_mean);
            rep.max_pairwise_gap = std::max(rep.max_pairwise_gap, gap);
            if (gap > 3.0 * hw) rep.martingale_ok = false;
            const double uhw = (rep.unstopped[a].ci_high - rep.unstopped[a].ci_low) / 2.0 +
                               (rep.unstopped[b].ci_high - rep.unstopped[b].ci_low) / 2.0;
            if (rep.unstopped[b].log_mean < rep.unstopped[a].log_mean - 3.0 * uhw)
                rep.submartingale_ok = false;
        }
    }
    return rep;
}

// ---------------------------------------------------------------------------
// Bounded-horizon policy floor
// ---------------------------------------------------------------------------

/// For each horizon T, evaluate by simulation the finite-horizon optimal
/// policy read off a from-above run of depth T. The estimates target the
/// depth-T value and decrease toward w(x0) as T grows.
inline std::vector<McEstimate> bounded_policy_floor(const MarkovModel& model, const State& x0,
                                                    const std::vector<long>& horizons,
                                                    long n_traj, std::uint64_t seed) {
    for (std::size_t i = 1; i < horizons.size(); ++i)
        if (horizons[i] <= horizons[i - 1])
            throw InvalidParams("horizons must be increasing");
    if (!horizons.empty() && horizons.front() < 0)
        throw InvalidParams("horizons must be non-negative");

    std::vector<McEstimate> out;
    for (long T : horizons) {
        IterateOptions opt;
        opt.max_iter = int(std::max<long>(T, 1));
        opt.keep_iterates = true;
        opt.stop_early = false;
        BellmanRun run = iterate_from_above(model, x0, opt);
        std::vector<LogValueFn> table(run.iterates.begin(),
                                      run.iterates.begin() + T + 1);
        StoppingPolicy policy = StoppingPolicy::finite_horizon(std::move(table), int(T));
        out.push_back(evaluate_policy_mc(model, policy, x0, n_traj, T + 1, seed));
    }
    return out;
}

} // namespace riskstop
