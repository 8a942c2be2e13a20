#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "riskstop/builtin_models.hpp"
#include "riskstop/policy.hpp"

namespace riskstop {

/// Piecewise-constant continuous-time process: the state holds between
/// exponential(lambda) jump epochs and moves by the reset-or-climb rule at
/// each jump. Running cost rate d, terminal cost the coordinate. The
/// embedding constant c = ln lambda - ln(lambda - d) turns the jump chain
/// into the discrete model with the same alpha.
struct PdmpParams {
    double lambda;
    double d;
    double alpha;

    PdmpParams(double lambda_, double d_, double alpha_)
        : lambda(lambda_), d(d_), alpha(alpha_) {
        if (!(lambda > 0.0)) throw InvalidParams("lambda must be positive");
        if (!(d > 0.0) || !(d < lambda))
            throw InvalidParams("d must lie in (0, lambda): the one-jump exponential moment diverges otherwise");
        if (alpha < 0.0 || alpha > 1.0) throw InvalidParams("alpha must lie in [0,1]");
    }

    double c_embed() const { return std::log(lambda) - std::log(lambda - d); }
};

/// Discrete-time model whose Bellman equation coincides with the one
/// obtained by observing the process at jump epochs.
inline MarkovModel embed(const PdmpParams& p) {
    MarkovModel m = reset_climb_model(p.alpha, p.c_embed());
    m.family = "pdmp-embed";
    return m;
}

struct Trajectory {
    std::vector<double> jump_times;  // tau_1 < tau_2 < ...
    std::vector<State> states;       // states[0] = x0, states[k] = post-jump state
};

inline Trajectory simulate_trajectory(const PdmpParams& p, const State& x0, double t_cap,
                                      RngStream& rng) {
    Trajectory tr;
    tr.states.push_back(x0);
    double t = 0.0;
    State x = x0;
    for (;;) {
        t += rng.exponential(p.lambda);
        if (t > t_cap) break;
        const double u = rng.uniform();
        x = u < p.alpha ? State(0.0) : State(x.coord() + 1.0);
        tr.jump_times.push_back(t);
        tr.states.push_back(x);
    }
    return tr;
}

/// Simulate the continuous process and estimate ln E[exp(d tau + X_tau)]
/// for a policy consulted at time zero and at jump epochs only (stopping
/// between jumps never helps: the state is constant and the cost rate is
/// positive). Censors at t_cap under the tau wedge T convention. Refuses
/// with DivergentTarget when the embedded analysis certifies an infinite
/// expectation.
inline McEstimate simulate_and_evaluate(const PdmpParams& p, const State& x0,
                                        const StoppingPolicy& policy, long n_traj,
                                        double t_cap, std::uint64_t seed) {
    if (n_traj < 2) throw InvalidParams("n_traj must be at least 2");
    if (!(t_cap > 0.0)) throw InvalidParams("t_cap must be positive");
    const MarkovModel embedded = embed(p);
    if (auto divergent = detail::certify_divergent(embedded, policy, x0);
        divergent.has_value() && *divergent)
        throw DivergentTarget("policy objective has certified infinite expectation");

    std::vector<double> log_costs(static_cast<std::size_t>(n_traj));
    std::vector<unsigned char> censored(std::size_t(n_traj), 0);
    parallel_for(std::size_t(n_traj), [&](std::size_t i) {
        RngStream rng(seed, std::uint64_t(i));
        State x = x0;
        double t = 0.0;
        int jumps = 0;
        if (policy.decision(embedded, x, 0)) {
            log_costs[i] = x.coord();
            return;
        }
        for (;;) {
            const double dt = rng.exponential(p.lambda);
            if (t + dt > t_cap) {
                log_costs[i] = p.d * t_cap + x.coord();
                censored[i] = 1;
                break;
            }
            t += dt;
            ++jumps;
            x = rng.uniform() < p.alpha ? State(0.0) : State(x.coord() + 1.0);
            if (policy.decision(embedded, x, jumps)) {
                log_costs[i] = p.d * t + x.coord();
                break;
            }
        }
    });
    long n_censored = 0;
    for (unsigned char c : censored) n_censored += c;
    return detail::aggregate_log_costs(log_costs, seed, n_censored);
}

// ---------------------------------------------------------------------------
// Dyadic finite-horizon solver
// ---------------------------------------------------------------------------

struct DyadicResult {
    double value = 0.0;
    double budget = 0.0; // bound on nats lost to Poisson truncation
    double delta = 0.0;  // grid step T / 2^m
    long steps = 0;
    long k_max = 0;
};

struct DyadicOptions {
    long k_max = 12;       // Poisson truncation order per step
    int depth_cap = 64;    // state-grid depth; use-G beyond
    double accuracy = kInf; // BudgetExceeded when the budget passes this
};

/// Finite-horizon value with stopping restricted to the 2^m-point dyadic
/// grid on [0, T], computed by backward recursion. The one-step operator
/// conditions on the number of jumps in a step (Poisson(lambda delta)),
/// truncated at k_max with the remainder bound accumulated into `budget`.
/// Values decrease in m and increase in T; the double limit is u.
inline DyadicResult dyadic_finite_horizon(const PdmpParams& p, const State& x0, double T,
                                          int m, const DyadicOptions& opt = {}) {
    if (!(T > 0.0)) throw InvalidParams("T must be positive");
    if (m < 0) throw InvalidParams("m must be non-negative");
    if (opt.k_max < 1) throw InvalidParams("k_max must be at least 1");

    const long steps = 1L << m;
    const double delta = T / double(steps);
    const double mu = p.lambda * delta;

    // Poisson weights and the truncation remainder series
    std::vector<double> pk(std::size_t(opt.k_max) + 1);
    pk[0] = std::exp(-mu);
    for (long k = 1; k <= opt.k_max; ++k) pk[std::size_t(k)] = pk[std::size_t(k - 1)] * mu / double(k);

    // state grid: integers 0..depth_cap plus the x0 + j ray (deduplicated)
    std::vector<State> grid;
    for (int k = 0; k <= opt.depth_cap; ++k) grid.push_back(State(double(k)));
    for (int j = 0; j <= opt.depth_cap; ++j) grid.push_back(State(x0.coord() + double(j)));
    std::sort(grid.begin(), grid.end());
    grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
    const std::size_t n = grid.size();
    auto index_of = [&](const State& s) -> long {
        auto it = std::lower_bound(grid.begin(), grid.end(), s);
        return it != grid.end() && *it == s ? it - grid.begin() : -1;
    };
    const long base_idx = index_of(x0);

    auto G = [](double coord) { return coord; };

    std::vector<double> V(n, 0.0); // log values, from-below start
    std::vector<double> W(n), reset_prefix(std::size_t(opt.k_max) + 1);
    double budget = 0.0;

    for (long s = 0; s < steps; ++s) {
        for (std::size_t i = 0; i < n; ++i) W[i] = std::exp(V[i]);
        // linear-domain value of the state reached after landing on integer
        // j (resets), with use-G closure beyond the grid
        auto reset_value = [&](long j) {
            return j <= opt.depth_cap ? W[std::size_t(index_of(State(double(j))))]
                                      : std::exp(G(double(j)));
        };
        // prefix sums over reset outcomes: sum_{j<k} alpha (1-alpha)^j e^{V(j)}
        reset_prefix[0] = 0.0;
        for (long k = 1; k <= opt.k_max; ++k)
            reset_prefix[std::size_t(k)] =
                reset_prefix[std::size_t(k - 1)] +
                p.alpha * std::pow(1.0 - p.alpha, double(k - 1)) * reset_value(k - 1);

        double step_err = 0.0;
        std::vector<double> newV(n);
        for (std::size_t i = 0; i < n; ++i) {
            const double x = grid[i].coord();
            double sum = 0.0;
            for (long k = 0; k <= opt.k_max; ++k) {
                double outcome;
                if (k == 0) {
                    outcome = W[i];
                } else {
                    const long up = index_of(State(x + double(k)));
                    const double no_reset =
                        std::pow(1.0 - p.alpha, double(k)) *
                        (up >= 0 ? W[std::size_t(up)] : std::exp(G(x + double(k))));
                    outcome = no_reset + reset_prefix[std::size_t(k)];
                }
                sum += pk[std::size_t(k)] * outcome;
            }
            // Poisson remainder: beyond k_max the no-reset branch is bounded
            // by (1-alpha)^k e^{x+k} and every reset branch by e^{k-1}
            double rem = 0.0;
            double term = pk[std::size_t(opt.k_max)];
            for (long k = opt.k_max + 1; k <= opt.k_max + 400; ++k) {
                term *= mu / double(k);
                const double bound =
                    term * (std::pow(1.0 - p.alpha, double(k)) * std::exp(x + double(k)) +
                            std::exp(double(k - 1)));
                rem += bound;
                if (bound < 1e-18 * sum && double(k) > std::exp(1.0) * mu + double(opt.k_max))
                    break;
            }
            step_err = std::max(step_err, rem / sum);
            newV[i] = std::min(G(x), p.d * delta + std::log(sum));
        }
        budget += std::log1p(step_err);
        if (budget > opt.accuracy)
            throw BudgetExceeded("poisson truncation bound exceeds the requested accuracy");
        V = std::move(newV);
    }

    DyadicResult out;
    out.value = V[std::size_t(base_idx)];
    out.budget = budget;
    out.delta = delta;
    out.steps = steps;
    out.k_max = opt.k_max;
    return out;
}

} // namespace riskstop
