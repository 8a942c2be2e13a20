#pragma once

#include <cmath>
#include <utility>

#include "riskstop/errors.hpp"
#include "riskstop/numeric.hpp"

namespace riskstop {

// ---------------------------------------------------------------------------
// Reset-or-climb chain (constant running cost c, reset probability alpha)
// ---------------------------------------------------------------------------

/// Parameter regime of the reset-or-climb chain. Boundaries follow the
/// closed intervals of the regime table: stop-now up to and including
/// 1-e^{-c}, gap up to and including 1-e^{-c-1}, wait above.
enum class Ex3Regime { stop_now, gap, wait };

inline Ex3Regime ex3_regime(double alpha, double c) {
    if (alpha < 0.0 || alpha > 1.0) throw InvalidParams("alpha must lie in [0,1]");
    if (!(c > 0.0)) throw InvalidParams("c must be positive");
    if (alpha <= 1.0 - std::exp(-c)) return Ex3Regime::stop_now;
    if (alpha <= 1.0 - std::exp(-c - 1.0)) return Ex3Regime::gap;
    return Ex3Regime::wait;
}

struct Ex3Params {
    double alpha;
    double c;

    Ex3Params(double alpha_, double c_) : alpha(alpha_), c(c_) {
        (void)ex3_regime(alpha, c); // validates
    }

    /// K = ln(alpha e^c / (1 - (1-alpha) e^c)), finite iff (1-alpha)e^c < 1.
    double K() const {
        const double r = (1.0 - alpha) * std::exp(c);
        if (r >= 1.0) return kInf;
        return std::log(alpha * std::exp(c) / (1.0 - r));
    }

    Ex3Regime regime() const { return ex3_regime(alpha, c); }
};

/// Exact minimal and maximal solutions (u, w) at coordinate x >= 0.
inline std::pair<double, double> ex3_values(const Ex3Params& p, double x) {
    if (x < 0.0) throw InvalidParams("ex3 state coordinate must be non-negative");
    switch (p.regime()) {
        case Ex3Regime::stop_now: return {x, x};
        case Ex3Regime::gap: return {std::min(x, p.K()), x};
        case Ex3Regime::wait: {
            const double v = std::min(x, p.K());
            return {v, v};
        }
    }
    return {x, x}; // unreachable
}

/// The constant part c_n of the n-th from-below iterate, computed from the
/// series e^{c_n} = sum_{k=1}^{n-1} alpha (1-alpha)^{k-1} e^{kc}
///                  + (1-alpha)^{n-1} e^{cn}, in log domain.
inline double ex3_cn(const Ex3Params& p, long n) {
    if (n < 1) throw InvalidParams("ex3_cn requires n >= 1");
    LogAccumulator acc;
    if (p.alpha > 0.0) {
        const double la = std::log(p.alpha);
        const double l1a = p.alpha < 1.0 ? std::log1p(-p.alpha) : kNegInf;
        for (long k = 1; k <= n - 1; ++k)
            acc.add(la + (k == 1 ? 0.0 : double(k - 1) * l1a) + double(k) * p.c);
    }
    if (p.alpha < 1.0)
        acc.add(double(n - 1) * std::log1p(-p.alpha) + double(n) * p.c);
    else if (n == 1)
        acc.add(p.c); // alpha = 1: the sole term is e^{c}
    return acc.value;
}

/// One member of the infinite family of discontinuous Bellman solutions in
/// the gap regime: x on [0,K] and on the integers, K elsewhere.
inline double ex3_discontinuous_solution(const Ex3Params& p, double x) {
    if (p.regime() != Ex3Regime::gap)
        throw WrongRegime("discontinuous solution exists only in the gap regime");
    if (x < 0.0) throw InvalidParams("ex3 state coordinate must be non-negative");
    if (x <= p.K() || x == std::floor(x)) return x;
    return p.K();
}

// ---------------------------------------------------------------------------
// i.i.d. discrete Pareto chain
// ---------------------------------------------------------------------------

inline double pareto_p1() { return 1.0 / kBaselSum; }

/// ln E[e^{min(X, b)}] for the discrete Pareto law, summed analytically:
/// explicit prefix below b plus the exact inverse-square remainder.
inline double pareto_log_emin(double b) {
    if (b < 0.0) throw InvalidParams("pareto_log_emin requires b >= 0");
    const long m = (long)std::floor(b);
    LogAccumulator acc;
    for (long k = 1; k <= m; ++k)
        acc.add(double(k) - std::log(kBaselSum) - 2.0 * std::log(double(k)));
    acc.add(b + std::log(inverse_square_tail(m) / kBaselSum));
    return acc.value;
}

struct Ex1Params {
    double c;

    explicit Ex1Params(double c_) : c(c_) {
        if (!(c > 0.0) || c >= -std::log1p(-pareto_p1()))
            throw InvalidParams("ex1 requires 0 < c < -ln(1-p1) (about 0.94)");
    }

    /// B = p1 e^{c+1} / (1 - e^c (1 - p1)), the value of the hit-state-1
    /// policy from any state above 1.
    double B() const {
        return pareto_p1() * std::exp(c + 1.0) /
               (1.0 - std::exp(c) * (1.0 - pareto_p1()));
    }
};

/// Limit of the scalar recursion b_{n+1} = c + ln E[e^{min(X, b_n)}],
/// b_0 = 0. The minimal solution is u(x) = min(x, b_limit).
inline double ex1_b_limit(const Ex1Params& p, double tol = 1e-14, int max_iter = 100000) {
    double b = 0.0;
    for (int i = 0; i < max_iter; ++i) {
        const double nb = p.c + pareto_log_emin(b);
        if (std::abs(nb - b) < tol) return nb;
        b = nb;
    }
    return b;
}

/// n-th element of the same recursion (b_1 = c).
inline double ex1_bn(const Ex1Params& p, int n) {
    double b = 0.0;
    for (int i = 0; i < n; ++i) b = p.c + pareto_log_emin(b);
    return b;
}

struct Ex1Values {
    double u_bound; // ln B
    double w;       // x exactly
    double b_limit; // limit of the scalar recursion; u(x) = min(x, b_limit)
};

inline Ex1Values ex1_values(const Ex1Params& p, long x) {
    if (x < 1) throw InvalidParams("ex1 states are positive integers");
    Ex1Values out;
    out.u_bound = std::log(p.B());
    out.w = double(x);
    out.b_limit = ex1_b_limit(p);
    return out;
}

} // namespace riskstop
