#pragma once

#include <cmath>
#include <limits>
#include <span>
#include <vector>

namespace riskstop {

inline constexpr double kInf = std::numeric_limits<double>::infinity();
inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

/// pi^2/6, the normalizer of the discrete Pareto law P[X=k] = 1/(C k^2).
inline constexpr double kBaselSum = 1.6449340668482264;

/// ln(sum_i e^{a_i}) with the usual max-shift stabilisation.
///
/// Extended-real semantics: entries of -inf contribute nothing, a single
/// +inf entry makes the result +inf, and an empty span sums to e^0 = 0,
/// i.e. returns -inf.
inline double log_sum_exp(std::span<const double> args) {
    double m = kNegInf;
    for (double a : args) m = std::max(m, a);
    if (std::isinf(m)) return m; // +inf dominates; all -inf sums to zero
    double s = 0.0;
    for (double a : args) s += std::exp(a - m);
    return m + std::log(s);
}

/// Two-argument form, used on the hot path of the Bellman operator.
inline double log_sum_exp2(double a, double b) {
    if (a < b) std::swap(a, b);
    if (std::isinf(a)) return a;
    return a + std::log1p(std::exp(b - a));
}

/// ln(e^a + e^b + ...) accumulated incrementally: acc' = lse(acc, x).
struct LogAccumulator {
    double value = kNegInf;
    void add(double x) { value = log_sum_exp2(value, x); }
};

/// sum_{k > m} 1/k^2, evaluated as the trigamma function psi_1(m+1) by its
/// Euler-Maclaurin expansion after rolling up to m >= 24 explicitly
/// (absolute error below 1e-16).
inline double inverse_square_tail(long m) {
    double extra = 0.0;
    while (m < 24) { ++m; extra += 1.0 / (double(m) * double(m)); }
    const double z = double(m) + 1.0;
    const double z2 = z * z;
    // psi_1(z) ~ 1/z + 1/(2z^2) + 1/(6z^3) - 1/(30z^5) + 1/(42z^7) - 1/(30z^9)
    const double z3 = z2 * z, z5 = z3 * z2, z7 = z5 * z2, z9 = z7 * z2;
    double t = 1.0 / z + 1.0 / (2.0 * z2) + 1.0 / (6.0 * z3) - 1.0 / (30.0 * z5)
               + 1.0 / (42.0 * z7) - 1.0 / (30.0 * z9);
    return t + extra;
}

/// Least-squares slope of y against x. Requires at least two points.
inline double lsq_slope(std::span<const double> x, std::span<const double> y) {
    const std::size_t n = x.size();
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < n; ++i) { mx += x[i]; my += y[i]; }
    mx /= double(n);
    my /= double(n);
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        num += (x[i] - mx) * (y[i] - my);
        den += (x[i] - mx) * (x[i] - mx);
    }
    return num / den;
}

} // namespace riskstop
