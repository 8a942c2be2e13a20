#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <vector>

#include "riskstop/model.hpp"

namespace riskstop {

/// Rule assigning a value to states outside the explicit support. From-below
/// iterations use `zero` (the paper's initial iterate), from-above use
/// `terminal_cost`.
enum class Closure { zero, terminal_cost };

/// A value function in log domain over an enumerable support, extended-real
/// capable. Beyond the largest support coordinate an optional cap refines
/// the closure: value = min(G, cap). The cap is what keeps iterations on
/// infinite-support kernels exact — iterates of the built-in i.i.d. family
/// are of the form min(G, constant) outside any finite window.
class LogValueFn {
public:
    LogValueFn() = default;

    /// `support` must be sorted by coordinate and value-aligned.
    LogValueFn(State base, std::vector<State> support, std::vector<double> values,
               Closure closure, std::optional<double> tail_cap = std::nullopt)
        : base_(base), support_(std::move(support)), values_(std::move(values)),
          closure_(closure), tail_cap_(tail_cap) {
        if (support_.size() != values_.size())
            throw InvalidParams("LogValueFn: support/value size mismatch");
        if (!std::is_sorted(support_.begin(), support_.end()))
            throw InvalidParams("LogValueFn: support must be sorted");
    }

    const State& base() const { return base_; }
    const std::vector<State>& support() const { return support_; }
    const std::vector<double>& values() const { return values_; }
    Closure closure() const { return closure_; }
    std::optional<double> tail_cap() const { return tail_cap_; }

    bool empty() const { return support_.empty(); }
    double max_coord() const { return support_.empty() ? kNegInf : support_.back().coord(); }

    std::optional<std::size_t> find(const State& s) const {
        auto it = std::lower_bound(support_.begin(), support_.end(), s);
        if (it != support_.end() && *it == s)
            return std::size_t(it - support_.begin());
        return std::nullopt;
    }

    /// Value at any state: explicit support, then the tail cap, then closure.
    double value_at(const MarkovModel& model, const State& s) const {
        if (auto i = find(s)) return values_[*i];
        if (tail_cap_ && s.coord() > max_coord())
            return std::min(model.G(s), *tail_cap_);
        return closure_ == Closure::zero ? 0.0 : model.G(s);
    }

    /// Whether value_at(s) is an actual value rather than a closure fallback.
    bool covers(const State& s) const {
        return find(s).has_value() || (tail_cap_ && s.coord() > max_coord());
    }

    /// Sample a function onto an explicit support (sorted, deduplicated).
    static LogValueFn sampled(State base, std::vector<State> states,
                              const std::function<double(const State&)>& fn,
                              Closure closure,
                              std::optional<double> tail_cap = std::nullopt) {
        std::sort(states.begin(), states.end());
        states.erase(std::unique(states.begin(), states.end()), states.end());
        std::vector<double> vals;
        vals.reserve(states.size());
        for (const State& s : states) vals.push_back(fn(s));
        return LogValueFn(base, std::move(states), std::move(vals), closure, tail_cap);
    }

private:
    State base_{};
    std::vector<State> support_;
    std::vector<double> values_;
    Closure closure_ = Closure::zero;
    std::optional<double> tail_cap_;
};

/// Sample `fn` on `states` plus all their one-step successors, so Bellman
/// residuals of closed-form candidates see exact successor values.
inline LogValueFn make_value_fn(const MarkovModel& model, State base,
                                std::vector<State> states,
                                const std::function<double(const State&)>& fn,
                                Closure closure = Closure::zero) {
    std::vector<State> all = states;
    for (const State& s : states) {
        KernelRow row = model.kernel(s);
        for (const auto& [y, p] : row.atoms)
            if (p > 0.0) all.push_back(y);
    }
    return LogValueFn::sampled(base, std::move(all), fn, closure);
}

// ---------------------------------------------------------------------------
// log_mgf: exact one-step expectation of e^v
// ---------------------------------------------------------------------------

namespace detail {

inline double tail_log_expectation(const MarkovModel& model, const PowerLawTail& t,
                                   const LogValueFn& v) {
    LogAccumulator acc;
    // Explicit part: tail states inside the window covered by v. With a tail
    // cap the window is stretched past the cap (and past any terminal-cost
    // cap) so that min(G, cap) is a constant on everything beyond; that
    // needs G to grow with the coordinate up to its own cap.
    const bool coord_growth = model.costs.growth == TerminalGrowth::linear_coordinate ||
                              model.costs.growth == TerminalGrowth::capped_coordinate;
    if (v.tail_cap() && !coord_growth)
        throw TailUndecidable("tail cap requires coordinate-growing terminal cost on the tail");
    long m = t.first - 1;
    double upto = v.max_coord();
    if (v.tail_cap())
        upto = std::max(upto, std::ceil(std::min(*v.tail_cap(),
                                                 model.costs.growth_cap)));
    for (long k = t.first; double(k) <= upto; ++k) {
        acc.add(t.log_weight(k) + v.value_at(model, State(double(k))));
        m = k;
    }
    // Beyond the window the value is uniform: the cap, zero, or G itself.
    const double rest_mass = inverse_square_tail(m) / t.norm;
    if (v.tail_cap()) {
        acc.add(std::log(rest_mass) + std::min(*v.tail_cap(), model.costs.growth_cap));
        return acc.value;
    }
    if (v.closure() == Closure::zero) {
        acc.add(std::log(rest_mass));
        return acc.value;
    }
    // closure = terminal cost
    switch (model.costs.growth) {
        case TerminalGrowth::linear_coordinate:
            return kInf; // sum of e^k / k^2 diverges
        case TerminalGrowth::capped_coordinate: {
            // explicit up to the cap, constant past it
            long mm = m;
            for (long k = m + 1; double(k) <= std::ceil(model.costs.growth_cap); ++k) {
                acc.add(t.log_weight(k) + model.G(State(double(k))));
                mm = k;
            }
            acc.add(std::log(inverse_square_tail(mm) / t.norm) + model.costs.growth_cap);
            return acc.value;
        }
        default:
            throw TailUndecidable("power-law tail against terminal-cost closure of unknown growth");
    }
}

inline double tail_log_expectation(const MarkovModel& model, const GeometricRayTail& t,
                                   const LogValueFn& v) {
    const bool coord_growth = model.costs.growth == TerminalGrowth::linear_coordinate ||
                              model.costs.growth == TerminalGrowth::capped_coordinate;
    if (v.tail_cap() && !coord_growth)
        throw TailUndecidable("tail cap requires coordinate-growing terminal cost on the tail");
    LogAccumulator acc;
    double upto = v.max_coord();
    if (v.tail_cap())
        upto = std::max(upto, std::min(*v.tail_cap(), model.costs.growth_cap));
    long j = 0;
    while (t.start + double(j) * t.step <= upto) {
        acc.add(t.log_weight(j) + v.value_at(model, State(t.start + double(j) * t.step)));
        ++j;
    }
    const double log_rest0 = t.log_weight(j);
    if (v.tail_cap()) {
        acc.add(log_rest0 + std::min(*v.tail_cap(), model.costs.growth_cap) -
                std::log1p(-t.ratio));
        return acc.value;
    }
    if (v.closure() == Closure::zero) {
        acc.add(log_rest0 - std::log1p(-t.ratio));
        return acc.value;
    }
    switch (model.costs.growth) {
        case TerminalGrowth::linear_coordinate: {
            const double q = t.ratio * std::exp(t.step);
            if (q >= 1.0) return kInf;
            acc.add(log_rest0 + t.start + double(j) * t.step - std::log1p(-q));
            return acc.value;
        }
        case TerminalGrowth::capped_coordinate: {
            long jj = j;
            while (t.start + double(jj) * t.step <= model.costs.growth_cap) {
                acc.add(t.log_weight(jj) + model.G(State(t.start + double(jj) * t.step)));
                ++jj;
            }
            acc.add(t.log_weight(jj) + model.costs.growth_cap - std::log1p(-t.ratio));
            return acc.value;
        }
        default:
            throw TailUndecidable("geometric-ray tail against terminal-cost closure of unknown growth");
    }
}

} // namespace detail

/// ln E_x[e^{v(X_1)}], exact for pure-atom rows; analytic-tail rows are
/// summed in closed form or certified +infinity. Throws TailUndecidable when
/// the descriptor can do neither.
inline double log_mgf(const MarkovModel& model, const State& x, const LogValueFn& v) {
    KernelRow row = model.kernel(x);
    LogAccumulator acc;
    for (const auto& [y, p] : row.atoms) {
        if (p <= 0.0) continue;
        acc.add(std::log(p) + v.value_at(model, y));
    }
    if (row.tail) {
        acc.add(std::visit(
            [&](const auto& t) { return detail::tail_log_expectation(model, t, v); }, *row.tail));
    }
    return acc.value;
}

} // namespace riskstop
