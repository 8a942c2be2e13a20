#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include "riskstop/errors.hpp"
#include "riskstop/numeric.hpp"
#include "riskstop/rng.hpp"
#include "riskstop/state.hpp"

namespace riskstop {

// ---------------------------------------------------------------------------
// Kernel rows
// ---------------------------------------------------------------------------

/// Analytic tail over the integer states {first, first+1, ...} with masses
/// P[X=k] = 1/(norm * k^2). Covers the discrete Pareto family.
struct PowerLawTail {
    double norm;  // normalizing constant, pi^2/6 for the full Pareto law
    long first;   // smallest integer state carried by the tail

    double mass() const { return inverse_square_tail(first - 1) / norm; }
    double log_weight(long k) const { return -std::log(norm) - 2.0 * std::log(double(k)); }
};

/// Analytic tail over the ray {start + j*step : j >= 0} with geometric
/// masses mass0 * ratio^j, ratio in (0,1).
struct GeometricRayTail {
    double start;
    double step;
    double mass0;
    double ratio;

    double mass() const { return mass0 / (1.0 - ratio); }
    double log_weight(long j) const { return std::log(mass0) + double(j) * std::log(ratio); }
};

using TailDescriptor = std::variant<PowerLawTail, GeometricRayTail>;

/// One-step transition law from a single state: explicit atoms plus an
/// optional analytic tail for infinite-support kernels.
struct KernelRow {
    std::vector<std::pair<State, double>> atoms;
    std::optional<TailDescriptor> tail;

    double tail_mass() const {
        if (!tail) return 0.0;
        return std::visit([](const auto& t) { return t.mass(); }, *tail);
    }
};

/// Sanity-check a row: probabilities in [0,1], atoms distinct, total mass 1.
inline void validate_row(const KernelRow& row) {
    double total = row.tail_mass();
    std::set<State> seen;
    for (const auto& [y, p] : row.atoms) {
        if (p < 0.0 || p > 1.0) throw InvalidParams("atom probability outside [0,1]");
        if (!seen.insert(y).second) throw InvalidParams("duplicate atom state in kernel row");
        total += p;
    }
    if (std::abs(total - 1.0) > 1e-12) throw InvalidParams("kernel row mass differs from 1");
}

// ---------------------------------------------------------------------------
// Costs
// ---------------------------------------------------------------------------

/// Growth class of the terminal cost on analytic tail states, which decides
/// whether expectations of e^G can be summed or certified divergent there.
enum class TerminalGrowth {
    bounded,            // sup G known finite but values on the tail unknown
    linear_coordinate,  // G(x) = coord(x) on tail states
    capped_coordinate,  // G(x) = min(coord(x), growth_cap) on tail states
    unknown,
};

struct CostSpec {
    std::function<double(const State&)> running;   // g, per-step cost
    std::function<double(const State&)> terminal;  // G, cost paid at stopping
    double lower_bound = 0.0;                      // declared bound g >= c > 0
    double upper_bound = 0.0;                      // declared bound g <= g_upper
    TerminalGrowth growth = TerminalGrowth::unknown;
    double growth_cap = kInf;                      // cap for capped_coordinate
};

// ---------------------------------------------------------------------------
// Model
// ---------------------------------------------------------------------------

/// Reset-or-climb chain: P_x[X1=0] = alpha, P_x[X1=x+1] = 1-alpha, with
/// constant running cost c. Exposed so diagnostics can use closed forms.
struct ResetClimbShape {
    double alpha;
    double c;
};

/// i.i.d. discrete Pareto chain on {1,2,...} with constant running cost c.
struct IidParetoShape {
    double c;
    long atom_max; // states <= atom_max are explicit atoms, the rest is tail
};

/// Discrete-time Markov model with cost structure. Immutable after
/// construction and safe to share across threads.
struct MarkovModel {
    std::function<KernelRow(const State&)> kernel;
    CostSpec costs;
    bool uniform_kernel = false; // row does not depend on the state
    std::string family = "custom";
    std::optional<ResetClimbShape> reset_climb;
    std::optional<IidParetoShape> iid_pareto;

    double g(const State& x) const { return costs.running(x); }
    double G(const State& x) const { return costs.terminal(x); }
};

// ---------------------------------------------------------------------------
// validate_costs
// ---------------------------------------------------------------------------

struct ValidationIssue {
    std::optional<State> state; // empty for model-level issues
    std::string what;
};

struct ValidationReport {
    std::vector<ValidationIssue> issues;
    bool empty() const { return issues.empty(); }
};

/// Check the cost assumptions (g bounded away from zero and from above,
/// G non-negative) on a set of probe states. Violations are report entries,
/// not failures.
inline ValidationReport validate_costs(const MarkovModel& model,
                                       const std::vector<State>& probe_states) {
    if (probe_states.empty()) throw InvalidParams("validate_costs: no probe states");
    ValidationReport rep;
    if (!(model.costs.lower_bound > 0.0))
        rep.issues.push_back({std::nullopt, "declared lower bound on g is not positive"});
    for (const State& x : probe_states) {
        const double gv = model.g(x);
        const double Gv = model.G(x);
        if (gv < model.costs.lower_bound)
            rep.issues.push_back({x, "g below c_lower"});
        if (gv > model.costs.upper_bound)
            rep.issues.push_back({x, "g above g_upper"});
        if (Gv < 0.0)
            rep.issues.push_back({x, "G negative"});
    }
    return rep;
}

/// Same model with the terminal cost capped at `level` (G wedge level).
inline MarkovModel with_capped_terminal(const MarkovModel& model, double level) {
    MarkovModel m = model;
    auto base = model.costs.terminal;
    m.costs.terminal = [base, level](const State& x) { return std::min(base(x), level); };
    if (model.costs.growth == TerminalGrowth::linear_coordinate ||
        model.costs.growth == TerminalGrowth::capped_coordinate) {
        m.costs.growth = TerminalGrowth::capped_coordinate;
        m.costs.growth_cap = std::min(level, model.costs.growth_cap);
    } else {
        m.costs.growth = TerminalGrowth::bounded;
    }
    return m;
}

// ---------------------------------------------------------------------------
// Reachable set
// ---------------------------------------------------------------------------

/// States reachable from x in at most n steps, sorted by coordinate, with
/// the first-reach depth of each. Only defined for rows without tails.
struct ReachableSet {
    std::vector<State> states;
    std::vector<int> depth; // first-reach depth, aligned with states
};

inline ReachableSet reachable(const MarkovModel& model, const State& x, int n) {
    std::set<State> seen{x};
    std::vector<State> frontier{x};
    std::vector<std::pair<State, int>> found{{x, 0}};
    for (int d = 1; d <= n && !frontier.empty(); ++d) {
        std::vector<State> next;
        for (const State& s : frontier) {
            KernelRow row = model.kernel(s);
            if (row.tail)
                throw InvalidParams("reachable set is not enumerable: kernel row has an analytic tail");
            for (const auto& [y, p] : row.atoms) {
                if (p <= 0.0) continue;
                if (seen.insert(y).second) {
                    next.push_back(y);
                    found.emplace_back(y, d);
                }
            }
        }
        frontier = std::move(next);
    }
    std::sort(found.begin(), found.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    ReachableSet out;
    out.states.reserve(found.size());
    out.depth.reserve(found.size());
    for (auto& [s, d] : found) {
        out.states.push_back(s);
        out.depth.push_back(d);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Sampling
// ---------------------------------------------------------------------------

namespace detail {

/// Smallest k >= first with cumulative tail mass up to k at least `target`,
/// for the inverse-square tail. Exact inversion via the monotone survivor
/// function, so draws deep in the tail stay unbiased.
inline long invert_power_law(const PowerLawTail& t, double target) {
    // want smallest k with mass(first..k) >= target, i.e.
    // survivor(k) := inverse_square_tail(k)/norm <= mass() - target
    const double r = t.mass() - target;
    // Row masses sum to 1 only within float rounding; a target landing in
    // that ~1e-16 sliver maps to the first tail state.
    if (r <= 0.0) return t.first;
    long lo = t.first;
    long hi = std::max<long>(t.first, (long)std::ceil(1.0 / (t.norm * r)) + 2);
    while (inverse_square_tail(hi) / t.norm > r) hi = hi * 2 + 1;
    while (lo < hi) {
        long mid = lo + (hi - lo) / 2;
        if (inverse_square_tail(mid) / t.norm <= r)
            hi = mid;
        else
            lo = mid + 1;
    }
    return lo;
}

} // namespace detail

/// Draw the next state; deterministic given the stream state.
inline State sample_next(const MarkovModel& model, const State& x, RngStream& rng) {
    KernelRow row = model.kernel(x);
    const double u = rng.uniform();
    double cum = 0.0;
    for (const auto& [y, p] : row.atoms) {
        cum += p;
        if (u < cum) return y;
    }
    if (!row.tail) return row.atoms.back().first; // u in the 1e-12 slack
    const double target = u - cum;
    if (std::holds_alternative<PowerLawTail>(*row.tail)) {
        const auto& t = std::get<PowerLawTail>(*row.tail);
        return State(double(detail::invert_power_law(t, target)));
    }
    const auto& t = std::get<GeometricRayTail>(*row.tail);
    // smallest j with mass0 (1-ratio^{j+1})/(1-ratio) >= target
    const double arg = 1.0 - target * (1.0 - t.ratio) / t.mass0;
    long j = arg <= 0.0 ? 0 : (long)std::floor(std::log(arg) / std::log(t.ratio));
    while (j > 0 && t.mass0 * (1.0 - std::pow(t.ratio, double(j))) / (1.0 - t.ratio) >= target) --j;
    while (t.mass0 * (1.0 - std::pow(t.ratio, double(j + 1))) / (1.0 - t.ratio) < target) ++j;
    return State(t.start + double(j) * t.step);
}

} // namespace riskstop
