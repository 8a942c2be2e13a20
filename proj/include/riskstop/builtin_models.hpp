#pragma once

#include <cmath>
#include <map>
#include <memory>
#include <utility>

#include "riskstop/model.hpp"

namespace riskstop {

/// Reset-or-climb chain on [0, inf): from x the process jumps to 0 with
/// probability alpha and to x+1 otherwise. Running cost is the constant c,
/// terminal cost is the coordinate.
inline MarkovModel reset_climb_model(double alpha, double c) {
    if (alpha < 0.0 || alpha > 1.0) throw InvalidParams("alpha must lie in [0,1]");
    if (!(c > 0.0)) throw InvalidParams("c must be positive");
    MarkovModel m;
    m.kernel = [alpha](const State& x) {
        KernelRow row;
        if (alpha > 0.0) row.atoms.emplace_back(State(0.0), alpha);
        if (alpha < 1.0) row.atoms.emplace_back(State(x.coord() + 1.0), 1.0 - alpha);
        return row;
    };
    m.costs.running = [c](const State&) { return c; };
    m.costs.terminal = [](const State& x) { return x.coord(); };
    m.costs.lower_bound = c;
    m.costs.upper_bound = c;
    m.costs.growth = TerminalGrowth::linear_coordinate;
    m.family = "ex3";
    m.reset_climb = ResetClimbShape{alpha, c};
    return m;
}

/// i.i.d. discrete Pareto chain on {1,2,...}: P[X_1 = k] = 1/(C k^2) with
/// C = pi^2/6, independent of the current state. Running cost c, terminal
/// cost the coordinate. States up to `atom_max` are explicit atoms, the
/// rest is an analytic power-law tail.
inline MarkovModel iid_pareto_model(double c, long atom_max = 64) {
    if (!(c > 0.0)) throw InvalidParams("c must be positive");
    if (atom_max < 1) throw InvalidParams("atom_max must be at least 1");
    KernelRow row;
    for (long k = 1; k <= atom_max; ++k)
        row.atoms.emplace_back(State(double(k)), 1.0 / (kBaselSum * double(k) * double(k)));
    row.tail = PowerLawTail{kBaselSum, atom_max + 1};
    auto shared = std::make_shared<KernelRow>(std::move(row));
    MarkovModel m;
    m.kernel = [shared](const State&) { return *shared; };
    m.costs.running = [c](const State&) { return c; };
    m.costs.terminal = [](const State& x) { return x.coord(); };
    m.costs.lower_bound = c;
    m.costs.upper_bound = c;
    m.costs.growth = TerminalGrowth::linear_coordinate;
    m.uniform_kernel = true;
    m.family = "ex1";
    m.iid_pareto = IidParetoShape{c, atom_max};
    return m;
}

/// Finite model from explicit rows. Costs are supplied as callables; the
/// declared bounds are taken on trust and re-checked by validate_costs.
inline MarkovModel atoms_model(std::map<State, KernelRow> rows,
                               std::function<double(const State&)> g,
                               std::function<double(const State&)> G,
                               double c_lower, double g_upper,
                               TerminalGrowth growth = TerminalGrowth::unknown) {
    for (auto& [x, row] : rows) {
        std::sort(row.atoms.begin(), row.atoms.end());
        validate_row(row);
    }
    auto shared = std::make_shared<std::map<State, KernelRow>>(std::move(rows));
    MarkovModel m;
    m.kernel = [shared](const State& x) {
        auto it = shared->find(x);
        if (it == shared->end())
            throw InvalidParams("no kernel row for state " + x.encode());
        return it->second;
    };
    m.costs.running = std::move(g);
    m.costs.terminal = std::move(G);
    m.costs.lower_bound = c_lower;
    m.costs.upper_bound = g_upper;
    m.costs.growth = growth;
    m.family = "custom";
    return m;
}

} // namespace riskstop
