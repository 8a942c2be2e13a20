#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "oracles.hpp"
#include "riskstop/builtin_models.hpp"
#include "riskstop/diagnostics.hpp"

using namespace riskstop;

namespace {

StoppingPolicy u_hitting(const MarkovModel& m, const State& x0, BellmanRun* out = nullptr) {
    auto run = iterate_from_below(m, x0);
    if (out) *out = run;
    return hitting_policy(m, run.final_fn);
}

} // namespace

TEST_CASE("ui_profile analytic on the reset-or-climb family") {
    std::vector<long> grid{1, 2, 4, 8, 12, 16, 20};
    SECTION("gap regime grows at ln((1-alpha) e^{c+1})") {
        Ex3Params p(0.5, 0.5);
        auto m = reset_climb_model(p.alpha, p.c);
        auto pol = u_hitting(m, State(5.0));
        auto prof = ui_profile(m, pol, State(5.0), grid, UiMethod::analytic);
        CHECK(prof.verdict == UiVerdict::non_vanishing);
        const double rate = std::log((1.0 - p.alpha) * std::exp(p.c + 1.0));
        REQUIRE(prof.growth_rate.has_value());
        CHECK(*prof.growth_rate == Catch::Approx(rate).margin(1e-10));
        CHECK(rate == Catch::Approx(std::log(2.2408)).margin(1e-4));
        for (std::size_t i = 0; i < grid.size(); ++i)
            CHECK(prof.values[i] ==
                  Catch::Approx(5.0 + double(grid[i]) * rate).margin(1e-10));
    }
    SECTION("wait regime vanishes") {
        Ex3Params p(0.9, 0.5);
        auto m = reset_climb_model(p.alpha, p.c);
        auto pol = u_hitting(m, State(5.0));
        std::vector<long> longer{1, 2, 4, 8, 16, 32, 40};
        auto prof = ui_profile(m, pol, State(5.0), longer, UiMethod::analytic);
        CHECK(prof.verdict == UiVerdict::vanishing);
        REQUIRE(prof.growth_rate.has_value());
        CHECK(*prof.growth_rate ==
              Catch::Approx(std::log(0.1 * std::exp(1.5))).margin(1e-10));
    }
    SECTION("stop-now regime vanishes trivially (tau = 0)") {
        auto m = reset_climb_model(0.2, 0.5);
        auto pol = u_hitting(m, State(5.0));
        auto prof = ui_profile(m, pol, State(5.0), grid, UiMethod::analytic);
        CHECK(prof.verdict == UiVerdict::vanishing);
        for (double v : prof.values) CHECK(v == kNegInf);
    }
    SECTION("w-hitting policy is trivially UI even in the gap regime") {
        // stopping immediately makes the family bounded, yet u < w: UI of
        // the w-stopped family does not imply uniqueness
        Ex3Params p(0.5, 0.5);
        auto m = reset_climb_model(p.alpha, p.c);
        auto wrun = iterate_from_above(m, State(5.0));
        auto pol = hitting_policy(m, wrun.final_fn);
        auto prof = ui_profile(m, pol, State(5.0), grid, UiMethod::analytic);
        CHECK(prof.verdict == UiVerdict::vanishing);
        auto urun = iterate_from_below(m, State(5.0));
        auto gaps = gap_report(urun, wrun, wrun.window_states, 1e-6);
        CHECK_FALSE(gaps.unique_solution());
    }
}

TEST_CASE("ui_profile analytic matches brute-force path enumeration") {
    for (double alpha : {0.5, 0.9}) {
        Ex3Params p(alpha, 0.5);
        auto m = reset_climb_model(p.alpha, p.c);
        BellmanRun run;
        auto pol = u_hitting(m, State(5.0), &run);
        std::vector<long> grid{1, 2, 3, 5, 8, 13, 20};
        auto prof = ui_profile(m, pol, State(5.0), grid, UiMethod::analytic);
        auto stop = [&](const State& s) { return pol.decision(m, s, 0); };
        for (std::size_t i = 0; i < grid.size(); ++i) {
            const double direct =
                oracles::survival_weight_direct(m, State(5.0), 0, int(grid[i]), stop);
            CHECK(prof.values[i] == Catch::Approx(std::log(direct)).margin(1e-10));
        }
    }
}

TEST_CASE("ui_profile on the Pareto chain is divergent") {
    Ex1Params p(0.5);
    auto m = iid_pareto_model(p.c);
    auto run = iterate_from_below(m, State(10.0));
    auto pol = hitting_policy(m, run.final_fn);
    auto prof = ui_profile(m, pol, State(10.0), {1, 2, 4, 8}, UiMethod::analytic);
    CHECK(prof.verdict == UiVerdict::divergent);
    for (double v : prof.values) CHECK(v == kInf);
}

TEST_CASE("ui_profile Monte Carlo mode") {
    Ex3Params p(0.5, 0.5);
    auto m = reset_climb_model(p.alpha, p.c);
    auto pol = u_hitting(m, State(5.0));
    UiOptions opt;
    opt.n_traj = 100000;
    opt.seed = 4;
    opt.tol = 1e-8;
    SECTION("detects the positive floor in the gap regime") {
        auto prof = ui_profile(m, pol, State(5.0), {1, 2, 4, 8}, UiMethod::monte_carlo, opt);
        CHECK(prof.verdict == UiVerdict::non_vanishing);
        const double rate = std::log((1.0 - p.alpha) * std::exp(p.c + 1.0));
        for (std::size_t i = 0; i < prof.values.size(); ++i)
            CHECK(prof.values[i] ==
                  Catch::Approx(5.0 + double(prof.T_grid[i]) * rate).margin(0.1));
    }
    SECTION("never claims vanishing") {
        auto mw = reset_climb_model(0.9, 0.5);
        auto polw = u_hitting(mw, State(5.0));
        auto prof =
            ui_profile(mw, polw, State(5.0), {8, 16, 24, 32}, UiMethod::monte_carlo, opt);
        CHECK((prof.verdict == UiVerdict::inconclusive ||
               prof.verdict == UiVerdict::non_vanishing));
        CHECK(prof.verdict != UiVerdict::vanishing);
    }
}

TEST_CASE("ui_profile validation") {
    auto m = reset_climb_model(0.5, 0.5);
    auto pol = u_hitting(m, State(5.0));
    CHECK_THROWS_AS(ui_profile(m, pol, State(5.0), {}, UiMethod::analytic), InvalidParams);
    CHECK_THROWS_AS(ui_profile(m, pol, State(5.0), {2, 1}, UiMethod::analytic),
                    InvalidParams);
    // analytic unavailable on a custom model
    RngStream rng(3, 3);
    auto rm = oracles::random_finite_model(rng);
    auto pol2 = StoppingPolicy::hitting(
        LogValueFn(rm.states[0], {rm.states[0]},
                   {rm.model.G(rm.states[0])}, Closure::zero));
    CHECK_THROWS_AS(
        ui_profile(rm.model, pol2, rm.states[0], {1, 2}, UiMethod::analytic),
        InvalidParams);
}

TEST_CASE("gap_report across the three regimes") {
    std::vector<State> grid;
    for (int k = 0; k <= 6; ++k) grid.push_back(State(double(k)));
    SECTION("gap regime flags states beyond K") {
        Ex3Params p(0.5, 0.5);
        auto m = reset_climb_model(p.alpha, p.c);
        auto u = iterate_from_below(m, State(5.0));
        auto w = iterate_from_above(m, State(5.0));
        auto rep = gap_report(u, w, grid, 1e-6);
        CHECK_FALSE(rep.unique_solution());
        REQUIRE(rep.entries.size() == 5); // x = 2..6: gap = x - K > 0
        for (const auto& e : rep.entries) {
            CHECK(e.state.coord() >= 2.0);
            CHECK(e.gap == Catch::Approx(e.state.coord() - p.K()).margin(1e-6));
        }
    }
    SECTION("wait and stop-now regimes are unique") {
        for (double alpha : {0.9, 0.2}) {
            auto m = reset_climb_model(alpha, 0.5);
            auto u = iterate_from_below(m, State(5.0));
            auto w = iterate_from_above(m, State(5.0));
            CHECK(gap_report(u, w, grid, 1e-6).unique_solution());
        }
    }
    SECTION("runs from different models are rejected") {
        auto m1 = reset_climb_model(0.5, 0.5);
        auto m2 = reset_climb_model(0.9, 0.5);
        auto u = iterate_from_below(m1, State(5.0));
        auto w = iterate_from_above(m2, State(5.0));
        CHECK_THROWS_AS(gap_report(u, w, grid, 1e-6), ModelMismatch);
    }
}

TEST_CASE("regime_classifier spec points") {
    CHECK(regime_classifier(1.0, 0.5) == Ex3Regime::wait);
    CHECK(regime_classifier(1.0 - std::exp(-0.5), 0.5) == Ex3Regime::stop_now);
    CHECK(regime_classifier(1.0 - std::exp(-1.5), 0.5) == Ex3Regime::gap);
    CHECK_THROWS_AS(regime_classifier(1.1, 0.5), InvalidParams);
}

TEST_CASE("consistency triangle on a small parameter grid") {
    // classifier = gap <=> gap_report non-empty <=> ui non-vanishing;
    // wait regime: unique and vanishing
    for (double alpha : {0.15, 0.45, 0.75, 0.95}) {
        for (double c : {0.3, 0.7}) {
            auto m = reset_climb_model(alpha, c);
            const auto regime = regime_classifier(alpha, c);
            double x0c = 5.0;
            if (regime != Ex3Regime::stop_now) {
                const double K = Ex3Params(alpha, c).K();
                x0c = std::floor(K) + 2.0;
            }
            IterateOptions opt;
            opt.max_iter = 3000;
            opt.window_depth = 16;
            auto u = iterate_from_below(m, State(x0c), opt);
            auto w = iterate_from_above(m, State(x0c), opt);
            REQUIRE(u.converged);
            REQUIRE(w.converged);
            auto gaps = gap_report(u, w, u.window_states, 1e-5);
            auto pol = hitting_policy(m, u.final_fn);
            // reach past the point where a vanishing profile sinks below tol
            long t_max = 120;
            if (regime == Ex3Regime::wait) {
                const double rate = std::log((1.0 - alpha) * std::exp(c + 1.0));
                t_max = std::max<long>(t_max, long((x0c + 20.0) / -rate) + 5);
            }
            std::vector<long> Ts;
            for (long T = 5; T <= t_max; T += std::max<long>(5, t_max / 24))
                Ts.push_back(T);
            auto prof = ui_profile(m, pol, State(x0c), Ts, UiMethod::analytic,
                                   UiOptions{1e-6, 1000, 1});
            const bool is_gap = regime == Ex3Regime::gap;
            CHECK(gaps.unique_solution() == !is_gap);
            CHECK((prof.verdict == UiVerdict::non_vanishing) == is_gap);
            if (regime == Ex3Regime::wait) CHECK(prof.verdict == UiVerdict::vanishing);
        }
    }
}
