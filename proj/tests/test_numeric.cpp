#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "riskstop/numeric.hpp"
#include "riskstop/rng.hpp"
#include "riskstop/state.hpp"

using namespace riskstop;

TEST_CASE("log_sum_exp handles extended reals") {
    std::vector<double> flat{0.0, 0.0};
    CHECK(log_sum_exp(flat) == Catch::Approx(std::log(2.0)).margin(1e-15));

    std::vector<double> with_ninf{kNegInf, 1.0};
    CHECK(log_sum_exp(with_ninf) == Catch::Approx(1.0).margin(1e-15));

    std::vector<double> with_inf{kInf, 1.0};
    CHECK(log_sum_exp(with_inf) == kInf);

    std::vector<double> none;
    CHECK(log_sum_exp(none) == kNegInf);

    CHECK(log_sum_exp2(kNegInf, kNegInf) == kNegInf);
    CHECK(log_sum_exp2(kInf, 3.0) == kInf);

    // large shifts must not overflow
    std::vector<double> big{1000.0, 1000.0};
    CHECK(log_sum_exp(big) == Catch::Approx(1000.0 + std::log(2.0)));
}

TEST_CASE("inverse_square_tail matches direct summation") {
    for (long m : {0L, 1L, 5L, 12L, 100L}) {
        double direct = 0.0;
        for (long k = m + 1; k <= m + 4000000; ++k) direct += 1.0 / (double(k) * double(k));
        // direct sum still misses its own tail, about 1/(m+4e6)
        CHECK(inverse_square_tail(m) == Catch::Approx(direct).margin(3e-7));
    }
    // the full Basel sum
    CHECK(inverse_square_tail(0) == Catch::Approx(kBaselSum).epsilon(1e-14));
}

TEST_CASE("lsq_slope recovers a line") {
    std::vector<double> x{1, 2, 3, 4, 5}, y;
    for (double v : x) y.push_back(3.5 - 2.25 * v);
    CHECK(lsq_slope(x, y) == Catch::Approx(-2.25).margin(1e-12));
}

TEST_CASE("rng streams are deterministic and decorrelated") {
    RngStream a(42, 0), b(42, 0), c(42, 1);
    CHECK(a.next_u64() == b.next_u64());
    CHECK(a.next_u64() != c.next_u64());

    RngStream u(7, 3);
    double mean = 0.0;
    const int n = 100000;
    for (int i = 0; i < n; ++i) {
        const double x = u.uniform();
        REQUIRE(x >= 0.0);
        REQUIRE(x < 1.0);
        mean += x;
    }
    CHECK(mean / n == Catch::Approx(0.5).margin(0.005));

    RngStream e(11, 5);
    double emean = 0.0;
    for (int i = 0; i < n; ++i) emean += e.exponential(2.0);
    CHECK(emean / n == Catch::Approx(0.5).margin(0.01));
}

TEST_CASE("state codec round-trips") {
    RngStream rng(123, 0);
    for (int i = 0; i < 500; ++i) {
        const double raw = (rng.uniform() - 0.25) * std::pow(10.0, double(i % 9) - 3.0);
        State s(raw);
        CHECK(State::decode(s.encode()) == s);
    }
    CHECK(State::decode("2.5").coord() == 2.5);
    CHECK_THROWS_AS(State::decode("zebra"), InvalidParams);
    CHECK_THROWS_AS(State(std::numeric_limits<double>::infinity()), InvalidParams);
}
