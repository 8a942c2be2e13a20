#pragma once

#include <charconv>
#include <cmath>
#include <compare>
#include <string>
#include <string_view>

#include "riskstop/errors.hpp"

namespace riskstop {

/// A chain state: an identifier with a total order and an embedding into a
/// real coordinate. The coordinate is what the cost functions consume and
/// what reports print; equality is exact (states produced by the built-in
/// kernels are integers or integer offsets of the base point, so coordinate
/// arithmetic is reproducible).
class State {
public:
    State() : coord_(0.0) {}

    explicit State(double coord) : coord_(coord) {
        if (!std::isfinite(coord)) throw InvalidParams("state coordinate must be finite");
    }

    double coord() const { return coord_; }

    friend bool operator==(const State& a, const State& b) { return a.coord_ == b.coord_; }
    friend std::strong_ordering operator<=>(const State& a, const State& b) {
        // finite by invariant, so the double order is total
        if (a.coord_ < b.coord_) return std::strong_ordering::less;
        if (a.coord_ > b.coord_) return std::strong_ordering::greater;
        return std::strong_ordering::equal;
    }

    /// Shortest decimal representation that round-trips exactly.
    std::string encode() const {
        char buf[32];
        auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), coord_);
        return std::string(buf, p);
    }

    static State decode(std::string_view s) {
        double v = 0.0;
        auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
        if (ec != std::errc{} || p != s.data() + s.size())
            throw InvalidParams("cannot decode state '" + std::string(s) + "'");
        return State(v);
    }

private:
    double coord_;
};

} // namespace riskstop
