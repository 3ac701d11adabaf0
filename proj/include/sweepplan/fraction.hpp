// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <compare>
#include <cstdint>
#include <string>
#include <string_view>

namespace sweepplan {

/// Exact non-negative-denominator rational. Language ratios and stage
/// proportions live on dyadic grids, so keeping them exact lets the
/// split/round-trip identities hold without tolerance.
class Fraction {
public:
    constexpr Fraction() = default;
    Fraction(std::int64_t num, std::int64_t den = 1);

    static Fraction parse(std::string_view text);

    constexpr std::int64_t num() const { return num_; }
    constexpr std::int64_t den() const { return den_; }

    double to_double() const { return static_cast<double>(num_) / static_cast<double>(den_); }
    std::string str() const;

    Fraction operator+(const Fraction& o) const;
    Fraction operator-(const Fraction& o) const;
    Fraction operator*(const Fraction& o) const;
    Fraction operator/(const Fraction& o) const;

    bool operator==(const Fraction& o) const = default;
    std::strong_ordering operator<=>(const Fraction& o) const;

private:
    std::int64_t num_ = 0;
    std::int64_t den_ = 1;
};

/// floor(value * n) for integer n, computed without rounding error.
std::int64_t floor_mul(const Fraction& value, std::int64_t n);

} // namespace sweepplan
