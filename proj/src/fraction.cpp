// SPDX-License-Identifier: Apache-2.0
#include "sweepplan/fraction.hpp"

#include "sweepplan/error.hpp"

#include <charconv>
#include <numeric>

namespace sweepplan {

namespace {

__extension__ using i128 = __int128;

Fraction reduce(i128 num, i128 den) {
    if (den == 0) {
        throw Error(ErrorCode::Validation, "fraction with zero denominator");
    }
    if (den < 0) {
        num = -num;
        den = -den;
    }
    i128 a = num < 0 ? -num : num;
    i128 b = den;
    while (b != 0) {
        i128 t = a % b;
        a = b;
        b = t;
    }
    if (a > 1) {
        num /= a;
        den /= a;
    }
    constexpr i128 limit = INT64_MAX;
    if (num > limit || num < -limit || den > limit) {
        throw Error(ErrorCode::Validation, "fraction overflow");
    }
    return Fraction(static_cast<std::int64_t>(num), static_cast<std::int64_t>(den));
}

std::int64_t parse_int(std::string_view text, std::string_view whole) {
    std::int64_t value = 0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc() || ptr != text.data() + text.size() || text.empty()) {
        throw Error(ErrorCode::Parse, "malformed fraction '" + std::string(whole) + "'");
    }
    return value;
}

} // namespace

Fraction::Fraction(std::int64_t num, std::int64_t den) {
    if (den == 0) {
        throw Error(ErrorCode::Validation, "fraction with zero denominator");
    }
    if (den < 0) {
        num = -num;
        den = -den;
    }
    std::int64_t g = std::gcd(num < 0 ? -num : num, den);
    if (g > 1) {
        num /= g;
        den /= g;
    }
    num_ = num;
    den_ = den;
}

Fraction Fraction::parse(std::string_view text) {
    auto slash = text.find('/');
    if (slash == std::string_view::npos) {
        return Fraction(parse_int(text, text));
    }
    return Fraction(parse_int(text.substr(0, slash), text), parse_int(text.substr(slash + 1), text));
}

std::string Fraction::str() const {
    return std::to_string(num_) + "/" + std::to_string(den_);
}

Fraction Fraction::operator+(const Fraction& o) const {
    return reduce(i128(num_) * o.den_ + i128(o.num_) * den_, i128(den_) * o.den_);
}

Fraction Fraction::operator-(const Fraction& o) const {
    return reduce(i128(num_) * o.den_ - i128(o.num_) * den_, i128(den_) * o.den_);
}

Fraction Fraction::operator*(const Fraction& o) const {
    return reduce(i128(num_) * o.num_, i128(den_) * o.den_);
}

Fraction Fraction::operator/(const Fraction& o) const {
    return reduce(i128(num_) * o.den_, i128(den_) * o.num_);
}

std::strong_ordering Fraction::operator<=>(const Fraction& o) const {
    i128 lhs = i128(num_) * o.den_;
    i128 rhs = i128(o.num_) * den_;
    if (lhs < rhs) return std::strong_ordering::less;
    if (lhs > rhs) return std::strong_ordering::greater;
    return std::strong_ordering::equal;
}

std::int64_t floor_mul(const Fraction& value, std::int64_t n) {
    i128 prod = i128(value.num()) * n;
    i128 q = prod / value.den();
    if (prod % value.den() != 0 && prod < 0) {
        --q;
    }
    return static_cast<std::int64_t>(q);
}

} // namespace sweepplan
