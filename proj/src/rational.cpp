#include "kvflow/rational.hpp"

#include <charconv>
#include <cmath>
#include <limits>

namespace kvflow {

namespace {

__int128 gcd128(__int128 a, __int128 b) {
    if (a < 0) a = -a;
    if (b < 0) b = -b;
    while (b != 0) {
        __int128 t = a % b;
        a = b;
        b = t;
    }
    return a;
}

std::int64_t parse_int(std::string_view s) {
    std::int64_t v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) {
        throw std::invalid_argument("not an integer: '" + std::string(s) + "'");
    }
    return v;
}

}  // namespace

Rational::Rational(std::int64_t num, std::int64_t den) {
    if (den == 0) {
        throw std::invalid_argument("rational with zero denominator");
    }
    *this = from_wide(num, den);
}

Rational Rational::from_wide(__int128 num, __int128 den) {
    if (den == 0) {
        throw std::domain_error("rational division by zero");
    }
    if (den < 0) {
        num = -num;
        den = -den;
    }
    __int128 g = gcd128(num, den);
    if (g > 1) {
        num /= g;
        den /= g;
    }
    constexpr __int128 kMax = std::numeric_limits<std::int64_t>::max();
    if (num > kMax || num < -kMax || den > kMax) {
        throw std::overflow_error("rational overflow");
    }
    Rational r;
    r.num_ = static_cast<std::int64_t>(num);
    r.den_ = static_cast<std::int64_t>(den);
    return r;
}

std::int64_t Rational::floor() const {
    std::int64_t q = num_ / den_;
    if (num_ % den_ != 0 && num_ < 0) --q;
    return q;
}

std::int64_t Rational::ceil() const {
    std::int64_t q = num_ / den_;
    if (num_ % den_ != 0 && num_ > 0) ++q;
    return q;
}

Rational Rational::parse(std::string_view text) {
    while (!text.empty() && text.front() == ' ') text.remove_prefix(1);
    while (!text.empty() && text.back() == ' ') text.remove_suffix(1);
    if (auto slash = text.find('/'); slash != std::string_view::npos) {
        return Rational(parse_int(text.substr(0, slash)), parse_int(text.substr(slash + 1)));
    }
    if (auto dot = text.find('.'); dot != std::string_view::npos) {
        std::string_view whole = text.substr(0, dot);
        std::string_view digits = text.substr(dot + 1);
        if (digits.empty() || digits.size() > 15) {
            throw std::invalid_argument("bad decimal: '" + std::string(text) + "'");
        }
        bool negative = !whole.empty() && whole.front() == '-';
        if (negative) whole.remove_prefix(1);
        std::int64_t scale = 1;
        for (std::size_t i = 0; i < digits.size(); ++i) scale *= 10;
        std::int64_t w = whole.empty() ? 0 : parse_int(whole);
        std::int64_t f = parse_int(digits);
        if (w < 0 || f < 0) {
            throw std::invalid_argument("bad decimal: '" + std::string(text) + "'");
        }
        Rational r = Rational(w) + Rational(f, scale);
        return negative ? Rational(0) - r : r;
    }
    return Rational(parse_int(text));
}

Rational Rational::from_double(double value, std::int64_t max_den) {
    if (!std::isfinite(value)) {
        throw std::invalid_argument("non-finite value");
    }
    // Continued-fraction convergents.
    bool negative = value < 0;
    double x = std::fabs(value);
    std::int64_t p0 = 0, q0 = 1, p1 = 1, q1 = 0;
    for (int iter = 0; iter < 64; ++iter) {
        double a_d = std::floor(x);
        if (a_d > 9.0e15) break;
        auto a = static_cast<std::int64_t>(a_d);
        std::int64_t p2 = a * p1 + p0;
        std::int64_t q2 = a * q1 + q0;
        if (q2 > max_den) break;
        p0 = p1; q0 = q1; p1 = p2; q1 = q2;
        double rem = x - a_d;
        if (rem < 1e-12) break;
        x = 1.0 / rem;
    }
    if (q1 == 0) {
        throw std::invalid_argument("value out of range for rational");
    }
    return Rational(negative ? -p1 : p1, q1);
}

std::string Rational::to_string() const {
    if (den_ == 1) return std::to_string(num_);
    return std::to_string(num_) + "/" + std::to_string(den_);
}

Rational operator+(const Rational& a, const Rational& b) {
    return Rational::from_wide(static_cast<__int128>(a.num_) * b.den_ + static_cast<__int128>(b.num_) * a.den_,
                               static_cast<__int128>(a.den_) * b.den_);
}

Rational operator-(const Rational& a, const Rational& b) {
    return Rational::from_wide(static_cast<__int128>(a.num_) * b.den_ - static_cast<__int128>(b.num_) * a.den_,
                               static_cast<__int128>(a.den_) * b.den_);
}

Rational operator*(const Rational& a, const Rational& b) {
    return Rational::from_wide(static_cast<__int128>(a.num_) * b.num_, static_cast<__int128>(a.den_) * b.den_);
}

Rational operator/(const Rational& a, const Rational& b) {
    return Rational::from_wide(static_cast<__int128>(a.num_) * b.den_, static_cast<__int128>(a.den_) * b.num_);
}

int compare(const Rational& a, const Rational& b) {
    __int128 lhs = static_cast<__int128>(a.num_) * b.den_;
    __int128 rhs = static_cast<__int128>(b.num_) * a.den_;
    return lhs < rhs ? -1 : (lhs > rhs ? 1 : 0);
}

}  // namespace kvflow
