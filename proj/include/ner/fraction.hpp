#pragma once

#include <cstdint>
#include <numeric>
#include <string>

#include "ner/errors.hpp"

namespace ner {

// Exact non-negative rational. Split fractions are kept as rationals so that
// "sums to exactly 1" and the floor cut points are integer arithmetic, not
// floating point.
struct Fraction {
    std::int64_t num = 0;
    std::int64_t den = 1;

    Fraction() = default;
    Fraction(std::int64_t n, std::int64_t d) : num(n), den(d) {
        if (d <= 0 || n < 0) throw ConfigError("fraction must be non-negative with positive denominator");
        normalize();
    }

    void normalize() {
        const std::int64_t g = std::gcd(num, den);
        if (g > 1) {
            num /= g;
            den /= g;
        }
    }

    friend Fraction operator+(const Fraction& a, const Fraction& b) {
        return Fraction(a.num * b.den + b.num * a.den, a.den * b.den);
    }
    friend bool operator==(const Fraction& a, const Fraction& b) {
        return a.num == b.num && a.den == b.den;
    }

    bool is_one() const { return num == den; }

    // floor(f * n), exact.
    std::size_t floor_times(std::size_t n) const {
        return static_cast<std::size_t>((num * static_cast<std::int64_t>(n)) / den);
    }

    // Parses "0.7", ".15", "70/100" or "1".
    static Fraction parse(const std::string& text);

    std::string str() const { return std::to_string(num) + "/" + std::to_string(den); }
};

inline Fraction Fraction::parse(const std::string& text) {
    if (text.empty()) throw ConfigError("empty fraction");
    const auto slash = text.find('/');
    if (slash != std::string::npos) {
        const std::int64_t n = std::stoll(text.substr(0, slash));
        const std::int64_t d = std::stoll(text.substr(slash + 1));
        return Fraction(n, d);
    }
    const auto dot = text.find('.');
    if (dot == std::string::npos) {
        return Fraction(std::stoll(text), 1);
    }
    const std::string whole = text.substr(0, dot);
    const std::string frac = text.substr(dot + 1);
    if (frac.size() > 15) throw ConfigError("fraction '" + text + "' has too many decimal places");
    std::int64_t den = 1;
    for (std::size_t i = 0; i < frac.size(); ++i) den *= 10;
    const std::int64_t w = whole.empty() ? 0 : std::stoll(whole);
    const std::int64_t f = frac.empty() ? 0 : std::stoll(frac);
    return Fraction(w * den + f, den);
}

}  // namespace ner
