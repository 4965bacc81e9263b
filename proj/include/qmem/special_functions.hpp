#pragma once

#include "qmem/errors.hpp"

#include <boost/multiprecision/cpp_int.hpp>

#include <algorithm>
#include <array>
#include <limits>
#include <cmath>
#include <string>

namespace qmem {

using BigRational = boost::multiprecision::cpp_rational;
using BigInt = boost::multiprecision::cpp_int;

inline constexpr int kMaxBernoulliIndex = 64;

struct BernoulliNumber {
    BigRational exact;
    double value = 0.0;
};

namespace detail {

// B_0..B_64 from sum_{k=0}^{m} C(m+1, k) B_k = 0 (convention B_1 = -1/2).
inline const std::array<BigRational, kMaxBernoulliIndex + 1>& bernoulli_table() {
    static const auto table = [] {
        std::array<BigRational, kMaxBernoulliIndex + 1> b;
        b[0] = 1;
        for (int m = 1; m <= kMaxBernoulliIndex; ++m) {
            BigRational acc = 0;
            BigInt binom = 1; // C(m+1, 0)
            for (int k = 0; k < m; ++k) {
                acc += BigRational(binom) * b[k];
                binom = binom * (m + 1 - k) / (k + 1);
            }
            b[m] = -acc / BigRational(m + 1);
        }
        return b;
    }();
    return table;
}

} // namespace detail

inline BernoulliNumber bernoulli(int m) {
    if (m < 0 || m % 2 != 0)
        throw Error(ErrorCode::InvalidArgument, "bernoulli index must be even and >= 0");
    if (m > kMaxBernoulliIndex)
        throw Error(ErrorCode::OutOfTable, "bernoulli index " + std::to_string(m) + " > 64");
    const auto& b = detail::bernoulli_table()[m];
    return {b, static_cast<double>(b)};
}

// (2^{2m+2} - 1) |B_{2m+2}| / (2m+2)!, the Taylor weight of tan(x/2) expressed in the
// matching conditions. Exact rational arithmetic, rounded once.
inline double matching_coefficient(int m) {
    if (m < 0 || 2 * m + 2 > kMaxBernoulliIndex)
        throw Error(ErrorCode::OutOfTable, "matching order out of table");
    const int k = 2 * m + 2;
    BigInt fact = 1;
    for (int j = 2; j <= k; ++j) fact *= j;
    BigRational b = detail::bernoulli_table()[k];
    if (b < 0) b = -b;
    const BigInt pow2 = BigInt(1) << k;
    return static_cast<double>(BigRational(pow2 - 1) * b / BigRational(fact));
}

// psi^{(m)}(x), m >= 1, x > 0. Lifts x above the threshold with
//   psi^{(m)}(x) = psi^{(m)}(x + 1) - (-1)^m m! / x^{m+1}
// and sums the Bernoulli asymptotic series there.
inline double polygamma(int m, double x, double threshold = 10.0) {
    if (m < 1) throw Error(ErrorCode::InvalidArgument, "polygamma order must be >= 1");
    if (!(x > 0.0) || !std::isfinite(x))
        throw Error(ErrorCode::DomainError, "polygamma requires finite x > 0");
    const double lift = std::max(threshold, 2.0 * m);
    const double sign = (m % 2 == 1) ? 1.0 : -1.0; // (-1)^{m+1}
    double mfact = 1.0;
    for (int j = 2; j <= m; ++j) mfact *= j;

    // Shifted terms all share the sign (-1)^{m+1}.
    double shifted = 0.0;
    while (x < lift) {
        shifted += std::pow(x, -(m + 1));
        x += 1.0;
    }
    shifted *= mfact;

    const double inv = 1.0 / x;
    const double xm = std::pow(x, -m);
    double series = (mfact / m) * xm + 0.5 * mfact * xm * inv;
    // c_k = (2k+m-1)! / (2k)!, starting at k = 1.
    double c = mfact * (m + 1) / 2.0;
    double xp = xm * inv * inv;
    double prev = std::numeric_limits<double>::infinity();
    const auto& table = detail::bernoulli_table();
    for (int k = 1; 2 * k <= kMaxBernoulliIndex; ++k) {
        const double term = static_cast<double>(table[2 * k]) * c * xp;
        if (std::abs(term) > prev) break; // series started to diverge
        series += term;
        if (std::abs(term) <= 1e-17 * std::abs(series)) break;
        prev = std::abs(term);
        c *= static_cast<double>(2 * k + m) * (2 * k + m + 1) / ((2.0 * k + 1) * (2.0 * k + 2));
        xp *= inv * inv;
    }
    return sign * (series + shifted);
}

} // namespace qmem
