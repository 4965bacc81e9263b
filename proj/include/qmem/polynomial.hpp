#pragma once

// Dense complex polynomials (ascending coefficients) and simultaneous root finding.

#include "qmem/errors.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numbers>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace qmem {

using Polynomial = std::vector<std::complex<double>>;

inline Polynomial poly_multiply(const Polynomial& a, const Polynomial& b) {
    if (a.empty() || b.empty()) return {};
    Polynomial out(a.size() + b.size() - 1, 0.0);
    for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t j = 0; j < b.size(); ++j) out[i + j] += a[i] * b[j];
    return out;
}

inline Polynomial poly_add(Polynomial a, const Polynomial& b) {
    if (a.size() < b.size()) a.resize(b.size(), 0.0);
    for (std::size_t i = 0; i < b.size(); ++i) a[i] += b[i];
    return a;
}

inline Polynomial poly_scale(Polynomial a, std::complex<double> s) {
    for (auto& c : a) c *= s;
    return a;
}

struct PolyValue {
    std::complex<double> value;
    std::complex<double> derivative;
    double magnitude_bound; // sum |a_k| |z|^k, the rounding scale of the evaluation
};

inline PolyValue poly_eval(std::span<const std::complex<double>> a, std::complex<double> z) {
    std::complex<double> p = 0.0;
    std::complex<double> dp = 0.0;
    double bound = 0.0;
    const double r = std::abs(z);
    for (std::size_t k = a.size(); k-- > 0;) {
        dp = dp * z + p;
        p = p * z + a[k];
        bound = bound * r + std::abs(a[k]);
    }
    return {p, dp, bound};
}

struct RootOptions {
    int max_iterations = 500;
    int restarts = 3;
    std::uint64_t seed = 0;
    double residual_tol = 1e-10; // |P/P'| relative to max(1, |z|)
};

namespace detail {

// Starting points on circles whose radii come from the upper convex hull of
// (k, log|a_k|) (Newton polygon), which separates roots of very different magnitude.
inline std::vector<std::complex<double>> aberth_start(std::span<const std::complex<double>> a,
                                                      double phase) {
    const std::size_t n = a.size() - 1;
    std::vector<std::size_t> hull;
    std::vector<double> lg(a.size());
    for (std::size_t k = 0; k < a.size(); ++k)
        lg[k] = a[k] == 0.0 ? -std::numeric_limits<double>::infinity() : std::log(std::abs(a[k]));
    for (std::size_t k = 0; k < a.size(); ++k) {
        if (!std::isfinite(lg[k])) continue;
        while (hull.size() >= 2) {
            const std::size_t i = hull[hull.size() - 2];
            const std::size_t j = hull.back();
            const double cross = (static_cast<double>(j) - i) * (lg[k] - lg[i]) -
                                 (lg[j] - lg[i]) * (static_cast<double>(k) - i);
            if (cross >= 0.0) hull.pop_back();
            else break;
        }
        hull.push_back(k);
    }
    std::vector<std::complex<double>> z;
    z.reserve(n);
    const double two_pi = 2.0 * std::numbers::pi;
    for (std::size_t s = 0; s + 1 < hull.size(); ++s) {
        const std::size_t i = hull[s];
        const std::size_t j = hull[s + 1];
        const std::size_t count = j - i;
        const double radius = std::exp((lg[i] - lg[j]) / static_cast<double>(count));
        for (std::size_t q = 0; q < count; ++q) {
            const double ang = two_pi * static_cast<double>(q) / static_cast<double>(count) +
                               two_pi * static_cast<double>(s) / static_cast<double>(n) + phase;
            z.push_back(std::polar(radius, ang));
        }
    }
    // Zero roots (a_0 = 0 ...) are placed near the origin.
    while (z.size() < n) z.push_back(std::polar(1e-3, phase + static_cast<double>(z.size())));
    return z;
}

} // namespace detail

// All roots of a polynomial of exact degree size-1 (leading coefficient nonzero).
inline std::vector<std::complex<double>> polynomial_roots(std::span<const std::complex<double>> a,
                                                          const RootOptions& opt = {}) {
    if (a.size() < 2 || a.back() == 0.0)
        throw Error(ErrorCode::InvalidArgument, "polynomial needs degree >= 1 and nonzero leading term");
    const std::size_t n = a.size() - 1;
    constexpr double eps = std::numeric_limits<double>::epsilon();
    std::mt19937_64 rng(opt.seed);
    std::uniform_real_distribution<double> jitter(0.0, 2.0 * std::numbers::pi);

    for (int attempt = 0; attempt <= opt.restarts; ++attempt) {
        auto z = detail::aberth_start(a, 0.4 + (attempt == 0 ? 0.0 : jitter(rng)));
        if (attempt > 0)
            for (auto& zi : z) zi *= 1.0 + 0.1 * std::sin(jitter(rng));
        std::vector<bool> done(n, false);
        int iter = 0;
        for (; iter < opt.max_iterations; ++iter) {
            bool all_done = true;
            for (std::size_t i = 0; i < n; ++i) {
                if (done[i]) continue;
                const auto pv = poly_eval(a, z[i]);
                if (std::abs(pv.value) <= 4.0 * eps * pv.magnitude_bound) {
                    done[i] = true;
                    continue;
                }
                all_done = false;
                const std::complex<double> ratio = pv.value / pv.derivative;
                std::complex<double> repulsion = 0.0;
                for (std::size_t j = 0; j < n; ++j)
                    if (j != i) repulsion += 1.0 / (z[i] - z[j]);
                const std::complex<double> w = ratio / (1.0 - ratio * repulsion);
                if (!std::isfinite(w.real()) || !std::isfinite(w.imag())) break;
                z[i] -= w;
                if (std::abs(w) <= 2.0 * eps * std::abs(z[i])) done[i] = true;
            }
            if (all_done) break;
        }
        if (iter >= opt.max_iterations) continue;

        // Newton polish, then accept either a small Newton step or a backward-stable
        // residual (the latter covers clustered/multiple roots).
        bool ok = true;
        for (auto& zi : z) {
            for (int k = 0; k < 3; ++k) {
                const auto pv = poly_eval(a, zi);
                if (pv.derivative == 0.0) break;
                const auto cand = zi - pv.value / pv.derivative;
                if (std::abs(poly_eval(a, cand).value) < std::abs(pv.value)) zi = cand;
                else break;
            }
            const auto pv = poly_eval(a, zi);
            const double step = pv.derivative == 0.0 ? std::numeric_limits<double>::infinity()
                                                     : std::abs(pv.value / pv.derivative);
            const bool newton_ok = step <= opt.residual_tol * std::max(1.0, std::abs(zi));
            const bool backward_ok = std::abs(pv.value) <= 16.0 * eps * pv.magnitude_bound;
            if (!(std::isfinite(zi.real()) && std::isfinite(zi.imag())) || !(newton_ok || backward_ok))
                ok = false;
        }
        if (ok) return z;
    }
    throw Error(ErrorCode::RootFindingStalled,
                "Aberth iteration did not converge for degree " + std::to_string(n));
}

} // namespace qmem
