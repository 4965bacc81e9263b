#pragma once

// Frequency-domain model of absorbers in a common single-mode cavity.
//
//   F(nu) = 2 nu / kappa + sum_n g_n / (Delta_n - i gamma_n - nu)
//   S(nu) = (1 + i F) / (1 - i F)
//
// S is the ratio of output to input spectral amplitudes. Frequencies are counted from
// the carrier and measured in units of the comb spacing.

#include "qmem/config.hpp"
#include "qmem/errors.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <limits>
#include <numbers>
#include <span>
#include <string>
#include <vector>

namespace qmem {

using cdouble = std::complex<double>;
inline constexpr double pi = std::numbers::pi;

namespace detail {

inline double pole_tolerance(double nu) {
    return 8.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(nu));
}

inline cdouble cayley(cdouble f) {
    const cdouble i(0.0, 1.0);
    return (1.0 + i * f) / (1.0 - i * f);
}

// S(nu) with the continuous limit S = -1 on an exact lossless pole of F. Used inside
// quadratures and phase walks where S itself is smooth.
inline cdouble transfer_continuous(const MemoryConfig& cfg, double nu) {
    cdouble f = 2.0 * nu / cfg.kappa;
    for (const auto& a : cfg.absorbers) {
        if (a.g == 0.0) continue;
        const cdouble den(a.detuning - nu, -a.gamma);
        if (den == 0.0) return {-1.0, 0.0};
        f += a.g / den;
    }
    return cayley(f);
}

inline double wrap_phase(double x) {
    x = std::remainder(x, 2.0 * pi);
    return x <= -pi ? x + 2.0 * pi : x;
}

} // namespace detail

inline cdouble response_fn(const MemoryConfig& cfg, double nu) {
    if (!std::isfinite(nu)) throw Error(ErrorCode::InvalidArgument, "frequency must be finite");
    cdouble f = 2.0 * nu / cfg.kappa;
    for (const auto& a : cfg.absorbers) {
        if (a.g == 0.0) continue;
        if (a.gamma == 0.0 && std::abs(a.detuning - nu) <= detail::pole_tolerance(nu))
            throw Error(ErrorCode::PoleHit,
                        "nu = " + std::to_string(nu) + " sits on a lossless absorber line");
        f += a.g / cdouble(a.detuning - nu, -a.gamma);
    }
    return f;
}

// dF/dnu.
inline cdouble response_derivative(const MemoryConfig& cfg, double nu) {
    cdouble df = 2.0 / cfg.kappa;
    for (const auto& a : cfg.absorbers) {
        if (a.g == 0.0) continue;
        const cdouble den(a.detuning - nu, -a.gamma);
        if (a.gamma == 0.0 && std::abs(den) <= detail::pole_tolerance(nu))
            throw Error(ErrorCode::PoleHit, "derivative requested on a lossless line");
        df += a.g / (den * den);
    }
    return df;
}

inline cdouble transfer_fn(const MemoryConfig& cfg, double nu) {
    return detail::cayley(response_fn(cfg, nu));
}

inline double spectral_efficiency(const MemoryConfig& cfg, double nu) {
    return std::norm(transfer_fn(cfg, nu));
}

// d arg S / d nu = Re[2 F' / (1 + F^2)].
inline double phase_slope(const MemoryConfig& cfg, double nu) {
    const cdouble f = response_fn(cfg, nu);
    const cdouble df = response_derivative(cfg, nu);
    return std::real(2.0 * df / (1.0 + f * f));
}

// Full delay at nu = 0 from the phase slope, including the cavity term 4/kappa for
// symmetric lossless configs.
inline double t0_analytic(const MemoryConfig& cfg) { return phase_slope(cfg, 0.0); }

// Broadband truncation T(0) = 2 sum_all g_n / Delta_n^2 (= 4 sum_{n=1..N} for
// symmetric configs), the form used by the matching conditions.
inline double t0_matching(const MemoryConfig& cfg) {
    double t = 0.0;
    for (const auto& a : cfg.absorbers) t += a.g / (a.detuning * a.detuning);
    return 2.0 * t;
}

struct PhaseOptions {
    double max_step = 0.01;
    double min_step = 1e-6;         // smallest walk step near a pole
    double refine_threshold = pi / 4.0;
    double jump_threshold = 0.9 * pi;
};

namespace detail {

// Lower bound on the width of the narrowest spectral feature of S: each coupled line
// with background response F_bg has width about (g + gamma) / (1 + F_bg^2).
inline double feature_width(const MemoryConfig& cfg) {
    double w = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < cfg.absorbers.size(); ++k) {
        const auto& a = cfg.absorbers[k];
        if (a.g == 0.0) continue;
        cdouble bg = 2.0 * a.detuning / cfg.kappa;
        for (std::size_t j = 0; j < cfg.absorbers.size(); ++j) {
            const auto& b = cfg.absorbers[j];
            if (j == k || b.g == 0.0) continue;
            const cdouble den(b.detuning - a.detuning, -b.gamma);
            if (den == 0.0) continue;
            bg += b.g / den;
        }
        w = std::min(w, (a.g + a.gamma) / (1.0 + std::norm(bg)));
    }
    return w;
}

// Advance the continuous phase of S from (nu_from, phase_from) to nu_to with an adaptive
// walk whose step halves wherever the wrapped increment grows large.
inline double walk_phase(const MemoryConfig& cfg, double nu_from, double phase_from, double nu_to,
                         const PhaseOptions& opt) {
    if (nu_from == nu_to) return phase_from;
    const double cap = std::min(opt.max_step, std::max(opt.min_step, feature_width(cfg) / 8.0));
    const double dir = nu_to > nu_from ? 1.0 : -1.0;
    double nu = nu_from;
    double phase = phase_from;
    double raw = std::arg(transfer_continuous(cfg, nu));
    double h = cap;
    while (dir * (nu_to - nu) > 0.0) {
        const double next = dir > 0.0 ? std::min(nu + h, nu_to) : std::max(nu - h, nu_to);
        const double raw_next = std::arg(transfer_continuous(cfg, next));
        const double d = wrap_phase(raw_next - raw);
        if (std::abs(d) > opt.refine_threshold && h > opt.min_step) {
            h = std::max(h / 2.0, opt.min_step);
            continue;
        }
        if (std::abs(d) >= opt.jump_threshold)
            throw Error(ErrorCode::UnwrapAmbiguity,
                        "phase jump near nu = " + std::to_string(next) + " at minimum step");
        phase += d;
        raw = raw_next;
        nu = next;
        if (std::abs(d) < opt.refine_threshold / 4.0) h = std::min(2.0 * h, cap);
    }
    return phase;
}

} // namespace detail

// Continuous phase of S(nu), anchored at the principal value of arg S(0).
inline double continuous_phase(const MemoryConfig& cfg, double nu, const PhaseOptions& opt = {}) {
    const double phase0 = std::arg(detail::transfer_continuous(cfg, 0.0));
    return detail::walk_phase(cfg, 0.0, phase0, nu, opt);
}

// T(nu) = unwrapped arg S(nu) / nu, with the phase slope as the nu -> 0 limit.
inline double delay_time(const MemoryConfig& cfg, double nu, const PhaseOptions& opt = {}) {
    if (nu == 0.0) return t0_analytic(cfg);
    return continuous_phase(cfg, nu, opt) / nu;
}

// Cumulative unwrap of sampled values along an increasing grid, anchored at
// anchor_index to anchor_phase. Raises when an increment is too close to pi to be
// attributed to a direction.
inline std::vector<double> unwrap_phase(std::span<const cdouble> s, std::size_t anchor_index,
                                        double anchor_phase, double jump_threshold = 0.9 * pi) {
    std::vector<double> out(s.size());
    if (s.empty()) return out;
    if (anchor_index >= s.size()) throw Error(ErrorCode::InvalidArgument, "anchor out of range");
    out[anchor_index] = anchor_phase;
    auto step = [&](std::size_t from, std::size_t to) {
        const double d = detail::wrap_phase(std::arg(s[to]) - std::arg(s[from]));
        if (std::abs(d) >= jump_threshold)
            throw Error(ErrorCode::UnwrapAmbiguity,
                        "grid too coarse between samples " + std::to_string(from) + " and " +
                            std::to_string(to));
        out[to] = out[from] + d;
    };
    for (std::size_t k = anchor_index + 1; k < s.size(); ++k) step(k - 1, k);
    for (std::size_t k = anchor_index; k-- > 0;) step(k + 1, k);
    return out;
}

inline std::size_t index_nearest_zero(std::span<const double> grid) {
    std::size_t best = 0;
    for (std::size_t k = 1; k < grid.size(); ++k)
        if (std::abs(grid[k]) < std::abs(grid[best])) best = k;
    return best;
}

inline void require_increasing(std::span<const double> grid) {
    for (std::size_t k = 1; k < grid.size(); ++k)
        if (!(grid[k] > grid[k - 1]))
            throw Error(ErrorCode::InvalidArgument, "frequency grid must be strictly increasing");
}

// Delay profile from raw samples of some transfer function. The sample nearest nu = 0
// anchors the branch at its principal value.
inline std::vector<double> delay_from_samples(std::span<const double> grid,
                                              std::span<const cdouble> s,
                                              double jump_threshold = 0.9 * pi) {
    require_increasing(grid);
    if (grid.size() != s.size()) throw Error(ErrorCode::InvalidArgument, "size mismatch");
    const std::size_t k0 = index_nearest_zero(grid);
    auto phase = unwrap_phase(s, k0, std::arg(s[k0]), jump_threshold);
    for (std::size_t k = 0; k < grid.size(); ++k) phase[k] = grid[k] != 0.0 ? phase[k] / grid[k] : NAN;
    return phase;
}

inline double spectral_error_value(cdouble s, double nu, double t0) {
    return std::abs(s * s - std::polar(1.0, 2.0 * nu * t0));
}

// delta S^2 = |S^2 - exp(2 i nu T0)|.
inline double spectral_error(const MemoryConfig& cfg, double nu, double t0) {
    return spectral_error_value(transfer_fn(cfg, nu), nu, t0);
}

struct Decibel {
    double value = 0.0;
    bool clamped = false;
};

inline Decibel dbs(double delta_s2, double floor = 1e-300) {
    const bool clamped = !(delta_s2 > floor);
    return {10.0 * std::log10(clamped ? floor : delta_s2), clamped};
}

struct SpectrumSample {
    std::vector<double> nu;
    std::vector<cdouble> s;
    std::vector<double> phase;
    std::vector<double> delay;
    std::vector<double> efficiency;
    std::vector<double> error;
    std::vector<double> dbs;
    std::vector<bool> dbs_clamped;
    double t0_reference = 0.0;
};

// Evaluates S on a strictly increasing grid. The phase at each grid point is carried
// from nu = 0 by an adaptive walk, so the grid spacing never affects the branch.
inline SpectrumSample sample_spectrum(const MemoryConfig& cfg, std::span<const double> grid,
                                      double t0_reference, const PhaseOptions& opt = {},
                                      double dbs_floor = 1e-300) {
    require_increasing(grid);
    SpectrumSample out;
    out.t0_reference = t0_reference;
    const std::size_t n = grid.size();
    out.nu.assign(grid.begin(), grid.end());
    out.s.resize(n);
    out.phase.resize(n);
    out.delay.resize(n);
    out.efficiency.resize(n);
    out.error.resize(n);
    out.dbs.resize(n);
    out.dbs_clamped.resize(n);
    for (std::size_t k = 0; k < n; ++k) {
        out.s[k] = transfer_fn(cfg, grid[k]);
        out.efficiency[k] = std::norm(out.s[k]);
        out.error[k] = spectral_error_value(out.s[k], grid[k], t0_reference);
        const auto db = dbs(out.error[k], dbs_floor);
        out.dbs[k] = db.value;
        out.dbs_clamped[k] = db.clamped;
    }
    if (n == 0) return out;
    const std::size_t k0 = index_nearest_zero(grid);
    out.phase[k0] = continuous_phase(cfg, grid[k0], opt);
    for (std::size_t k = k0 + 1; k < n; ++k)
        out.phase[k] = detail::walk_phase(cfg, grid[k - 1], out.phase[k - 1], grid[k], opt);
    for (std::size_t k = k0; k-- > 0;)
        out.phase[k] = detail::walk_phase(cfg, grid[k + 1], out.phase[k + 1], grid[k], opt);
    for (std::size_t k = 0; k < n; ++k)
        out.delay[k] = grid[k] == 0.0 ? t0_analytic(cfg) : out.phase[k] / grid[k];
    return out;
}

// Uniform grid on [lo, hi] with `points` samples.
inline std::vector<double> linear_grid(double lo, double hi, std::size_t points) {
    if (points == 0) return {};
    if (points == 1) return {lo};
    std::vector<double> g(points);
    for (std::size_t k = 0; k < points; ++k)
        g[k] = lo + (hi - lo) * static_cast<double>(k) / static_cast<double>(points - 1);
    return g;
}

// Uniform grid nudged off every lossless absorber line by min_offset.
inline std::vector<double> pole_safe_grid(const MemoryConfig& cfg, double lo, double hi,
                                          std::size_t points, double min_offset = 1e-6) {
    auto g = linear_grid(lo, hi, points);
    for (auto& nu : g)
        for (const auto& a : cfg.absorbers)
            if (a.gamma == 0.0 && a.g != 0.0 && std::abs(nu - a.detuning) < min_offset)
                nu = a.detuning + (nu >= a.detuning ? min_offset : -min_offset);
    return g;
}

inline double band_error(const MemoryConfig& cfg, std::span<const double> grid, double t0) {
    double worst = 0.0;
    for (double nu : grid) worst = std::max(worst, spectral_error(cfg, nu, t0));
    return worst;
}

struct ReferenceFit {
    double t0 = 0.0;
    double max_error = 0.0;
};

// Reference delay minimizing max_k |S_k^2 - exp(2 i nu_k T)| over the grid: coarse scan
// around the analytic slope, then golden-section refinement of the best cell.
inline ReferenceFit fit_reference_delay(const MemoryConfig& cfg, std::span<const double> grid) {
    std::vector<cdouble> s2(grid.size());
    for (std::size_t k = 0; k < grid.size(); ++k) {
        const cdouble s = transfer_fn(cfg, grid[k]);
        s2[k] = s * s;
    }
    auto cost = [&](double t) {
        double worst = 0.0;
        for (std::size_t k = 0; k < grid.size(); ++k)
            worst = std::max(worst, std::abs(s2[k] - std::polar(1.0, 2.0 * grid[k] * t)));
        return worst;
    };
    const double centre = t0_analytic(cfg);
    const double half = 0.1 * std::abs(centre) + 0.05;
    constexpr int scan = 40;
    double best_t = centre;
    double best_c = cost(centre);
    for (int k = 0; k <= scan; ++k) {
        const double t = centre - half + 2.0 * half * k / scan;
        const double c = cost(t);
        if (c < best_c) {
            best_c = c;
            best_t = t;
        }
    }
    const double cell = 2.0 * half / scan;
    double a = best_t - cell;
    double b = best_t + cell;
    const double r = (std::sqrt(5.0) - 1.0) / 2.0;
    double x1 = b - r * (b - a);
    double x2 = a + r * (b - a);
    double f1 = cost(x1);
    double f2 = cost(x2);
    while (b - a > 1e-12 * std::max(1.0, std::abs(best_t))) {
        if (f1 < f2) {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - r * (b - a);
            f1 = cost(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + r * (b - a);
            f2 = cost(x2);
        }
    }
    const double t = 0.5 * (a + b);
    const double c = cost(t);
    return c < best_c ? ReferenceFit{t, c} : ReferenceFit{best_t, best_c};
}

inline double gaussian_spectrum(const InputPulse& pulse, double nu) {
    const double x = nu - pulse.center;
    return std::pow(2.0 * pi * pulse.sigma * pulse.sigma, -0.25) *
           std::exp(-x * x / (4.0 * pulse.sigma * pulse.sigma));
}

struct QuadratureOptions {
    double rel_tol = 1e-6;
    double band_sigmas = 12.0;
    int max_levels = 12;
};

namespace detail {

// Trapezoid on [lo, hi] with successive halving until two levels agree to rel_tol.
template <class Integrand>
cdouble refined_trapezoid(Integrand&& f, double lo, double hi, double h0, double rel_tol,
                          int max_levels) {
    std::size_t n = static_cast<std::size_t>(std::ceil((hi - lo) / h0));
    n = std::max<std::size_t>(n, 16);
    double h = (hi - lo) / static_cast<double>(n);
    cdouble sum = 0.5 * (f(lo) + f(hi));
    for (std::size_t k = 1; k < n; ++k) sum += f(lo + h * static_cast<double>(k));
    cdouble prev = sum * h;
    for (int level = 1; level <= max_levels; ++level) {
        cdouble mid = 0.0;
        for (std::size_t k = 0; k < n; ++k) mid += f(lo + h * (static_cast<double>(k) + 0.5));
        sum += mid;
        n *= 2;
        h /= 2.0;
        const cdouble cur = sum * h;
        if (level >= 2 && std::abs(cur - prev) <= rel_tol * std::abs(cur)) return cur;
        prev = cur;
    }
    throw Error(ErrorCode::QuadratureNotConverged,
                "trapezoid refinement did not reach tolerance " + std::to_string(rel_tol));
}

} // namespace detail

// I_echo = |int e^{-i nu T} S(nu) f(nu) dnu|^2 / |int f(nu) dnu|^2 for an arbitrary
// transfer function; feature_width bounds the initial grid spacing.
template <class Transfer>
double echo_intensity_of(Transfer&& s_of_nu, double t, const InputPulse& pulse,
                         double feature_width, const QuadratureOptions& opt = {}) {
    validate(pulse);
    const double lo = pulse.center - opt.band_sigmas * pulse.sigma;
    const double hi = pulse.center + opt.band_sigmas * pulse.sigma;
    const double h0 = std::min(pulse.sigma / 4.0, feature_width / 4.0);
    const cdouble num = detail::refined_trapezoid(
        [&](double nu) {
            return std::polar(1.0, -nu * t) * s_of_nu(nu) * gaussian_spectrum(pulse, nu);
        },
        lo, hi, h0, opt.rel_tol, opt.max_levels);
    const cdouble den = detail::refined_trapezoid(
        [&](double nu) { return cdouble(gaussian_spectrum(pulse, nu)); }, lo, hi, h0,
        opt.rel_tol, opt.max_levels);
    return std::norm(num) / std::norm(den);
}

inline double echo_intensity(const MemoryConfig& cfg, double t, const InputPulse& pulse,
                             const QuadratureOptions& opt = {}) {
    const double w = std::max(detail::feature_width(cfg), 1e-6);
    return echo_intensity_of([&](double nu) { return detail::transfer_continuous(cfg, nu); }, t,
                             pulse, w, opt);
}

} // namespace qmem
