#pragma once

// Device description: a single-mode cavity with 2N absorbers.
// All quantities are expressed in units of the comb spacing Delta.

#include "qmem/errors.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

namespace qmem {

struct Absorber {
    double detuning = 0.0; // Delta_n
    double g = 0.0;        // effective linewidth inside the cavity, 2|g0_n|^2 / kappa
    double gamma = 0.0;    // intrinsic amplitude decay

    friend bool operator==(const Absorber&, const Absorber&) = default;
};

struct MemoryConfig {
    double kappa = 100.0;
    std::vector<Absorber> absorbers;
    double unit_delta = 1.0;
    bool symmetric = false;

    std::size_t half_count() const noexcept { return absorbers.size() / 2; }
    bool lossless() const noexcept {
        return std::all_of(absorbers.begin(), absorbers.end(),
                           [](const Absorber& a) { return a.gamma == 0.0; });
    }

    friend bool operator==(const MemoryConfig&, const MemoryConfig&) = default;
};

// Gaussian input pulse, f(nu) = (2 pi sigma^2)^(-1/4) exp(-(nu - center)^2 / (4 sigma^2)).
struct InputPulse {
    double sigma = 0.4;
    double center = 0.0;
};

// Field-level validation. The symmetric flag is checked separately by is_symmetric()
// so that validation tooling can report it as an invariant violation.
inline void validate(const MemoryConfig& cfg) {
    auto fail = [](const std::string& msg) { throw Error(ErrorCode::InvalidArgument, msg); };
    if (!(cfg.kappa > 0.0) || !std::isfinite(cfg.kappa)) fail("kappa must be finite and > 0");
    if (!(cfg.unit_delta > 0.0) || !std::isfinite(cfg.unit_delta))
        fail("unit_delta must be finite and > 0");
    if (cfg.absorbers.size() % 2 != 0) fail("absorber count must be even");
    for (std::size_t i = 0; i < cfg.absorbers.size(); ++i) {
        const auto& a = cfg.absorbers[i];
        const std::string at = "absorbers[" + std::to_string(i) + "]";
        if (!std::isfinite(a.detuning) || a.detuning == 0.0)
            fail(at + ".detuning must be finite and nonzero");
        if (!(a.g >= 0.0) || !std::isfinite(a.g)) fail(at + ".g must be finite and >= 0");
        if (!(a.gamma >= 0.0) || !std::isfinite(a.gamma))
            fail(at + ".gamma must be finite and >= 0");
    }
}

inline void validate(const InputPulse& pulse) {
    if (!(pulse.sigma > 0.0) || !std::isfinite(pulse.sigma))
        throw Error(ErrorCode::InvalidArgument, "pulse sigma must be finite and > 0");
    if (!std::isfinite(pulse.center))
        throw Error(ErrorCode::InvalidArgument, "pulse center must be finite");
}

// Every absorber has a partner with negated detuning and equal g and gamma.
inline bool is_symmetric(const MemoryConfig& cfg, double tol = 1e-12) {
    const auto& abs = cfg.absorbers;
    std::vector<bool> used(abs.size(), false);
    for (std::size_t i = 0; i < abs.size(); ++i) {
        if (used[i]) continue;
        bool found = false;
        for (std::size_t j = 0; j < abs.size(); ++j) {
            if (j == i || used[j]) continue;
            const double scale = std::max(1.0, std::abs(abs[i].detuning));
            if (std::abs(abs[i].detuning + abs[j].detuning) <= tol * scale &&
                std::abs(abs[i].g - abs[j].g) <= tol * std::max(1.0, abs[i].g) &&
                std::abs(abs[i].gamma - abs[j].gamma) <= tol * std::max(1.0, abs[i].gamma)) {
                used[i] = used[j] = true;
                found = true;
                break;
            }
        }
        if (!found) return false;
    }
    return true;
}

// Absorbers with positive detuning, sorted by detuning. For symmetric configs this is
// the independent half n = 1..N.
inline std::vector<Absorber> positive_half(const MemoryConfig& cfg) {
    std::vector<Absorber> half;
    for (const auto& a : cfg.absorbers)
        if (a.detuning > 0.0) half.push_back(a);
    std::sort(half.begin(), half.end(),
              [](const Absorber& x, const Absorber& y) { return x.detuning < y.detuning; });
    return half;
}

// Mirror a positive half into a symmetric config, ordered by detuning.
inline MemoryConfig mirror(const std::vector<Absorber>& half, double kappa, double unit_delta = 1.0) {
    MemoryConfig cfg;
    cfg.kappa = kappa;
    cfg.unit_delta = unit_delta;
    cfg.symmetric = true;
    for (auto it = half.rbegin(); it != half.rend(); ++it)
        cfg.absorbers.push_back({-it->detuning, it->g, it->gamma});
    for (const auto& a : half) cfg.absorbers.push_back(a);
    std::sort(cfg.absorbers.begin(), cfg.absorbers.end(),
              [](const Absorber& x, const Absorber& y) { return x.detuning < y.detuning; });
    return cfg;
}

// Equidistant comb Delta_{+-n} = +-spacing (n - 1/2), n = 1..N, uniform g and gamma.
inline MemoryConfig equidistant_comb(std::size_t n_half, double g, double gamma, double kappa,
                                     double spacing = 1.0) {
    if (n_half == 0) throw Error(ErrorCode::InvalidArgument, "comb needs N >= 1");
    std::vector<Absorber> half;
    for (std::size_t n = 1; n <= n_half; ++n)
        half.push_back({spacing * (static_cast<double>(n) - 0.5), g, gamma});
    return mirror(half, kappa);
}

inline MemoryConfig with_uniform_coupling(MemoryConfig cfg, double g) {
    for (auto& a : cfg.absorbers) a.g = g;
    return cfg;
}

inline MemoryConfig with_uniform_loss(MemoryConfig cfg, double gamma) {
    for (auto& a : cfg.absorbers) a.gamma = gamma;
    return cfg;
}

// Broadband-cavity regime N Delta / kappa <= sqrt(gamma / Delta) << 1. Advisory only.
struct BroadbandDiagnostic {
    double span_ratio = 0.0;  // N / kappa
    double loss_scale = 0.0;  // sqrt(min gamma)
    bool holds = false;
};

inline BroadbandDiagnostic broadband_diagnostic(const MemoryConfig& cfg) {
    BroadbandDiagnostic d;
    d.span_ratio = static_cast<double>(cfg.half_count()) / cfg.kappa;
    double gmin = 0.0;
    if (!cfg.absorbers.empty()) {
        gmin = cfg.absorbers.front().gamma;
        for (const auto& a : cfg.absorbers) gmin = std::min(gmin, a.gamma);
    }
    d.loss_scale = std::sqrt(gmin);
    d.holds = d.span_ratio <= d.loss_scale && d.loss_scale < 1.0;
    return d;
}

} // namespace qmem
