#pragma once

// Seeded generators for property tests.

#include "qmem/config.hpp"

#include <algorithm>
#include <cstddef>
#include <random>
#include <vector>

namespace qmem::fixtures {

// Symmetric comb with N pairs, increasing detunings separated by at least min_gap.
inline MemoryConfig random_symmetric(std::mt19937_64& rng, std::size_t n_half, double gamma_max,
                                     double kappa_lo = 20.0, double kappa_hi = 400.0,
                                     double min_gap = 0.2) {
    std::uniform_real_distribution<double> gap(min_gap, 1.2);
    std::uniform_real_distribution<double> coupling(0.02, 1.2);
    std::uniform_real_distribution<double> loss(0.0, gamma_max);
    std::uniform_real_distribution<double> kap(kappa_lo, kappa_hi);
    std::vector<Absorber> half;
    double d = 0.0;
    for (std::size_t n = 0; n < n_half; ++n) {
        d += gap(rng);
        half.push_back({d, coupling(rng), gamma_max > 0.0 ? loss(rng) : 0.0});
    }
    return mirror(half, kap(rng));
}

inline MemoryConfig random_asymmetric(std::mt19937_64& rng, std::size_t pairs, double gamma_max) {
    std::uniform_real_distribution<double> det(-3.0, 3.0);
    std::uniform_real_distribution<double> coupling(0.02, 1.0);
    std::uniform_real_distribution<double> loss(0.0, gamma_max);
    std::uniform_real_distribution<double> kap(20.0, 400.0);
    MemoryConfig cfg;
    cfg.kappa = kap(rng);
    while (cfg.absorbers.size() < 2 * pairs) {
        const double d = det(rng);
        if (std::abs(d) < 0.05) continue;
        cfg.absorbers.push_back({d, coupling(rng), gamma_max > 0.0 ? loss(rng) : 0.0});
    }
    return cfg;
}

} // namespace qmem::fixtures
