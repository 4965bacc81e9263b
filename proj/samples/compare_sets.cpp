// Band error of the initial and optimized N = 2 sets at three loss levels.
//
//   qmem_sample [band_half_width]

#include "qmem/qmem.hpp"

#include <cstdio>
#include <cstdlib>
#include <string>

int main(int argc, char** argv) {
    using namespace qmem;
    const double half = argc > 1 ? std::atof(argv[1]) : 0.6;
    const double kappa = 1e4;
    const MemoryConfig initial = mirror({{0.5, 0.318, 0.0}, {1.5, 0.318, 0.0}}, kappa);
    const MemoryConfig optimized = mirror({{0.5, 0.318, 0.0}, {1.92, 1.09, 0.0}}, kappa);
    const auto grid = linear_grid(-half, half, 241);

    std::printf("%-10s %-8s %-14s %-14s %-10s\n", "set", "gamma", "T0_fit", "max_dS2", "min_eta");
    for (const auto* name : {"initial", "optimized"}) {
        const auto& base = std::string(name) == "initial" ? initial : optimized;
        for (double gamma : {1e-4, 1e-3, 1e-2}) {
            const auto cfg = with_uniform_loss(base, gamma);
            const auto fit = fit_reference_delay(cfg, grid);
            double eta = 1.0;
            for (double nu : grid) eta = std::min(eta, spectral_efficiency(cfg, nu));
            std::printf("%-10s %-8.0e %-14.6f %-14.4e %-10.6f\n", name, gamma, fit.t0, fit.max_error, eta);
        }
    }
    return 0;
}
