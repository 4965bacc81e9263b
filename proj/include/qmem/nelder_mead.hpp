#pragma once

// Derivative-free simplex minimizer with dimension-adaptive coefficients
// (reflection 1, expansion 1 + 2/n, contraction 3/4 - 1/(2n), shrink 1 - 1/n).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <random>
#include <vector>

namespace qmem {

struct NelderMeadOptions {
    int max_evaluations = 20000;
    double initial_step = 0.1;
    double x_tol = 1e-9;  // simplex diameter (infinity norm)
    double f_tol = 1e-12; // spread of vertex values, relative to max(1, |f_best|)
    int restarts = 2;
    std::uint64_t seed = 0;
};

struct NelderMeadResult {
    std::vector<double> x;
    double f = std::numeric_limits<double>::infinity();
    int evaluations = 0;
    int iterations = 0;
    bool converged = false;
    std::vector<double> history; // best value after each iteration; never increases
};

template <class Objective, class OnIteration>
NelderMeadResult nelder_mead(Objective&& objective, std::vector<double> x0,
                             const NelderMeadOptions& opt, OnIteration&& on_iteration) {
    const std::size_t n = x0.size();
    NelderMeadResult res;
    res.x = x0;
    res.f = objective(x0);
    res.evaluations = 1;
    if (n == 0) {
        res.converged = true;
        return res;
    }
    const double nd = static_cast<double>(n);
    const double alpha = 1.0;
    const double beta = 1.0 + 2.0 / nd;
    const double gamma = 0.75 - 1.0 / (2.0 * nd);
    const double delta = 1.0 - 1.0 / nd;
    std::mt19937_64 rng(opt.seed);

    auto eval = [&](const std::vector<double>& x) {
        ++res.evaluations;
        const double f = objective(x);
        return std::isfinite(f) ? f : std::numeric_limits<double>::infinity();
    };

    for (int round = 0; round <= opt.restarts; ++round) {
        // Axis-aligned start; restarts flip step signs pseudo-randomly.
        std::vector<std::vector<double>> simplex(n + 1, res.x);
        std::vector<double> fv(n + 1, res.f);
        for (std::size_t i = 0; i < n; ++i) {
            double step = opt.initial_step;
            if (round > 0 && (rng() & 1u)) step = -step;
            simplex[i + 1][i] += step;
            fv[i + 1] = eval(simplex[i + 1]);
        }
        const double f_round_start = res.f;
        std::vector<std::size_t> order(n + 1);
        std::vector<double> centroid(n), xr(n), xe(n), xc(n);
        bool round_converged = false;
        while (res.evaluations < opt.max_evaluations) {
            std::iota(order.begin(), order.end(), std::size_t{0});
            std::stable_sort(order.begin(), order.end(),
                             [&](std::size_t a, std::size_t b) { return fv[a] < fv[b]; });
            const std::size_t best = order.front();
            const std::size_t worst = order.back();
            const std::size_t second = order[n - 1];

            double diameter = 0.0;
            for (std::size_t i = 0; i <= n; ++i)
                for (std::size_t j = 0; j < n; ++j)
                    diameter = std::max(diameter, std::abs(simplex[i][j] - simplex[best][j]));
            const double spread = fv[worst] - fv[best];
            if (diameter <= opt.x_tol &&
                spread <= opt.f_tol * std::max(1.0, std::abs(fv[best]))) {
                round_converged = true;
                break;
            }

            std::fill(centroid.begin(), centroid.end(), 0.0);
            for (std::size_t i = 0; i <= n; ++i)
                if (i != worst)
                    for (std::size_t j = 0; j < n; ++j) centroid[j] += simplex[i][j] / nd;

            for (std::size_t j = 0; j < n; ++j)
                xr[j] = centroid[j] + alpha * (centroid[j] - simplex[worst][j]);
            const double fr = eval(xr);
            if (fr < fv[best]) {
                for (std::size_t j = 0; j < n; ++j)
                    xe[j] = centroid[j] + beta * (xr[j] - centroid[j]);
                const double fe = eval(xe);
                if (fe < fr) {
                    simplex[worst] = xe;
                    fv[worst] = fe;
                } else {
                    simplex[worst] = xr;
                    fv[worst] = fr;
                }
            } else if (fr < fv[second]) {
                simplex[worst] = xr;
                fv[worst] = fr;
            } else {
                const bool outside = fr < fv[worst];
                for (std::size_t j = 0; j < n; ++j)
                    xc[j] = outside ? centroid[j] + gamma * (xr[j] - centroid[j])
                                    : centroid[j] - gamma * (centroid[j] - simplex[worst][j]);
                const double fc = eval(xc);
                if (fc < std::min(fr, fv[worst])) {
                    simplex[worst] = xc;
                    fv[worst] = fc;
                } else {
                    for (std::size_t i = 0; i <= n; ++i) {
                        if (i == best) continue;
                        for (std::size_t j = 0; j < n; ++j)
                            simplex[i][j] =
                                simplex[best][j] + delta * (simplex[i][j] - simplex[best][j]);
                        fv[i] = eval(simplex[i]);
                    }
                }
            }
            ++res.iterations;
            const auto it = std::min_element(fv.begin(), fv.end());
            const std::size_t b = static_cast<std::size_t>(it - fv.begin());
            if (fv[b] < res.f) {
                res.f = fv[b];
                res.x = simplex[b];
            }
            res.history.push_back(res.f);
            on_iteration(res.x, res.f);
        }
        res.converged = round_converged;
        if (!round_converged) break;
        const double gain = f_round_start - res.f;
        if (round > 0 && gain <= opt.f_tol * std::max(1.0, std::abs(res.f))) break;
    }
    return res;
}

template <class Objective>
NelderMeadResult nelder_mead(Objective&& objective, std::vector<double> x0,
                             const NelderMeadOptions& opt = {}) {
    return nelder_mead(std::forward<Objective>(objective), std::move(x0), opt,
                       [](const std::vector<double>&, double) {});
}

} // namespace qmem
