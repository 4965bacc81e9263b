#include "qmem/matching.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

using namespace qmem;

namespace {

// Uniform coupling solving the m = 1 condition on the comb Delta (n - 1/2) by direct sums:
// g S4 = (1/48) (4 g S2)^3  =>  g^2 = 3 S4 / (4 S2^3).
double g_critical_by_sums(int n_half, double delta) {
    long double s2 = 0.0L;
    long double s4 = 0.0L;
    for (int n = 1; n <= n_half; ++n) {
        const long double d = delta * (n - 0.5L);
        s2 += 1.0L / (d * d);
        s4 += 1.0L / (d * d * d * d);
    }
    return static_cast<double>(std::sqrt(3.0L * s4 / (4.0L * s2 * s2 * s2)));
}

MemoryConfig initial_set() { return mirror({{0.5, 0.318, 0.0}, {1.5, 0.318, 0.0}}, 100.0); }
MemoryConfig optimized_set() { return mirror({{0.5, 0.318, 0.0}, {1.92, 1.09, 0.0}}, 100.0); }

} // namespace

TEST(Residuals, VanishAtCriticalCoupling) {
    for (int n = 1; n <= 16; ++n) {
        const auto cfg = equidistant_comb(static_cast<std::size_t>(n), g_critical(n), 0.0, 100.0);
        EXPECT_LE(residuals(cfg, 1).residuals[0], 1e-10) << "N=" << n;
    }
}

TEST(Residuals, DefinitionAsWritten) {
    const auto cfg = optimized_set();
    const auto r = residuals(cfg, 3);
    const double t0 = 4.0 * (0.318 / 0.25 + 1.09 / (1.92 * 1.92));
    EXPECT_NEAR(r.t0, t0, 1e-14 * t0);
    const double c[] = {1.0 / 48.0, 1.0 / 480.0, 17.0 / 80640.0};
    for (int m = 1; m <= 3; ++m) {
        const double lhs = 0.318 / std::pow(0.5, 2 * m + 2) + 1.09 / std::pow(1.92, 2 * m + 2);
        const double rhs = c[m - 1] * std::pow(t0, 2 * m + 1);
        EXPECT_NEAR(r.signed_residuals[static_cast<std::size_t>(m - 1)], lhs - rhs, 1e-12 * std::abs(rhs));
    }
    EXPECT_EQ(r.weights.size(), 3u);
}

TEST(Residuals, DefaultCountIsTwoNMinusOne) {
    EXPECT_EQ(residuals(optimized_set()).residuals.size(), 3u);
    EXPECT_EQ(residuals(equidistant_comb(3, 0.3, 0.0, 100.0)).residuals.size(), 5u);
    EXPECT_EQ(residuals(equidistant_comb(1, 0.3, 0.0, 100.0)).residuals.size(), 1u);
}

TEST(Residuals, OptimizedSetSmallerThanInitial) {
    const auto a = residuals(initial_set(), 2);
    const auto b = residuals(optimized_set(), 2);
    for (std::size_t m = 0; m < 2; ++m) EXPECT_LT(b.residuals[m], a.residuals[m]) << "m=" << m + 1;
}

TEST(Residuals, DoublingCouplingDoublesDelay) {
    const auto cfg = optimized_set();
    auto doubled = cfg;
    for (auto& a : doubled.absorbers) a.g *= 2.0;
    EXPECT_NEAR(residuals(doubled).t0, 2.0 * residuals(cfg).t0, 1e-13);
}

TEST(Residuals, ScalingCovariance) {
    std::mt19937_64 rng(21);
    for (int c = 0; c < 10; ++c) {
        const auto cfg = fixtures::random_symmetric(rng, 1 + c % 3, 0.0);
        const double lambda = 0.5 + 0.3 * c;
        auto scaled = cfg;
        scaled.kappa *= lambda;
        for (auto& a : scaled.absorbers) {
            a.detuning *= lambda;
            a.g *= lambda;
        }
        const auto r0 = residuals(cfg, 3);
        const auto r1 = residuals(scaled, 3);
        EXPECT_NEAR(r1.t0 * lambda, r0.t0, 1e-12 * r0.t0);
        for (int m = 1; m <= 3; ++m) {
            const auto i = static_cast<std::size_t>(m - 1);
            EXPECT_NEAR(r1.signed_residuals[i] * std::pow(lambda, 2 * m + 1), r0.signed_residuals[i],
                        1e-10 * (std::abs(r0.signed_residuals[i]) + 1e-12));
        }
    }
}

TEST(Residuals, AsymmetricRejected) {
    MemoryConfig cfg;
    cfg.absorbers = {{-0.5, 0.3, 0.0}, {0.7, 0.3, 0.0}};
    try {
        residuals(cfg);
        FAIL() << "expected AsymmetricConfig";
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::AsymmetricConfig);
    }
}

TEST(GCritical, MatchesDirectSums) {
    for (int n : {1, 2, 3, 5, 8, 16, 64})
        for (double delta : {1.0, 0.7})
            EXPECT_NEAR(g_critical(n, delta), g_critical_by_sums(n, delta), 1e-13) << "N=" << n;
}

TEST(GCritical, RegressionN2) {
    EXPECT_NEAR(g_critical(2), 0.3719879, 1e-7);
    // The closed form evaluated at N - 1/2 gives a different value for N = 2.
    EXPECT_NEAR(g_critical_as_printed(2), 0.4330127, 1e-7);
    EXPECT_THROW(g_critical_as_printed(1), Error);
    EXPECT_THROW(g_critical(0), Error);
}

TEST(GCritical, ContinuumLimit) {
    EXPECT_NEAR(g_critical(10000), 1.0 / pi, 1e-3 / pi);
}

TEST(GCritical, AsymptoticExpansionResidualDecays) {
    double prev = std::numeric_limits<double>::infinity();
    for (int n : {5, 10, 20, 40}) {
        const double scaled = std::abs(pi * g_critical(n) - 1.0 - 3.0 / (pi * pi * n)) * n;
        EXPECT_LT(scaled, prev) << "N=" << n;
        prev = scaled;
    }
    EXPECT_LT(prev, 0.05);
}

TEST(GCritical, DecreasingInN) {
    for (int n = 2; n < 64; ++n) EXPECT_GT(g_critical(n), g_critical(n + 1)) << "N=" << n;
    EXPECT_GT(g_critical(64), 1.0 / pi);
}

TEST(TCritical, ConsistentWithComb) {
    for (int n = 1; n <= 16; ++n) {
        double sum = 0.0;
        for (int k = 1; k <= n; ++k) sum += 4.0 * g_critical(n) / ((k - 0.5) * (k - 0.5));
        EXPECT_NEAR(t0_critical(n), sum, 1e-10) << "N=" << n;
    }
    EXPECT_NEAR(t0_critical(2), 6.6131183, 1e-6);
}

TEST(TCritical, LargeNTrend) {
    double prev = std::numeric_limits<double>::infinity();
    double prev_excess = std::numeric_limits<double>::infinity();
    for (int n : {10, 20, 40, 80}) {
        const double approx = 2.0 * pi * pi * g_critical(n) * (1.0 - 2.0 / (pi * pi * n));
        const double rel = std::abs(t0_critical(n) / approx - 1.0);
        EXPECT_LT(rel, prev);
        prev = rel;
        // T(0) / 2 pi - 1 approaches 1 / (pi^2 N).
        const double excess = std::abs((t0_critical(n) / (2.0 * pi) - 1.0) * pi * pi * n - 1.0);
        EXPECT_LT(excess, prev_excess) << "N=" << n;
        EXPECT_LT(excess, 0.02) << "N=" << n;
        prev_excess = excess;
    }
}

TEST(Objective, ParseRoundTrip) {
    for (auto o : {Objective::residuals, Objective::band_error, Objective::mixed})
        EXPECT_EQ(parse_objective(to_string(o)), o);
    EXPECT_THROW(parse_objective("bogus"), Error);
}

TEST(Optimize, FixedPointStaysPut) {
    // Exact root of m = 1..3 with Delta_1 = 0.5 anchored.
    auto start = mirror({{0.5, 0.318, 0.0}, {1.92, 1.09, 0.0}}, 100.0);
    const auto first = optimize(start);
    ASSERT_TRUE(first.converged);
    const auto again = optimize(first.final_config);
    EXPECT_TRUE(again.converged);
    const auto a = positive_half(first.final_config);
    const auto b = positive_half(again.final_config);
    for (std::size_t n = 0; n < a.size(); ++n) {
        EXPECT_NEAR(a[n].detuning, b[n].detuning, 1e-6);
        EXPECT_NEAR(a[n].g, b[n].g, 1e-6);
    }
    EXPECT_LE(again.final_objective, again.initial_objective + 1e-10);
    EXPECT_GE(first.final_objective - again.final_objective, -1e-10);
}

TEST(Optimize, ImprovesInitialSetAndIsDeterministic) {
    const auto start = mirror({{0.5, 0.318, 0.0}, {1.5, 0.318, 0.0}}, 100.0);
    OptimizeOptions opt;
    opt.seed = 7;
    const auto a = optimize(start, opt);
    const auto b = optimize(start, opt);
    EXPECT_TRUE(a.converged);
    EXPECT_EQ(a.final_config, b.final_config);
    EXPECT_EQ(a.evaluations, b.evaluations);
    for (std::size_t m = 0; m < a.final_residuals.residuals.size(); ++m)
        EXPECT_LE(a.final_residuals.residuals[m], a.initial_residuals.residuals[m]);
    EXPECT_LT(a.final_objective, 1e-12 * a.initial_objective);
    EXPECT_TRUE(is_symmetric(a.final_config));
    EXPECT_DOUBLE_EQ(positive_half(a.final_config)[0].detuning, 0.5);
}

TEST(Optimize, HistoryNeverIncreases) {
    const auto start = mirror({{0.5, 0.318, 0.0}, {1.5, 0.318, 0.0}}, 100.0);
    OptimizeOptions opt;
    opt.objective = Objective::mixed;
    opt.max_evaluations = 600;
    opt.band_points = 61;
    const auto rep = optimize(start, opt);
    ASSERT_FALSE(rep.objective_history.empty());
    for (std::size_t k = 1; k < rep.objective_history.size(); ++k)
        EXPECT_LE(rep.objective_history[k], rep.objective_history[k - 1]);
    EXPECT_EQ(rep.residual_history.size(), rep.objective_history.size());
}

TEST(Optimize, RejectsAsymmetricStart) {
    MemoryConfig cfg;
    cfg.absorbers = {{-0.5, 0.3, 0.0}, {0.7, 0.3, 0.0}};
    EXPECT_THROW(optimize(cfg), Error);
}

TEST(Optimize, RequireConvergedRaises) {
    OptimizationReport rep;
    rep.converged = false;
    try {
        require_converged(rep);
        FAIL() << "expected NotConverged";
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::NotConverged);
    }
}
