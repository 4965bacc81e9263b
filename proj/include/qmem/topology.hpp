#pragma once

// Resonance lines of S(nu) as poles (roots of 1 - iF = 0), their tracking across a
// coupling sweep, and the point where the count of distinct interior positions drops.

#include "qmem/config.hpp"
#include "qmem/core_model.hpp"
#include "qmem/errors.hpp"
#include "qmem/polynomial.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <vector>

namespace qmem {

inline constexpr std::size_t npos_index = std::numeric_limits<std::size_t>::max();

// P(nu) = (1 - iF(nu)) prod_n (Delta_n - i gamma_n - nu), degree 2N + 1.
inline Polynomial pole_polynomial(const MemoryConfig& cfg) {
    validate(cfg);
    const auto& ab = cfg.absorbers;
    for (std::size_t i = 0; i < ab.size(); ++i)
        for (std::size_t j = i + 1; j < ab.size(); ++j)
            if (ab[i].detuning == ab[j].detuning && ab[i].gamma == ab[j].gamma)
                throw Error(ErrorCode::DegenerateDetunings,
                            "absorbers " + std::to_string(i) + " and " + std::to_string(j) +
                                " share detuning and loss");
    const cdouble I(0.0, 1.0);
    std::vector<Polynomial> factors;
    for (const auto& a : ab) factors.push_back({cdouble(a.detuning, -a.gamma), -1.0});

    Polynomial full{1.0};
    for (const auto& f : factors) full = poly_multiply(full, f);
    Polynomial p = poly_multiply(full, {1.0, -2.0 * I / cfg.kappa});
    for (std::size_t n = 0; n < ab.size(); ++n) {
        Polynomial others{1.0};
        for (std::size_t m = 0; m < ab.size(); ++m)
            if (m != n) others = poly_multiply(others, factors[m]);
        p = poly_add(p, poly_scale(others, -I * ab[n].g));
    }
    return p;
}

struct ResonanceLineSet {
    std::vector<cdouble> poles;    // sorted by (real, imag); includes the cavity root
    std::vector<double> positions; // Re(pole)
    std::vector<double> widths;    // -2 Im(pole)
    std::size_t cavity_index = npos_index;
    MemoryConfig config_snapshot;

    std::vector<std::size_t> interior_indices() const {
        std::vector<std::size_t> idx;
        for (std::size_t i = 0; i < poles.size(); ++i)
            if (i != cavity_index) idx.push_back(i);
        return idx;
    }
};

inline ResonanceLineSet resonance_lines(const MemoryConfig& cfg, const RootOptions& opt = {}) {
    const auto p = pole_polynomial(cfg);
    ResonanceLineSet out;
    out.config_snapshot = cfg;
    out.poles = polynomial_roots(p, opt);
    std::sort(out.poles.begin(), out.poles.end(), [](cdouble a, cdouble b) {
        return a.real() != b.real() ? a.real() < b.real() : a.imag() < b.imag();
    });
    // The cavity-induced root sits near -i kappa/2, far below the absorber band.
    double deepest = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < out.poles.size(); ++i) {
        out.positions.push_back(out.poles[i].real());
        out.widths.push_back(-2.0 * out.poles[i].imag());
        if (out.poles[i].imag() < deepest) {
            deepest = out.poles[i].imag();
            out.cavity_index = i;
        }
    }
    return out;
}

// Interior positions closer than tol_merge (in units of unit_delta) count as one line.
inline std::size_t distinct_positions(std::vector<double> pos, double tol) {
    if (pos.empty()) return 0;
    std::sort(pos.begin(), pos.end());
    std::size_t count = 1;
    double anchor = pos.front();
    for (std::size_t i = 1; i < pos.size(); ++i)
        if (pos[i] - anchor > tol) {
            ++count;
            anchor = pos[i];
        }
    return count;
}

inline std::size_t distinct_line_count(const ResonanceLineSet& lines, double tol_merge = 1e-4) {
    std::vector<double> pos;
    for (auto i : lines.interior_indices()) pos.push_back(lines.positions[i]);
    return distinct_positions(std::move(pos), tol_merge * lines.config_snapshot.unit_delta);
}

struct MergeEvent {
    double g_before = 0.0; // last grid value with the larger count
    double g_after = 0.0;  // first grid value with the smaller count
    std::size_t lines_before = 0;
    std::size_t lines_after = 0;
};

struct LineTrajectory {
    std::vector<double> g_grid;
    std::vector<std::vector<cdouble>> branches; // branches[b][k] is branch b at g_grid[k]
    std::size_t cavity_branch = npos_index;
    std::vector<std::size_t> distinct_counts;
    std::vector<MergeEvent> merge_events;
    std::vector<MergeEvent> split_events;
};

struct TrajectoryOptions {
    double tol_merge = 1e-4;
    RootOptions roots;
};

namespace detail {

// Minimum-cost perfect assignment (Hungarian method); returns row -> column.
inline std::vector<std::size_t> min_cost_assignment(const std::vector<std::vector<double>>& cost) {
    const std::size_t n = cost.size();
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
    std::vector<std::size_t> p(n + 1, 0), way(n + 1, 0);
    for (std::size_t i = 1; i <= n; ++i) {
        p[0] = i;
        std::size_t j0 = 0;
        std::vector<double> minv(n + 1, inf);
        std::vector<bool> used(n + 1, false);
        do {
            used[j0] = true;
            const std::size_t i0 = p[j0];
            double delta = inf;
            std::size_t j1 = 0;
            for (std::size_t j = 1; j <= n; ++j) {
                if (used[j]) continue;
                const double cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (std::size_t j = 0; j <= n; ++j) {
                if (used[j]) {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (p[j0] != 0);
        do {
            const std::size_t j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
        } while (j0 != 0);
    }
    std::vector<std::size_t> row_to_col(n, 0);
    for (std::size_t j = 1; j <= n; ++j) row_to_col[p[j] - 1] = j - 1;
    return row_to_col;
}

// Matches previous poles to new poles by minimum total squared displacement. A pair of
// poles is resolved when both moved by less than half their separation. An unresolved
// pair is accepted only as a local collision (both new poles stay within
// max(old separation, new separation) of the old midpoint), which is how two lines merge
// or split; any other unresolved pair means the grid is too coarse.
inline std::vector<std::size_t> match_slices(const std::vector<cdouble>& prev,
                                             const std::vector<cdouble>& next, double g) {
    const std::size_t n = prev.size();
    std::vector<std::vector<double>> cost(n, std::vector<double>(n));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) cost[i][j] = std::norm(prev[i] - next[j]);
    auto assign = min_cost_assignment(cost);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t k = i + 1; k < n; ++k) {
            const cdouble qa = next[assign[i]];
            const cdouble qb = next[assign[k]];
            const double moved = std::max(std::abs(prev[i] - qa), std::abs(prev[k] - qb));
            const double sep = std::abs(prev[i] - prev[k]);
            if (moved < 0.5 * sep) continue;
            const cdouble mid = 0.5 * (prev[i] + prev[k]);
            const double r = std::max(sep, std::abs(qa - qb));
            if (std::abs(qa - mid) <= r && std::abs(qb - mid) <= r) continue;
            throw Error(ErrorCode::BranchMatchingAmbiguous,
                        "nearest-neighbour matching is not unique at g = " + std::to_string(g) +
                            "; refine the g grid");
        }
    return assign;
}

} // namespace detail

// Sweeps a uniform coupling g over all absorbers of the template.
inline LineTrajectory line_trajectories(const MemoryConfig& tmpl, std::span<const double> g_grid,
                                        const TrajectoryOptions& opt = {}) {
    if (g_grid.empty()) throw Error(ErrorCode::InvalidArgument, "g grid is empty");
    for (std::size_t k = 1; k < g_grid.size(); ++k)
        if (!(g_grid[k] > g_grid[k - 1]))
            throw Error(ErrorCode::InvalidArgument, "g grid must be strictly increasing");

    LineTrajectory out;
    out.g_grid.assign(g_grid.begin(), g_grid.end());
    std::vector<cdouble> prev;
    for (std::size_t k = 0; k < g_grid.size(); ++k) {
        const auto lines = resonance_lines(with_uniform_coupling(tmpl, g_grid[k]), opt.roots);
        out.distinct_counts.push_back(distinct_line_count(lines, opt.tol_merge));
        if (k == 0) {
            out.branches.resize(lines.poles.size());
            for (std::size_t b = 0; b < lines.poles.size(); ++b) out.branches[b].push_back(lines.poles[b]);
            out.cavity_branch = lines.cavity_index;
            prev = lines.poles;
            continue;
        }
        const auto assign = detail::match_slices(prev, lines.poles, g_grid[k]);
        for (std::size_t b = 0; b < prev.size(); ++b) {
            out.branches[b].push_back(lines.poles[assign[b]]);
            prev[b] = lines.poles[assign[b]];
        }
        const auto before = out.distinct_counts[k - 1];
        const auto after = out.distinct_counts[k];
        if (after != before) {
            MergeEvent ev{g_grid[k - 1], g_grid[k], before, after};
            (after < before ? out.merge_events : out.split_events).push_back(ev);
        }
    }
    return out;
}

inline double transition_point(const MemoryConfig& tmpl, double lo, double hi, double tol_merge = 1e-4,
                               double width = 1e-6, const RootOptions& roots = {}) {
    if (!(hi > lo)) throw Error(ErrorCode::InvalidArgument, "bracket needs hi > lo");
    auto count = [&](double g) {
        return distinct_line_count(resonance_lines(with_uniform_coupling(tmpl, g), roots), tol_merge);
    };
    const auto c_lo = count(lo);
    if (count(hi) == c_lo)
        throw Error(ErrorCode::NoTransitionInBracket,
                    "distinct line count is " + std::to_string(c_lo) + " at both ends of the bracket");
    while (hi - lo > width) {
        const double mid = 0.5 * (lo + hi);
        if (count(mid) == c_lo) lo = mid;
        else hi = mid;
    }
    return 0.5 * (lo + hi);
}

} // namespace qmem
