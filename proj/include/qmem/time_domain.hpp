#pragma once

// Time-domain integration of the cavity + absorber mode equations
//
//   s_n' = -(i Delta_n + gamma_n) s_n - g0_n a
//   a'   = -(kappa / 2) a + sum_n g0_n s_n + sqrt(kappa) a_in
//   a_out = sqrt(kappa) a - a_in,   g0_n = sqrt(g_n kappa / 2)
//
// and the frequency-domain counterpart a_out(t) = (2 pi)^(-1/2) int e^{-i nu t} S f dnu.

#include "qmem/config.hpp"
#include "qmem/core_model.hpp"
#include "qmem/errors.hpp"

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>
#include <boost/numeric/odeint.hpp>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace qmem {

// Input pulse centre in time. Six Gaussian widths (1/(2 sigma) each, in amplitude) from
// t = 0, doubled so the zero initial state is consistent to well below 1e-12.
inline double default_pulse_delay(const InputPulse& pulse) { return 6.0 / pulse.sigma; }

// Inverse transform of f(nu) e^{i nu tc}, evaluated in closed form.
inline cdouble input_amplitude(const InputPulse& pulse, double t, double tc) {
    const double x = t - tc;
    const double s2 = pulse.sigma * pulse.sigma;
    return std::pow(2.0 * s2 / pi, 0.25) * std::exp(-s2 * x * x) *
           std::polar(1.0, -pulse.center * x);
}

struct TimeTrace {
    std::vector<double> t;
    std::vector<cdouble> a_in;
    std::vector<cdouble> a_cavity;
    std::vector<std::vector<cdouble>> s_modes; // s_modes[k][n]
    std::vector<cdouble> a_out;
    double input_energy = 0.0;
    double output_energy = 0.0;
    double loss_energy = 0.0;       // 2 sum gamma_n int |s_n|^2
    double stored_energy_end = 0.0; // |a|^2 + sum |s_n|^2 at the last sample
    double pulse_center = 0.0;
    std::string method;             // "dopri5" or "exponential"
};

struct SimulationOptions {
    double t_end = 0.0;            // 0 selects 2 tc + |T(0)| + 6 / sigma
    double dt_out = 0.05;
    double rtol = 1e-9;
    double atol = 1e-12;
    double stiff_ratio = 1e3;      // kappa / unit_delta above which exponential stepping is used
    bool force_exponential = false;
    int interp_degree = 6;         // input interpolation order per exponential step
    int max_steps_per_sample = 5000; // adaptive steps allowed between two output samples
    bool ring_down = false;        // keep going until every mode amplitude is below ring_down_tol
    double ring_down_tol = 1e-8;
    double t_max = 1e4;
    std::optional<double> pulse_center;
    double input_scale = 1.0;
};

namespace detail {

struct ModeSystem {
    std::size_t n = 1; // cavity + absorbers
    double sqrt_kappa = 0.0;
    Eigen::MatrixXcd m;

    explicit ModeSystem(const MemoryConfig& cfg)
        : n(cfg.absorbers.size() + 1), sqrt_kappa(std::sqrt(cfg.kappa)),
          m(Eigen::MatrixXcd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n))) {
        m(0, 0) = -0.5 * cfg.kappa;
        for (std::size_t k = 0; k < cfg.absorbers.size(); ++k) {
            const auto& a = cfg.absorbers[k];
            const double g0 = std::sqrt(a.g * cfg.kappa / 2.0);
            const auto i = static_cast<Eigen::Index>(k + 1);
            m(0, i) = g0;
            m(i, 0) = -g0;
            m(i, i) = cdouble(-a.gamma, -a.detuning);
        }
    }
};

inline double auto_end_time(const MemoryConfig& cfg, const InputPulse& pulse, double tc) {
    return 2.0 * tc + std::abs(t0_analytic(cfg)) + 6.0 / pulse.sigma;
}

inline double ring_down_chunk(const InputPulse& pulse, const SimulationOptions& opt) {
    return opt.dt_out * std::ceil(6.0 / pulse.sigma / opt.dt_out);
}

inline bool rung_down(const TimeTrace& tr, double tol) {
    if (std::abs(tr.a_cavity.back()) >= tol) return false;
    for (const auto& s : tr.s_modes.back())
        if (std::abs(s) >= tol) return false;
    return true;
}

inline void finish_trace(TimeTrace& tr, const MemoryConfig& cfg) {
    double e = std::norm(tr.a_cavity.back());
    for (const auto& s : tr.s_modes.back()) e += std::norm(s);
    tr.stored_energy_end = e;
    (void)cfg;
}

// Explicit adaptive path. State: re/im pairs of (a, s_1..s_2N), then the running input,
// output and loss energies so that the balance is integrated to the same tolerance.
inline TimeTrace simulate_dopri(const MemoryConfig& cfg, const InputPulse& pulse,
                                const SimulationOptions& opt, double tc, double t_end) {
    namespace ode = boost::numeric::odeint;
    using State = std::vector<double>;
    const ModeSystem sys(cfg);
    const std::size_t n = sys.n;
    const double kappa = cfg.kappa;

    auto ain = [&](double t) { return opt.input_scale * input_amplitude(pulse, t, tc); };
    auto rhs = [&](const State& x, State& dx, double t) {
        const cdouble u = ain(t);
        const cdouble a(x[0], x[1]);
        cdouble da = -0.5 * kappa * a + sys.sqrt_kappa * u;
        double loss = 0.0;
        for (std::size_t k = 1; k < n; ++k) {
            const cdouble s(x[2 * k], x[2 * k + 1]);
            const auto i = static_cast<Eigen::Index>(k);
            da += sys.m(0, i) * s;
            const cdouble ds = sys.m(i, i) * s + sys.m(i, 0) * a;
            dx[2 * k] = ds.real();
            dx[2 * k + 1] = ds.imag();
            loss += -2.0 * sys.m(i, i).real() * std::norm(s);
        }
        dx[0] = da.real();
        dx[1] = da.imag();
        dx[2 * n] = std::norm(u);
        dx[2 * n + 1] = std::norm(sys.sqrt_kappa * a - u);
        dx[2 * n + 2] = loss;
    };

    TimeTrace tr;
    tr.method = "dopri5";
    tr.pulse_center = tc;
    State x(2 * n + 3, 0.0);
    auto observe = [&](const State& s, double t) {
        tr.t.push_back(t);
        const cdouble a(s[0], s[1]);
        const cdouble u = ain(t);
        tr.a_in.push_back(u);
        tr.a_cavity.push_back(a);
        std::vector<cdouble> modes(n - 1);
        for (std::size_t k = 1; k < n; ++k) modes[k - 1] = cdouble(s[2 * k], s[2 * k + 1]);
        tr.s_modes.push_back(std::move(modes));
        tr.a_out.push_back(sys.sqrt_kappa * a - u);
        tr.input_energy = s[2 * n];
        tr.output_energy = s[2 * n + 1];
        tr.loss_energy = s[2 * n + 2];
    };

    auto stepper = ode::make_dense_output(opt.atol, opt.rtol, ode::runge_kutta_dopri5<State>());
    const double dt0 = std::min(opt.dt_out, 0.1 / kappa);
    auto grid_from = [&](double lo, double hi, bool include_lo) {
        std::vector<double> times;
        const auto steps = static_cast<std::size_t>(std::ceil((hi - lo) / opt.dt_out - 1e-9));
        for (std::size_t k = include_lo ? 0 : 1; k <= steps; ++k)
            times.push_back(std::min(hi, lo + opt.dt_out * static_cast<double>(k)));
        return times;
    };
    try {
        auto times = grid_from(0.0, t_end, true);
        ode::integrate_times(stepper, rhs, x, times.begin(), times.end(), dt0, observe,
                             ode::max_step_checker(opt.max_steps_per_sample));
        double t = t_end;
        while (opt.ring_down && !rung_down(tr, opt.ring_down_tol) && t < opt.t_max) {
            const double next = std::min(opt.t_max, t + ring_down_chunk(pulse, opt));
            auto more = grid_from(t, next, true);
            // The first point repeats the last sample; drop it from the trace afterwards.
            const std::size_t before = tr.t.size();
            ode::integrate_times(stepper, rhs, x, more.begin(), more.end(), dt0, observe,
                                 ode::max_step_checker(opt.max_steps_per_sample));
            tr.t.erase(tr.t.begin() + static_cast<std::ptrdiff_t>(before));
            tr.a_in.erase(tr.a_in.begin() + static_cast<std::ptrdiff_t>(before));
            tr.a_cavity.erase(tr.a_cavity.begin() + static_cast<std::ptrdiff_t>(before));
            tr.s_modes.erase(tr.s_modes.begin() + static_cast<std::ptrdiff_t>(before));
            tr.a_out.erase(tr.a_out.begin() + static_cast<std::ptrdiff_t>(before));
            t = next;
        }
    } catch (const ode::step_adjustment_error& e) {
        throw Error(ErrorCode::StepSizeUnderflow,
                    std::string("adaptive step collapsed (") + e.what() +
                        "); use exponential stepping for stiff kappa");
    } catch (const ode::no_progress_error& e) {
        throw Error(ErrorCode::StepSizeUnderflow,
                    std::string("integrator made no progress (") + e.what() +
                        "); use exponential stepping for stiff kappa");
    }
    finish_trace(tr, cfg);
    return tr;
}

// Exact propagation of the linear system with the input replaced, on each substep, by its
// interpolating polynomial; the forced response uses one augmented matrix exponential.
// Energies come from Simpson's rule with the midpoint of every substep.
inline TimeTrace simulate_exponential(const MemoryConfig& cfg, const InputPulse& pulse,
                                      const SimulationOptions& opt, double tc, double t_end) {
    const ModeSystem sys(cfg);
    const auto n = static_cast<Eigen::Index>(sys.n);
    const int p = std::max(1, opt.interp_degree);
    const double h_cap = 0.5 / (pulse.sigma + std::abs(pulse.center));
    const int sub = std::max(1, static_cast<int>(std::ceil(opt.dt_out / h_cap)));
    const double h = opt.dt_out / sub;

    // Top-right block of exp(h [[M, B], [0, J]]) holds h^{j+1} phi_{j+1}(hM) b, j = 0..p,
    // for u(tau) = sum_j c_j tau^j / j!.
    struct Propagator {
        Eigen::MatrixXcd phi;
        Eigen::MatrixXcd psi;
    };
    auto build = [&](double step) {
        const Eigen::Index size = n + p + 1;
        Eigen::MatrixXcd aug = Eigen::MatrixXcd::Zero(size, size);
        aug.topLeftCorner(n, n) = sys.m;
        aug(0, n) = sys.sqrt_kappa;
        for (Eigen::Index j = 0; j < p; ++j) aug(n + j, n + j + 1) = 1.0;
        const Eigen::MatrixXcd e = (aug * step).exp();
        return Propagator{e.topLeftCorner(n, n), e.topRightCorner(n, p + 1)};
    };
    const Propagator full = build(h);
    const Propagator half = build(0.5 * h);

    // Node values -> scaled Taylor coefficients d_j = c_j h^j on s_j = j / p.
    Eigen::MatrixXd vand(p + 1, p + 1);
    for (int j = 0; j <= p; ++j) {
        double fact = 1.0;
        for (int k = 0; k <= p; ++k) {
            if (k > 0) fact *= k;
            vand(j, k) = std::pow(static_cast<double>(j) / p, k) / fact;
        }
    }
    const Eigen::PartialPivLU<Eigen::MatrixXd> lu(vand);

    auto ain = [&](double t) { return opt.input_scale * input_amplitude(pulse, t, tc); };
    auto out_of = [&](const Eigen::VectorXcd& x, double t) { return sys.sqrt_kappa * x(0) - ain(t); };
    auto loss_of = [&](const Eigen::VectorXcd& x) {
        double l = 0.0;
        for (Eigen::Index k = 1; k < n; ++k) l += -2.0 * sys.m(k, k).real() * std::norm(x(k));
        return l;
    };

    TimeTrace tr;
    tr.method = "exponential";
    tr.pulse_center = tc;
    Eigen::VectorXcd x = Eigen::VectorXcd::Zero(n);
    auto record = [&](double t) {
        tr.t.push_back(t);
        tr.a_in.push_back(ain(t));
        tr.a_cavity.push_back(x(0));
        std::vector<cdouble> modes(static_cast<std::size_t>(n - 1));
        for (Eigen::Index k = 1; k < n; ++k) modes[static_cast<std::size_t>(k - 1)] = x(k);
        tr.s_modes.push_back(std::move(modes));
        tr.a_out.push_back(out_of(x, t));
    };

    auto advance = [&](double t0) {
        Eigen::VectorXcd ur(p + 1), ui(p + 1);
        for (int j = 0; j <= p; ++j) {
            const cdouble u = ain(t0 + h * j / p);
            ur(j) = u.real();
            ui(j) = u.imag();
        }
        const Eigen::VectorXd dr = lu.solve(ur.real());
        const Eigen::VectorXd di = lu.solve(ui.real());
        Eigen::VectorXcd c_full(p + 1), c_half(p + 1);
        for (int j = 0; j <= p; ++j) {
            const cdouble d(dr(j), di(j));
            c_full(j) = d / std::pow(h, j);
            c_half(j) = c_full(j);
        }
        const Eigen::VectorXcd xm = half.phi * x + half.psi * c_half;
        const Eigen::VectorXcd x1 = full.phi * x + full.psi * c_full;
        const double tm = t0 + 0.5 * h;
        const double t1 = t0 + h;
        const cdouble u0 = ain(t0), um = ain(tm), u1 = ain(t1);
        tr.input_energy += h / 6.0 * (std::norm(u0) + 4.0 * std::norm(um) + std::norm(u1));
        tr.output_energy += h / 6.0 *
                            (std::norm(out_of(x, t0)) + 4.0 * std::norm(out_of(xm, tm)) +
                             std::norm(out_of(x1, t1)));
        tr.loss_energy += h / 6.0 * (loss_of(x) + 4.0 * loss_of(xm) + loss_of(x1));
        x = x1;
    };

    record(0.0);
    double t = 0.0;
    auto run_until = [&](double stop) {
        const auto outs = static_cast<long>(std::ceil((stop - t) / opt.dt_out - 1e-9));
        const double start = t;
        for (long k = 1; k <= outs; ++k) {
            for (int s = 0; s < sub; ++s) advance(t + h * s);
            t = start + opt.dt_out * static_cast<double>(k);
            record(t);
        }
    };
    run_until(t_end);
    while (opt.ring_down && !rung_down(tr, opt.ring_down_tol) && t < opt.t_max)
        run_until(std::min(opt.t_max, t + ring_down_chunk(pulse, opt)));
    finish_trace(tr, cfg);
    return tr;
}

} // namespace detail

inline TimeTrace simulate(const MemoryConfig& cfg, const InputPulse& pulse,
                          const SimulationOptions& opt = {}) {
    validate(cfg);
    validate(pulse);
    if (!(opt.dt_out > 0.0) || !(opt.rtol > 0.0) || !(opt.atol > 0.0))
        throw Error(ErrorCode::InvalidArgument, "dt_out, rtol and atol must be > 0");
    const double tc = opt.pulse_center.value_or(default_pulse_delay(pulse));
    // Whole output steps, so both integrators sample the same grid.
    const double requested = opt.t_end > 0.0 ? opt.t_end : detail::auto_end_time(cfg, pulse, tc);
    const double t_end = opt.dt_out * std::ceil(requested / opt.dt_out - 1e-9);
    const bool stiff = opt.force_exponential || cfg.kappa / cfg.unit_delta > opt.stiff_ratio;
    return stiff ? detail::simulate_exponential(cfg, pulse, opt, tc, t_end)
                 : detail::simulate_dopri(cfg, pulse, opt, tc, t_end);
}

struct TransformOptions {
    double rel_tol = 1e-9;
    double band_sigmas = 12.0;
    int max_levels = 10;
    std::optional<double> pulse_center;
};

// a_out(t) = (2 pi)^(-1/2) int e^{-i nu t} s(nu) f(nu) e^{i nu tc} dnu by the trapezoid rule,
// halving the spacing until two levels agree to rel_tol in the max norm.
template <class Transfer>
std::vector<cdouble> output_via_transfer(Transfer&& s_of_nu, const InputPulse& pulse,
                                         std::span<const double> t_grid, double band_half_width,
                                         double feature_width, const TransformOptions& opt = {}) {
    validate(pulse);
    if (t_grid.empty()) return {};
    const double tc = opt.pulse_center.value_or(default_pulse_delay(pulse));
    const double lo = pulse.center - band_half_width;
    const double hi = pulse.center + band_half_width;
    double t_span = 0.0;
    for (double t : t_grid) t_span = std::max(t_span, std::abs(t - tc));
    // Images of the signal repeat every 2 pi / h in time; keep them beyond the grid and the
    // ring-down of the narrowest feature.
    const double alias = 2.0 * pi / (2.0 * t_span + 40.0 / feature_width + 12.0 / pulse.sigma);
    const double h0 = std::min({pulse.sigma / 4.0, feature_width / 8.0, alias});

    auto evaluate = [&](std::size_t intervals) {
        const double h = (hi - lo) / static_cast<double>(intervals);
        std::vector<cdouble> weights(intervals + 1);
        for (std::size_t j = 0; j <= intervals; ++j) {
            const double nu = lo + h * static_cast<double>(j);
            const double w = (j == 0 || j == intervals) ? 0.5 * h : h;
            weights[j] = w * s_of_nu(nu) * gaussian_spectrum(pulse, nu);
        }
        std::vector<cdouble> out(t_grid.size());
        for (std::size_t k = 0; k < t_grid.size(); ++k) {
            const double tau = t_grid[k] - tc;
            // e^{-i nu tau} advanced by a recurrence, renormalised every step.
            const cdouble step = std::polar(1.0, -h * tau);
            cdouble rot = std::polar(1.0, -lo * tau);
            cdouble acc = 0.0;
            for (std::size_t j = 0; j <= intervals; ++j) {
                acc += weights[j] * rot;
                rot *= step;
                if ((j & 63u) == 63u) rot = std::polar(1.0, -(lo + h * static_cast<double>(j + 1)) * tau);
            }
            out[k] = acc / std::sqrt(2.0 * pi);
        }
        return out;
    };

    auto intervals = static_cast<std::size_t>(std::ceil((hi - lo) / h0));
    auto prev = evaluate(intervals);
    for (int level = 1; level <= opt.max_levels; ++level) {
        intervals *= 2;
        auto cur = evaluate(intervals);
        double diff = 0.0;
        double scale = 0.0;
        for (std::size_t k = 0; k < cur.size(); ++k) {
            diff = std::max(diff, std::abs(cur[k] - prev[k]));
            scale = std::max(scale, std::abs(cur[k]));
        }
        if (diff <= opt.rel_tol * std::max(scale, 1e-300)) return cur;
        prev = std::move(cur);
    }
    throw Error(ErrorCode::QuadratureNotConverged,
                "output transform did not reach tolerance " + std::to_string(opt.rel_tol));
}

inline std::vector<cdouble> output_via_tf(const MemoryConfig& cfg, const InputPulse& pulse,
                                          std::span<const double> t_grid,
                                          const TransformOptions& opt = {}) {
    validate(cfg);
    const double band = std::max(opt.band_sigmas * pulse.sigma,
                                 2.0 * static_cast<double>(cfg.half_count()) * cfg.unit_delta);
    const double w = std::max(detail::feature_width(cfg), 1e-6);
    return output_via_transfer([&](double nu) { return detail::transfer_continuous(cfg, nu); }, pulse,
                               t_grid, band, std::isfinite(w) ? w : pulse.sigma, opt);
}

// Trapezoid energy of a sampled trace (uniform or not).
inline double trace_energy(std::span<const double> t, std::span<const cdouble> field) {
    double e = 0.0;
    for (std::size_t k = 1; k < t.size(); ++k)
        e += 0.5 * (t[k] - t[k - 1]) * (std::norm(field[k]) + std::norm(field[k - 1]));
    return e;
}

// Relative L2 distance between two sampled fields on the same grid.
inline double relative_l2(std::span<const cdouble> a, std::span<const cdouble> b) {
    double num = 0.0;
    double den = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) {
        num += std::norm(a[k] - b[k]);
        den += std::norm(b[k]);
    }
    return den > 0.0 ? std::sqrt(num / den) : std::sqrt(num);
}

} // namespace qmem
