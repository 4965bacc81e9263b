// qmem: command-line front end for spectra, sweeps, optimization and validation.

#include "qmem/qmem.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace {

using namespace qmem;

constexpr int exit_ok = 0;
constexpr int exit_config = 2;
constexpr int exit_numeric = 3;
constexpr int exit_validation = 4;

struct Common {
    std::string config;
    std::optional<double> gamma;
    std::optional<double> kappa;
    std::uint64_t seed = 0;
    std::string out;
};

void add_common(CLI::App* sub, Common& c, bool needs_config = true) {
    auto* opt = sub->add_option("--config", c.config, "config file (JSON)");
    if (needs_config) opt->required();
    sub->add_option("--gamma", c.gamma, "override gamma of every absorber");
    sub->add_option("--kappa", c.kappa, "override cavity kappa");
    sub->add_option("--seed", c.seed, "seed for randomized steps");
    sub->add_option("--out", c.out, "output path (default stdout)");
}

std::pair<double, double> parse_band(const std::string& s) {
    const auto colon = s.find(':', 1);
    if (colon == std::string::npos)
        throw Error(ErrorCode::InvalidArgument, "band must look like LO:HI, got '" + s + "'");
    try {
        const double lo = std::stod(s.substr(0, colon));
        const double hi = std::stod(s.substr(colon + 1));
        if (!(hi > lo)) throw Error(ErrorCode::InvalidArgument, "band needs HI > LO");
        return {lo, hi};
    } catch (const std::logic_error&) {
        throw Error(ErrorCode::InvalidArgument, "band must look like LO:HI, got '" + s + "'");
    }
}

struct Loaded {
    MemoryConfig cfg;
    RunManifest manifest;
};

Loaded load(const Common& c, const std::string& command) {
    Loaded l;
    l.cfg = load_config(c.config);
    l.manifest.command = command;
    l.manifest.seed = c.seed;
    if (c.gamma) {
        if (!(*c.gamma >= 0.0)) throw Error(ErrorCode::InvalidArgument, "--gamma must be >= 0");
        l.cfg = with_uniform_loss(l.cfg, *c.gamma);
        l.manifest.overrides.emplace_back("gamma", format_double(*c.gamma));
    }
    if (c.kappa) {
        l.cfg.kappa = *c.kappa;
        l.manifest.overrides.emplace_back("kappa", format_double(*c.kappa));
    }
    validate(l.cfg);
    l.manifest.config_hash = hex64(config_hash(l.cfg));
    return l;
}

// Output goes to a string first so a failing command leaves no partial file behind.
void emit(const Common& c, const std::string& text) {
    if (c.out.empty()) {
        std::cout << text;
        return;
    }
    std::ofstream f(c.out, std::ios::binary);
    if (!f) throw Error(ErrorCode::InvalidArgument, "cannot write '" + c.out + "'");
    f << text;
}

double default_sigma(const MemoryConfig& cfg) {
    const auto n = std::max<std::size_t>(1, cfg.half_count());
    return 0.2 * static_cast<double>(n) * cfg.unit_delta;
}

// ---- spectrum ------------------------------------------------------------------------

struct SpectrumArgs {
    Common c;
    std::string band = "-1:1";
    std::size_t points = 2001;
    std::string reference = "analytic";
};

int run_spectrum(const SpectrumArgs& a) {
    auto [cfg, manifest] = load(a.c, "spectrum");
    const auto [lo, hi] = parse_band(a.band);
    const auto grid = pole_safe_grid(cfg, lo, hi, a.points);
    double t0 = 0.0;
    if (a.reference == "analytic") t0 = t0_analytic(cfg);
    else if (a.reference == "matching") t0 = t0_matching(cfg);
    else if (a.reference == "fit") t0 = fit_reference_delay(cfg, grid).t0;
    else throw Error(ErrorCode::InvalidArgument, "--reference must be analytic, matching or fit");
    const auto samples = sample_spectrum(cfg, grid, t0);

    const auto diag = broadband_diagnostic(cfg);
    manifest.extra = {{"band", format_double(lo) + ":" + format_double(hi)},
                      {"points", std::to_string(a.points)},
                      {"reference", a.reference},
                      {"t0_reference", format_double(t0)},
                      {"t0_analytic", format_double(t0_analytic(cfg))},
                      {"t0_matching", format_double(t0_matching(cfg))},
                      {"broadband_regime", diag.holds ? "holds" : "violated"}};
    std::ostringstream os;
    write_manifest(os, manifest);
    CsvWriter csv(os);
    csv.header({"nu", "re_S", "im_S", "eta", "delay", "delta_S2", "dbs", "dbs_clamped"});
    for (std::size_t k = 0; k < samples.nu.size(); ++k)
        csv.row({samples.nu[k], samples.s[k].real(), samples.s[k].imag(), samples.efficiency[k],
                 samples.delay[k], samples.error[k], samples.dbs[k],
                 samples.dbs_clamped[k] ? 1.0 : 0.0});
    emit(a.c, os.str());
    return exit_ok;
}

// ---- topology ------------------------------------------------------------------------

struct TopologyArgs {
    Common c;
    double g_min = 0.05;
    double g_max = 0.6;
    std::size_t steps = 200;
    std::optional<double> sigma;
    std::string echo_time = "critical";
    double tol_merge = 1e-4;
};

int run_topology(const TopologyArgs& a) {
    auto [tmpl, manifest] = load(a.c, "topology");
    if (tmpl.absorbers.empty()) throw Error(ErrorCode::InvalidArgument, "topology needs absorbers");
    if (!(a.g_max >= a.g_min) || !(a.g_min > 0.0))
        throw Error(ErrorCode::InvalidArgument, "need 0 < g-min <= g-max");
    std::vector<double> g_grid;
    if (a.g_max == a.g_min || a.steps <= 1) g_grid.push_back(a.g_min);
    else g_grid = linear_grid(a.g_min, a.g_max, a.steps);

    const int n_half = static_cast<int>(tmpl.half_count());
    const double g_cr = g_critical(n_half, tmpl.unit_delta);
    InputPulse pulse{a.sigma.value_or(default_sigma(tmpl)), 0.0};
    std::optional<double> fixed_t;
    if (a.echo_time == "critical") fixed_t = t0_critical(n_half, tmpl.unit_delta);
    else if (a.echo_time != "analytic") {
        try {
            fixed_t = std::stod(a.echo_time);
        } catch (const std::logic_error&) {
            throw Error(ErrorCode::InvalidArgument, "--echo-time must be critical, analytic or a number");
        }
    }

    TrajectoryOptions topt;
    topt.tol_merge = a.tol_merge;
    topt.roots.seed = a.c.seed;
    const auto traj = line_trajectories(tmpl, g_grid, topt);
    std::vector<double> echo(g_grid.size());
    parallel_for(g_grid.size(), [&](std::size_t k) {
        const auto cfg = with_uniform_coupling(tmpl, g_grid[k]);
        echo[k] = echo_intensity(cfg, fixed_t.value_or(t0_analytic(cfg)), pulse);
    });

    manifest.extra = {{"g_range", format_double(a.g_min) + ":" + format_double(a.g_max)},
                      {"steps", std::to_string(g_grid.size())},
                      {"sigma", format_double(pulse.sigma)},
                      {"echo_time", fixed_t ? format_double(*fixed_t) : std::string("analytic")},
                      {"tol_merge", format_double(a.tol_merge)},
                      {"g_critical", format_double(g_cr)}};
    std::ostringstream os;
    write_manifest(os, manifest);
    CsvWriter csv(os);
    std::vector<std::size_t> interior;
    for (std::size_t b = 0; b < traj.branches.size(); ++b)
        if (b != traj.cavity_branch) interior.push_back(b);
    std::vector<std::string> cols{"g"};
    for (std::size_t i = 0; i < interior.size(); ++i) cols.push_back("E_" + std::to_string(i + 1));
    for (std::size_t i = 0; i < interior.size(); ++i) cols.push_back("W_" + std::to_string(i + 1));
    cols.push_back("n_distinct_lines");
    cols.push_back("I_echo");
    csv.header(cols);
    for (std::size_t k = 0; k < g_grid.size(); ++k) {
        std::vector<double> row{g_grid[k]};
        for (auto b : interior) row.push_back(traj.branches[b][k].real());
        for (auto b : interior) row.push_back(-2.0 * traj.branches[b][k].imag());
        row.push_back(static_cast<double>(traj.distinct_counts[k]));
        row.push_back(echo[k]);
        csv.row(row);
    }

    std::size_t best = 0;
    for (std::size_t k = 1; k < echo.size(); ++k)
        if (echo[k] > echo[best]) best = k;
    std::ostringstream summary;
    summary << "summary: merge_events=" << traj.merge_events.size()
            << " split_events=" << traj.split_events.size() << " g_echo_max=" << format_double(g_grid[best])
            << " I_echo_max=" << format_double(echo[best]);
    if (!traj.merge_events.empty()) {
        const auto& ev = traj.merge_events.front();
        const double g_star = transition_point(tmpl, ev.g_before, ev.g_after, a.tol_merge, 1e-6, topt.roots);
        const double half_width = 0.1 * g_cr;
        summary << " lines=" << ev.lines_before << "->" << ev.lines_after << " g_star=" << format_double(g_star)
                << " merge_window=" << format_double(g_star - half_width) << ":"
                << format_double(g_star + half_width)
                << " echo_offset=" << format_double(std::abs(g_grid[best] - g_star));
    } else {
        summary << " g_star=none";
    }
    csv.comment(summary.str());
    emit(a.c, os.str());
    return exit_ok;
}

// ---- optimize ------------------------------------------------------------------------

struct OptimizeArgs {
    Common c;
    std::string objective = "residuals";
    std::string band = "-0.6:0.6";
    std::size_t points = 241;
    double tolerance = 1e-12;
    int conditions = 0;
    int max_evaluations = 20000;
    std::string report;
};

nlohmann::ordered_json residuals_json(const MatchingResiduals& r) {
    nlohmann::ordered_json j;
    j["t0"] = r.t0;
    j["residuals"] = r.residuals;
    j["signed_residuals"] = r.signed_residuals;
    j["weights"] = r.weights;
    return j;
}

int run_optimize(const OptimizeArgs& a) {
    auto [cfg, manifest] = load(a.c, "optimize");
    OptimizeOptions opt;
    opt.objective = parse_objective(a.objective);
    std::tie(opt.band_lo, opt.band_hi) = parse_band(a.band);
    opt.band_points = a.points;
    opt.tolerance = a.tolerance;
    opt.conditions = a.conditions;
    opt.max_evaluations = a.max_evaluations;
    opt.seed = a.c.seed;
    const auto rep = optimize(cfg, opt);

    nlohmann::ordered_json j;
    j["command"] = "optimize";
    j["tool_version"] = tool_version;
    j["config_hash"] = manifest.config_hash;
    j["seed"] = a.c.seed;
    j["objective"] = to_string(rep.objective);
    j["band"] = {opt.band_lo, opt.band_hi};
    j["converged"] = rep.converged;
    j["iterations"] = rep.iterations;
    j["evaluations"] = rep.evaluations;
    j["initial_objective"] = rep.initial_objective;
    j["final_objective"] = rep.final_objective;
    j["band_error"] = rep.band_error;
    j["reference_delay"] = rep.reference_delay;
    j["initial_residuals"] = residuals_json(rep.initial_residuals);
    j["final_residuals"] = residuals_json(rep.final_residuals);
    j["residual_history"] = rep.residual_history;
    j["initial_config"] = config_to_json(rep.initial_config);
    j["final_config"] = config_to_json(rep.final_config);
    const std::string report = j.dump(2) + "\n";

    if (!a.c.out.empty()) save_config(rep.final_config, a.c.out);
    if (a.report.empty()) {
        std::cout << report;
    } else {
        std::ofstream f(a.report, std::ios::binary);
        if (!f) throw Error(ErrorCode::InvalidArgument, "cannot write '" + a.report + "'");
        f << report;
    }
    require_converged(rep);
    return exit_ok;
}

// ---- echo ----------------------------------------------------------------------------

struct EchoArgs {
    Common c;
    std::optional<double> t;
    std::optional<double> sigma;
};

int run_echo(const EchoArgs& a) {
    auto [cfg, manifest] = load(a.c, "echo");
    const InputPulse pulse{a.sigma.value_or(default_sigma(cfg)), 0.0};
    const double t = a.t.value_or(t0_analytic(cfg));
    std::ostringstream os;
    write_manifest(os, manifest);
    CsvWriter csv(os);
    csv.header({"T", "sigma", "I_echo", "t0_analytic", "t0_matching"});
    csv.row({t, pulse.sigma, echo_intensity(cfg, t, pulse), t0_analytic(cfg), t0_matching(cfg)});
    emit(a.c, os.str());
    return exit_ok;
}

// ---- simulate ------------------------------------------------------------------------

struct SimulateArgs {
    Common c;
    std::optional<double> sigma;
    double t_end = 0.0;
    double dt = 0.05;
    bool ring_down = false;
    bool exponential = false;
};

int run_simulate(const SimulateArgs& a) {
    auto [cfg, manifest] = load(a.c, "simulate");
    const InputPulse pulse{a.sigma.value_or(default_sigma(cfg)), 0.0};
    SimulationOptions opt;
    opt.t_end = a.t_end;
    opt.dt_out = a.dt;
    opt.ring_down = a.ring_down;
    opt.force_exponential = a.exponential;
    const auto tr = simulate(cfg, pulse, opt);
    manifest.extra = {{"method", tr.method},
                      {"sigma", format_double(pulse.sigma)},
                      {"pulse_center", format_double(tr.pulse_center)},
                      {"input_energy", format_double(tr.input_energy)},
                      {"output_energy", format_double(tr.output_energy)},
                      {"loss_energy", format_double(tr.loss_energy)},
                      {"stored_energy_end", format_double(tr.stored_energy_end)}};
    std::ostringstream os;
    write_manifest(os, manifest);
    CsvWriter csv(os);
    csv.header({"t", "re_a_in", "im_a_in", "re_a_out", "im_a_out", "abs2_a_out", "abs2_a_cavity"});
    for (std::size_t k = 0; k < tr.t.size(); ++k)
        csv.row({tr.t[k], tr.a_in[k].real(), tr.a_in[k].imag(), tr.a_out[k].real(), tr.a_out[k].imag(),
                 std::norm(tr.a_out[k]), std::norm(tr.a_cavity[k])});
    emit(a.c, os.str());
    return exit_ok;
}

// ---- validate ------------------------------------------------------------------------

struct ValidateArgs {
    Common c;
    std::optional<double> sigma;
};

int run_validate(const ValidateArgs& a) {
    auto [cfg, manifest] = load(a.c, "validate");
    std::ostringstream os;
    write_manifest(os, manifest);
    bool all_ok = true;
    auto report = [&](const std::string& name, std::optional<bool> ok, const std::string& detail) {
        const char* tag = !ok ? "SKIP" : (*ok ? "PASS" : "FAIL");
        if (ok && !*ok) all_ok = false;
        os << tag << " " << name << ": " << detail << "\n";
    };

    const bool sym = is_symmetric(cfg);
    if (cfg.symmetric) report("symmetry", sym, sym ? "partners found" : "symmetric flag set but partners missing");
    else report("symmetry", std::nullopt, "symmetric flag not set");

    double span = 1.0;
    for (const auto& ab : cfg.absorbers) span = std::max(span, std::abs(ab.detuning) + 1.0);
    const auto grid = pole_safe_grid(cfg, -span, span, 2001);
    double dev = 0.0;
    double eta_max = 0.0;
    for (double nu : grid) {
        const double eta = spectral_efficiency(cfg, nu);
        dev = std::max(dev, std::abs(std::sqrt(eta) - 1.0));
        eta_max = std::max(eta_max, eta);
    }
    if (cfg.lossless()) report("unimodularity", dev <= 1e-12, "max ||S|-1| = " + format_double(dev));
    else report("passivity", eta_max <= 1.0 + 1e-12, "max eta = " + format_double(eta_max));

    if (cfg.lossless() && sym && !cfg.absorbers.empty()) {
        const double h = 1e-5;
        const double slope = (continuous_phase(cfg, h) - continuous_phase(cfg, -h)) / (2.0 * h);
        double expect = 4.0 / cfg.kappa;
        for (const auto& ab : positive_half(cfg)) expect += 4.0 * ab.g / (ab.detuning * ab.detuning);
        const double err = std::abs(slope - expect);
        report("delay_identity", err <= 1e-6 * std::max(1.0, expect),
               "|T(0) - 4/kappa - 4 sum g/Delta^2| = " + format_double(err));
    } else {
        report("delay_identity", std::nullopt, "needs a lossless symmetric config");
    }

    const InputPulse pulse{a.sigma.value_or(default_sigma(cfg)), 0.0};
    SimulationOptions sopt;
    sopt.ring_down = true;
    const auto tr = simulate(cfg, pulse, sopt);
    const auto tf = output_via_tf(cfg, pulse, tr.t);
    const double l2 = relative_l2(tr.a_out, tf);
    report("time_frequency_equivalence", l2 <= 1e-6, "relative L2 = " + format_double(l2));
    const double imbalance =
        std::abs(tr.input_energy - tr.output_energy - tr.loss_energy - tr.stored_energy_end);
    report("energy_balance", imbalance <= 1e-6,
           "|E_in - E_out - E_loss - E_stored| = " + format_double(imbalance) + " (" + tr.method + ")");

    emit(a.c, os.str());
    return all_ok ? exit_ok : exit_validation;
}

// ---- gen-comb ------------------------------------------------------------------------

struct GenCombArgs {
    Common c;
    std::size_t n = 2;
    double delta = 1.0;
    std::optional<double> g;
    double gamma = 1e-4;   // used unless --gamma is given
    double kappa = 100.0;  // used unless --kappa is given
};

int run_gen_comb(const GenCombArgs& a) {
    if (a.n == 0) throw Error(ErrorCode::InvalidArgument, "--n must be >= 1");
    const double g = a.g.value_or(g_critical(static_cast<int>(a.n), a.delta));
    auto cfg = equidistant_comb(a.n, g, a.c.gamma.value_or(a.gamma), a.c.kappa.value_or(a.kappa), a.delta);
    validate(cfg);
    emit(a.c, serialize_config(cfg));
    return exit_ok;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"qmem: multi-absorber cavity quantum memory toolkit"};
    app.require_subcommand(1);

    SpectrumArgs spectrum;
    auto* s = app.add_subcommand("spectrum", "S(nu), efficiency, delay and spectral error on a grid");
    add_common(s, spectrum.c);
    s->add_option("--band", spectrum.band, "frequency band LO:HI")->capture_default_str();
    s->add_option("--points", spectrum.points, "grid points")->capture_default_str();
    s->add_option("--reference", spectrum.reference, "reference delay: analytic, matching or fit")
        ->capture_default_str();

    TopologyArgs topology;
    auto* t = app.add_subcommand("topology", "resonance lines and echo intensity over a coupling sweep");
    add_common(t, topology.c);
    t->add_option("--g-min", topology.g_min)->capture_default_str();
    t->add_option("--g-max", topology.g_max)->capture_default_str();
    t->add_option("--steps", topology.steps)->capture_default_str();
    t->add_option("--sigma", topology.sigma, "pulse width (default 0.2 N Delta)");
    t->add_option("--echo-time", topology.echo_time, "critical, analytic or a number")->capture_default_str();
    t->add_option("--tol-merge", topology.tol_merge)->capture_default_str();

    OptimizeArgs optimize_args;
    auto* o = app.add_subcommand("optimize", "optimize {g_n, Delta_n} of a symmetric comb");
    add_common(o, optimize_args.c);
    o->add_option("--objective", optimize_args.objective, "residuals, band_error or mixed")
        ->check(CLI::IsMember({"residuals", "band_error", "mixed"}))
        ->capture_default_str();
    o->add_option("--band", optimize_args.band)->capture_default_str();
    o->add_option("--points", optimize_args.points)->capture_default_str();
    o->add_option("--tolerance", optimize_args.tolerance)->capture_default_str();
    o->add_option("--conditions", optimize_args.conditions, "matching conditions (0: 2N-1)")
        ->capture_default_str();
    o->add_option("--max-evaluations", optimize_args.max_evaluations)->capture_default_str();
    o->add_option("--report", optimize_args.report, "report path (default stdout)");

    EchoArgs echo;
    auto* e = app.add_subcommand("echo", "normalized echo intensity");
    add_common(e, echo.c);
    e->add_option("--t", echo.t, "retrieval time (default T(0))");
    e->add_option("--sigma", echo.sigma, "pulse width (default 0.2 N Delta)");

    SimulateArgs sim;
    auto* m = app.add_subcommand("simulate", "time-domain integration of the mode equations");
    add_common(m, sim.c);
    m->add_option("--sigma", sim.sigma, "pulse width (default 0.2 N Delta)");
    m->add_option("--t-end", sim.t_end, "end time (0: automatic)")->capture_default_str();
    m->add_option("--dt", sim.dt, "output spacing")->capture_default_str();
    m->add_flag("--ring-down", sim.ring_down, "continue until all modes are below 1e-8");
    m->add_flag("--exponential", sim.exponential, "force exponential stepping");

    ValidateArgs val;
    auto* v = app.add_subcommand("validate", "run invariant and oracle checks on one config");
    add_common(v, val.c);
    v->add_option("--sigma", val.sigma, "pulse width (default 0.2 N Delta)");

    GenCombArgs gen;
    auto* g = app.add_subcommand("gen-comb", "write an equidistant comb config");
    add_common(g, gen.c, false);
    g->add_option("--n", gen.n, "absorber pairs N")->capture_default_str();
    g->add_option("--delta", gen.delta, "comb spacing")->capture_default_str();
    g->add_option("--g", gen.g, "uniform g (default g_cr(N))");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& err) {
        const int rc = app.exit(err);
        return rc == 0 ? exit_ok : exit_config;
    }

    try {
        if (*s) return run_spectrum(spectrum);
        if (*t) return run_topology(topology);
        if (*o) return run_optimize(optimize_args);
        if (*e) return run_echo(echo);
        if (*m) return run_simulate(sim);
        if (*v) return run_validate(val);
        if (*g) return run_gen_comb(gen);
    } catch (const Error& err) {
        std::cerr << "error: " << err.what() << "\n";
        return is_numeric_failure(err.code()) ? exit_numeric : exit_config;
    } catch (const std::exception& err) {
        std::cerr << "error: " << err.what() << "\n";
        return exit_numeric;
    }
    return exit_config;
}
