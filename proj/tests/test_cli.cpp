// Runs the built qmem binary and checks outputs and exit codes.

#include "qmem/config_io.hpp"
#include "qmem/matching.hpp"

#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

using namespace qmem;
namespace fs = std::filesystem;

namespace {

const std::string cli = QMEM_CLI_PATH;
const std::string samples = QMEM_SAMPLES_DIR;

std::string scratch(const std::string& name) {
    fs::create_directories(QMEM_SCRATCH_DIR);
    return std::string(QMEM_SCRATCH_DIR) + "/" + name;
}

int run(const std::string& args, std::string stdout_path = {}) {
    if (stdout_path.empty()) stdout_path = scratch("last_run.txt");
    const std::string cmd = "'" + cli + "' " + args + " > '" + stdout_path + "' 2> '" + stdout_path + ".err'";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::vector<std::string> data_lines(const std::string& text) {
    std::vector<std::string> out;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line))
        if (!line.empty() && line[0] != '#') out.push_back(line);
    return out;
}

std::vector<double> split_numbers(const std::string& line) {
    std::vector<double> v;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) v.push_back(std::stod(cell));
    return v;
}

std::string comment_value(const std::string& text, const std::string& key) {
    const auto at = text.find("# " + key + ": ");
    if (at == std::string::npos) return {};
    const auto start = at + key.size() + 4;
    return text.substr(start, text.find('\n', start) - start);
}

} // namespace

TEST(Cli, HelpExitsZero) {
    EXPECT_EQ(run("--help"), 0);
    EXPECT_EQ(run("spectrum --help"), 0);
}

TEST(Cli, GenCombWritesCriticalComb) {
    const auto path = scratch("comb.json");
    ASSERT_EQ(run("gen-comb --n 3 --out '" + path + "'"), 0);
    const auto cfg = load_config(path);
    ASSERT_EQ(cfg.absorbers.size(), 6u);
    EXPECT_DOUBLE_EQ(cfg.absorbers[0].g, g_critical(3));
    EXPECT_DOUBLE_EQ(cfg.absorbers[0].detuning, -2.5);
    EXPECT_EQ(cfg.absorbers[0].gamma, 1e-4);
    EXPECT_EQ(cfg.kappa, 100.0);
    EXPECT_TRUE(cfg.symmetric);
}

TEST(Cli, SpectrumTable) {
    const auto out = scratch("spectrum.csv");
    ASSERT_EQ(run("spectrum --config '" + samples + "/initial_n2.json' --band=-1:1 --points 101 --out '" + out + "'"), 0);
    const auto text = read_file(out);
    const auto rows = data_lines(text);
    ASSERT_EQ(rows.size(), 102u);
    EXPECT_EQ(rows[0], "nu,re_S,im_S,eta,delay,delta_S2,dbs,dbs_clamped");
    for (std::size_t k = 1; k < rows.size(); ++k) {
        const auto v = split_numbers(rows[k]);
        ASSERT_EQ(v.size(), 8u);
        EXPECT_NEAR(v[3], v[1] * v[1] + v[2] * v[2], 1e-12);
        EXPECT_LE(v[3], 1.0);
    }
    EXPECT_EQ(comment_value(text, "command"), "spectrum");
    EXPECT_EQ(comment_value(text, "reference"), "analytic");
    EXPECT_EQ(comment_value(text, "broadband_regime"), "violated");
    EXPECT_EQ(comment_value(text, "config_hash").size(), 16u);
}

TEST(Cli, SpectrumOverridesAreRecorded) {
    const auto out = scratch("spectrum_override.csv");
    ASSERT_EQ(run("spectrum --config '" + samples + "/initial_n2.json' --gamma 0 --kappa 1e4 --points 11 --out '" + out + "'"), 0);
    const auto text = read_file(out);
    EXPECT_NE(text.find("# override: gamma=0\n"), std::string::npos);
    EXPECT_NE(text.find("# override: kappa=10000\n"), std::string::npos);
    for (std::size_t k = 1; k < data_lines(text).size(); ++k)
        EXPECT_NEAR(split_numbers(data_lines(text)[k])[3], 1.0, 1e-12);
}

TEST(Cli, TopologyFindsOneTransition) {
    const auto out = scratch("topology.csv");
    ASSERT_EQ(run("topology --config '" + samples + "/initial_n2.json' --steps 200 --out '" + out + "'"), 0);
    const auto text = read_file(out);
    const auto rows = data_lines(text);
    ASSERT_EQ(rows.size(), 201u);
    EXPECT_EQ(rows[0], "g,E_1,E_2,E_3,E_4,W_1,W_2,W_3,W_4,n_distinct_lines,I_echo");
    EXPECT_GE(split_numbers(rows[1]).back(), 0.0);
    EXPECT_EQ(split_numbers(rows[1])[9], 4.0);
    EXPECT_EQ(split_numbers(rows.back())[9], 3.0);
    EXPECT_NE(text.find("merge_events=1 "), std::string::npos);
    EXPECT_NE(text.find("lines=4->3"), std::string::npos);
}

TEST(Cli, TopologySinglePointSweep) {
    const auto out = scratch("topology_single.csv");
    ASSERT_EQ(run("topology --config '" + samples + "/initial_n2.json' --g-min 0.3 --g-max 0.3 --out '" + out + "'"), 0);
    EXPECT_EQ(data_lines(read_file(out)).size(), 2u);
    EXPECT_EQ(run("topology --config '" + samples + "/initial_n2.json' --g-min 0.5 --g-max 0.3"), 2);
}

TEST(Cli, OptimizeRoundTrip) {
    const auto cfg_out = scratch("optimized.json");
    const auto report = scratch("report.json");
    ASSERT_EQ(run("optimize --config '" + samples + "/initial_n2.json' --out '" + cfg_out + "' --report '" + report + "'"), 0);
    const auto cfg = load_config(cfg_out);
    EXPECT_TRUE(is_symmetric(cfg));
    EXPECT_LT(residuals(cfg).max_abs(), 1e-8);
    const auto j = nlohmann::json::parse(read_file(report));
    EXPECT_TRUE(j.at("converged").get<bool>());
    EXPECT_EQ(j.at("objective").get<std::string>(), "residuals");
    EXPECT_LT(j.at("final_objective").get<double>(), j.at("initial_objective").get<double>());
    // Optimizing the optimized set again is a no-op within tolerance.
    const auto again = scratch("optimized_again.json");
    ASSERT_EQ(run("optimize --config '" + cfg_out + "' --out '" + again + "'"), 0);
    const auto cfg2 = load_config(again);
    for (std::size_t n = 0; n < cfg.absorbers.size(); ++n) {
        EXPECT_NEAR(cfg2.absorbers[n].detuning, cfg.absorbers[n].detuning, 1e-6);
        EXPECT_NEAR(cfg2.absorbers[n].g, cfg.absorbers[n].g, 1e-6);
    }
}

TEST(Cli, EchoAndSimulate) {
    const auto echo = scratch("echo.csv");
    ASSERT_EQ(run("echo --config '" + samples + "/initial_n2.json' --sigma 0.4 --out '" + echo + "'"), 0);
    const auto rows = data_lines(read_file(echo));
    ASSERT_EQ(rows.size(), 2u);
    const auto v = split_numbers(rows[1]);
    EXPECT_GT(v[2], 0.0);
    EXPECT_LE(v[2], 1.0);

    const auto sim = scratch("simulate.csv");
    ASSERT_EQ(run("simulate --config '" + samples + "/initial_n2.json' --sigma 0.4 --out '" + sim + "'"), 0);
    EXPECT_GT(data_lines(read_file(sim)).size(), 100u);
}

TEST(Cli, ValidatePassesOnSamples) {
    for (const char* name : {"initial_n2.json", "optimized_n2.json", "physical_units.json"}) {
        const auto out = scratch(std::string("validate_") + name + ".txt");
        EXPECT_EQ(run("validate --config '" + samples + "/" + name + "' --out '" + out + "'"), 0) << name;
        EXPECT_EQ(read_file(out).find("FAIL"), std::string::npos) << name;
    }
}

TEST(Cli, ExitCodes) {
    const auto bad = scratch("bad.json");
    std::ofstream(bad) << R"({"kappa": 100, "absorbers": [{"detuning": -0.5, "g": -0.3}, {"detuning": 0.5, "g": 0.3}]})";
    const auto out = scratch("bad_out.txt");
    EXPECT_EQ(run("spectrum --config '" + bad + "'", out), 2);
    EXPECT_NE(read_file(out + ".err").find("absorbers[0].g"), std::string::npos);
    EXPECT_EQ(run("spectrum --config '" + bad + ".missing'"), 2);
    EXPECT_EQ(run("spectrum"), 2);
    EXPECT_EQ(run("spectrum --config '" + samples + "/initial_n2.json' --band=1:-1"), 2);

    const auto asym = scratch("asym.json");
    std::ofstream(asym) << R"({"kappa": 100, "symmetric": true, "absorbers": [{"detuning": -0.5, "g": 0.3}, {"detuning": 0.7, "g": 0.3}]})";
    EXPECT_EQ(run("validate --config '" + asym + "'"), 4);
    EXPECT_EQ(run("optimize --config '" + asym + "'"), 2);

    const auto degenerate = scratch("degenerate.json");
    std::ofstream(degenerate) << R"({"kappa": 100, "symmetric": false, "absorbers": [{"detuning": 0.5, "g": 0.3}, {"detuning": 0.5, "g": 0.2}]})";
    EXPECT_EQ(run("topology --config '" + degenerate + "' --steps 5"), 3);
}

TEST(Cli, RerunsAreByteIdentical) {
    const std::string base = "--config '" + samples + "/initial_n2.json' ";
    for (const std::string& cmd : {std::string("spectrum ") + base + "--points 201",
                                   std::string("topology ") + base + "--steps 50",
                                   std::string("optimize ") + base + "--seed 5"}) {
        const auto a = scratch("rerun_a.txt");
        const auto b = scratch("rerun_b.txt");
        ASSERT_EQ(run(cmd, a), 0) << cmd;
        ASSERT_EQ(run(cmd, b), 0) << cmd;
        EXPECT_EQ(read_file(a), read_file(b)) << cmd;
    }
}
