#include "qmem/config_io.hpp"
#include "qmem/table.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

#include <cstdio>
#include <limits>
#include <random>
#include <sstream>
#include <string>

using namespace qmem;

namespace {

std::string parse_error_of(const std::string& text) {
    try {
        parse_config(text);
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::ConfigParse);
        return e.what();
    }
    ADD_FAILURE() << "no error for: " << text;
    return {};
}

} // namespace

TEST(ConfigIo, RoundTripIsExact) {
    std::mt19937_64 rng(51);
    for (int c = 0; c < 20; ++c) {
        auto cfg = fixtures::random_symmetric(rng, 1 + c % 5, c % 2 ? 1e-2 : 0.0);
        cfg.unit_delta = 0.25 + c;
        cfg.symmetric = c % 3 != 0;
        const auto text = serialize_config(cfg);
        EXPECT_EQ(parse_config(text), cfg);
        EXPECT_EQ(serialize_config(parse_config(text)), text);
    }
}

TEST(ConfigIo, GammaDefaultsToZero) {
    const auto cfg = parse_config(R"({"kappa": 50, "absorbers": [{"detuning": -1, "g": 0.3}, {"detuning": 1, "g": 0.3}]})");
    EXPECT_EQ(cfg.kappa, 50.0);
    EXPECT_EQ(cfg.unit_delta, 1.0);
    ASSERT_EQ(cfg.absorbers.size(), 2u);
    EXPECT_EQ(cfg.absorbers[0].gamma, 0.0);
}

TEST(ConfigIo, PhysicalUnitsAreNormalized) {
    const auto cfg = parse_config(R"({"kappa": 2e8, "delta_unit": 2e6, "units": "physical",
        "absorbers": [{"detuning": -1e6, "g": 7.44e5, "gamma": 200}, {"detuning": 1e6, "g": 7.44e5, "gamma": 200}]})");
    EXPECT_EQ(cfg.unit_delta, 1.0);
    EXPECT_DOUBLE_EQ(cfg.kappa, 100.0);
    EXPECT_DOUBLE_EQ(cfg.absorbers[1].detuning, 0.5);
    EXPECT_DOUBLE_EQ(cfg.absorbers[1].g, 0.372);
    EXPECT_DOUBLE_EQ(cfg.absorbers[1].gamma, 1e-4);

    const auto raw = parse_config(R"({"kappa": 2e8, "delta_unit": 2e6,
        "absorbers": [{"detuning": -1e6, "g": 7.44e5}, {"detuning": 1e6, "g": 7.44e5}]})");
    EXPECT_EQ(raw.unit_delta, 2e6);
    EXPECT_EQ(raw.kappa, 2e8);
}

TEST(ConfigIo, FieldLevelErrors) {
    const std::string negative_g =
        R"({"kappa": 1, "absorbers": [{"detuning": -1, "g": 0.3}, {"detuning": 1, "g": -0.3}]})";
    EXPECT_NE(parse_error_of(negative_g).find("absorbers[1].g: must be >= 0"), std::string::npos);
    EXPECT_NE(parse_error_of(R"({"kappa": 1, "absorbers": [], "kapa": 2})").find("kapa: unknown field"), std::string::npos);
    EXPECT_NE(parse_error_of(R"({"kappa": 1, "absorbers": [{"detuning": 1, "g": 0.3}]})").find("count must be even"),
              std::string::npos);
    EXPECT_NE(parse_error_of(R"({"absorbers": []})").find("kappa: missing"), std::string::npos);
    EXPECT_NE(parse_error_of(R"({"kappa": "big", "absorbers": []})").find("kappa: expected a number"), std::string::npos);
    EXPECT_NE(parse_error_of(R"({"kappa": 1, "absorbers": [], "units": "si"})").find("units"), std::string::npos);
    EXPECT_NE(parse_error_of(R"({"kappa": 1, "absorbers": [{"detuning": 0, "g": 1}, {"detuning": 1, "g": 1}]})")
                  .find("absorbers[0].detuning"),
              std::string::npos);
    EXPECT_NE(parse_error_of("[1, 2]").find("<root>"), std::string::npos);
}

TEST(ConfigIo, SyntaxErrorReportsLine) {
    const std::string text = "{\n  \"kappa\": 100,\n  \"absorbers\": [\n    {\"detuning\": 1 \"g\": 0.3}\n  ]\n}\n";
    EXPECT_NE(parse_error_of(text).find("line 4"), std::string::npos);
}

TEST(ConfigIo, EmptyAbsorberListAllowed) {
    const auto cfg = parse_config(R"({"kappa": 10, "absorbers": []})");
    EXPECT_TRUE(cfg.absorbers.empty());
}

TEST(ConfigIo, LoadNamesThePath) {
    const std::string path = ::testing::TempDir() + "qmem_bad_config.json";
    {
        std::FILE* f = std::fopen(path.c_str(), "w");
        ASSERT_NE(f, nullptr);
        std::fputs(R"({"kappa": -1, "absorbers": []})", f);
        std::fclose(f);
    }
    try {
        load_config(path);
        FAIL() << "expected ConfigParse";
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::ConfigParse);
        EXPECT_EQ(std::string(e.what()), "ConfigParse: " + path + ": kappa: must be > 0");
    }
    EXPECT_THROW(load_config(path + ".missing"), Error);
    std::remove(path.c_str());
}

TEST(ConfigIo, SaveLoadRoundTrip) {
    const auto cfg = equidistant_comb(3, 0.35, 1e-3, 250.0);
    const std::string path = ::testing::TempDir() + "qmem_round_trip.json";
    save_config(cfg, path);
    EXPECT_EQ(load_config(path), cfg);
    std::remove(path.c_str());
}

TEST(ConfigIo, HashIsStableAndSensitive) {
    const auto cfg = equidistant_comb(2, 0.318, 1e-4, 100.0);
    EXPECT_EQ(config_hash(cfg), config_hash(parse_config(serialize_config(cfg))));
    auto other = cfg;
    other.absorbers[0].g = std::nextafter(other.absorbers[0].g, 1.0);
    EXPECT_NE(config_hash(cfg), config_hash(other));
    EXPECT_EQ(hex64(0x0123456789abcdefull), "0123456789abcdef");
    EXPECT_EQ(hex64(config_hash(cfg)).size(), 16u);
}

TEST(FormatDouble, ShortestRoundTrip) {
    std::mt19937_64 rng(52);
    std::uniform_real_distribution<double> mant(-1.0, 1.0);
    std::uniform_int_distribution<int> expo(-300, 300);
    for (int r = 0; r < 1000; ++r) {
        const double x = std::ldexp(mant(rng), expo(rng));
        EXPECT_EQ(std::stod(format_double(x)), x);
    }
    EXPECT_EQ(format_double(0.1), "0.1");
    EXPECT_EQ(format_double(100.0), "100");
    EXPECT_EQ(format_double(-1.5), "-1.5");
}

TEST(Manifest, CommentLinesAndCsv) {
    RunManifest m;
    m.command = "spectrum";
    m.config_hash = "abc";
    m.seed = 3;
    m.overrides = {{"gamma", "0.001"}};
    m.extra = {{"points", "5"}};
    std::ostringstream os;
    write_manifest(os, m);
    CsvWriter csv(os);
    csv.header({"a", "b"});
    csv.row({1.0, 0.25});
    std::istringstream in(os.str());
    std::string line;
    std::size_t comments = 0;
    std::string last;
    while (std::getline(in, line)) {
        if (line.rfind("# ", 0) == 0) ++comments;
        last = line;
    }
    EXPECT_EQ(comments, 7u);
    EXPECT_EQ(last, "1,0.25");
    EXPECT_NE(os.str().find("# override: gamma=0.001\n"), std::string::npos);
    EXPECT_NE(os.str().find("# tool_version: 0.1.0\n"), std::string::npos);
}
