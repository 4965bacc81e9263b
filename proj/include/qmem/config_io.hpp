#pragma once

// JSON config files:
//   { "kappa": 100, "delta_unit": 1, "symmetric": true,
//     "absorbers": [ {"detuning": -0.5, "g": 0.318, "gamma": 1e-4}, ... ],
//     "units": "normalized" | "physical" }
// With "units": "physical" every frequency is divided by delta_unit on ingestion and
// unit_delta becomes 1; otherwise values are read as given. Files are written without
// "units", so a written file reads back to the same config.

#include "qmem/config.hpp"
#include "qmem/errors.hpp"

#include <json.hpp>

#include <array>
#include <charconv>
#include <cstdint>
#include <cmath>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <system_error>

namespace qmem {

// Shortest decimal string that reads back to the same double.
inline std::string format_double(double x) {
    std::array<char, 64> buf{};
    const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), x);
    return std::string(buf.data(), res.ptr);
}

namespace detail {

inline std::size_t line_of_offset(const std::string& text, std::size_t offset) {
    std::size_t line = 1;
    for (std::size_t i = 0; i < offset && i < text.size(); ++i)
        if (text[i] == '\n') ++line;
    return line;
}

[[noreturn]] inline void parse_fail(const std::string& field, const std::string& msg) {
    throw Error(ErrorCode::ConfigParse, field + ": " + msg);
}

inline double number_field(const nlohmann::json& obj, const std::string& key,
                           const std::string& path, std::optional<double> fallback = {}) {
    const auto it = obj.find(key);
    if (it == obj.end()) {
        if (fallback) return *fallback;
        parse_fail(path + key, "missing required number");
    }
    if (!it->is_number()) parse_fail(path + key, "expected a number, got " + std::string(it->type_name()));
    const double v = it->get<double>();
    if (!std::isfinite(v)) parse_fail(path + key, "must be finite");
    return v;
}

inline void reject_unknown(const nlohmann::json& obj, const std::set<std::string>& known,
                           const std::string& path) {
    for (auto it = obj.begin(); it != obj.end(); ++it)
        if (!known.count(it.key())) parse_fail(path + it.key(), "unknown field");
}

} // namespace detail

inline MemoryConfig config_from_json(const nlohmann::json& j) {
    using detail::parse_fail;
    if (!j.is_object()) parse_fail("<root>", "expected a JSON object");
    detail::reject_unknown(j, {"kappa", "delta_unit", "absorbers", "symmetric", "units"}, "");

    bool physical = false;
    if (auto it = j.find("units"); it != j.end()) {
        if (!it->is_string()) parse_fail("units", "expected \"normalized\" or \"physical\"");
        const auto u = it->get<std::string>();
        if (u == "physical") physical = true;
        else if (u != "normalized") parse_fail("units", "expected \"normalized\" or \"physical\", got \"" + u + "\"");
    }
    MemoryConfig cfg;
    const double unit = detail::number_field(j, "delta_unit", "", 1.0);
    if (!(unit > 0.0)) parse_fail("delta_unit", "must be > 0");
    const double scale = physical ? unit : 1.0;
    cfg.unit_delta = physical ? 1.0 : unit;
    cfg.kappa = detail::number_field(j, "kappa", "") / scale;
    if (!(cfg.kappa > 0.0)) parse_fail("kappa", "must be > 0");
    if (auto it = j.find("symmetric"); it != j.end()) {
        if (!it->is_boolean()) parse_fail("symmetric", "expected true or false");
        cfg.symmetric = it->get<bool>();
    }
    const auto ab = j.find("absorbers");
    if (ab == j.end()) parse_fail("absorbers", "missing required array");
    if (!ab->is_array()) parse_fail("absorbers", "expected an array");
    for (std::size_t i = 0; i < ab->size(); ++i) {
        const auto& e = (*ab)[i];
        const std::string path = "absorbers[" + std::to_string(i) + "].";
        if (!e.is_object()) parse_fail(path.substr(0, path.size() - 1), "expected an object");
        detail::reject_unknown(e, {"detuning", "g", "gamma"}, path);
        Absorber a;
        a.detuning = detail::number_field(e, "detuning", path) / scale;
        a.g = detail::number_field(e, "g", path) / scale;
        a.gamma = detail::number_field(e, "gamma", path, 0.0) / scale;
        if (a.detuning == 0.0) parse_fail(path + "detuning", "must be nonzero");
        if (a.g < 0.0) parse_fail(path + "g", "must be >= 0");
        if (a.gamma < 0.0) parse_fail(path + "gamma", "must be >= 0");
        cfg.absorbers.push_back(a);
    }
    if (cfg.absorbers.size() % 2 != 0)
        parse_fail("absorbers", "count must be even, got " + std::to_string(cfg.absorbers.size()));
    return cfg;
}

inline MemoryConfig parse_config(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw Error(ErrorCode::ConfigParse, "line " + std::to_string(detail::line_of_offset(text, e.byte)) +
                                                ": " + e.what());
    }
    return config_from_json(j);
}

inline MemoryConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::ConfigParse, "cannot open config file '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    try {
        return parse_config(ss.str());
    } catch (const Error& e) {
        throw Error(ErrorCode::ConfigParse, path + ": " + std::string(e.what()).substr(13));
    }
}

inline nlohmann::ordered_json config_to_json(const MemoryConfig& cfg) {
    nlohmann::ordered_json j;
    j["kappa"] = cfg.kappa;
    j["delta_unit"] = cfg.unit_delta;
    j["symmetric"] = cfg.symmetric;
    auto arr = nlohmann::ordered_json::array();
    for (const auto& a : cfg.absorbers) {
        nlohmann::ordered_json e;
        e["detuning"] = a.detuning;
        e["g"] = a.g;
        e["gamma"] = a.gamma;
        arr.push_back(std::move(e));
    }
    j["absorbers"] = std::move(arr);
    return j;
}

inline std::string serialize_config(const MemoryConfig& cfg) { return config_to_json(cfg).dump(2) + "\n"; }

inline void save_config(const MemoryConfig& cfg, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorCode::InvalidArgument, "cannot write '" + path + "'");
    out << serialize_config(cfg);
}

// 64-bit FNV-1a of the canonical serialization.
inline std::uint64_t config_hash(const MemoryConfig& cfg) {
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char c : config_to_json(cfg).dump()) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

inline std::string hex64(std::uint64_t v) {
    static const char* digits = "0123456789abcdef";
    std::string s(16, '0');
    for (int i = 15; i >= 0; --i) {
        s[static_cast<std::size_t>(i)] = digits[v & 0xf];
        v >>= 4;
    }
    return s;
}

} // namespace qmem
