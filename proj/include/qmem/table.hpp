#pragma once

// CSV output with a run manifest in leading '#' lines.

#include "qmem/config_io.hpp"

#include <cstdint>
#include <cstdlib>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

namespace qmem {

inline constexpr const char* tool_version = "0.1.0";

struct RunManifest {
    std::string command;
    std::string config_hash;
    std::vector<std::pair<std::string, std::string>> overrides;
    std::uint64_t seed = 0;
    std::vector<std::pair<std::string, std::string>> extra;
};

// Wall-clock time would break byte-identical reruns, so the only timestamp written is
// SOURCE_DATE_EPOCH when the caller sets it.
inline std::string manifest_timestamp() {
    const char* env = std::getenv("SOURCE_DATE_EPOCH");
    return env ? std::string(env) : std::string("unset");
}

inline void write_manifest(std::ostream& out, const RunManifest& m) {
    out << "# command: " << m.command << "\n";
    out << "# tool_version: " << tool_version << "\n";
    out << "# config_hash: " << m.config_hash << "\n";
    out << "# seed: " << m.seed << "\n";
    out << "# source_date_epoch: " << manifest_timestamp() << "\n";
    for (const auto& [k, v] : m.overrides) out << "# override: " << k << "=" << v << "\n";
    for (const auto& [k, v] : m.extra) out << "# " << k << ": " << v << "\n";
}

class CsvWriter {
public:
    explicit CsvWriter(std::ostream& out) : out_(out) {}

    void header(const std::vector<std::string>& cols) { row_strings(cols); }

    void row(const std::vector<double>& values) {
        for (std::size_t i = 0; i < values.size(); ++i) {
            if (i) out_ << ',';
            out_ << format_double(values[i]);
        }
        out_ << '\n';
    }

    void row_strings(const std::vector<std::string>& values) {
        for (std::size_t i = 0; i < values.size(); ++i) {
            if (i) out_ << ',';
            out_ << values[i];
        }
        out_ << '\n';
    }

    void comment(const std::string& line) { out_ << "# " << line << '\n'; }

private:
    std::ostream& out_;
};

} // namespace qmem
