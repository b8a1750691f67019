#pragma once

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>

#include "mdsim/errors.hpp"
#include "mdsim/field.hpp"

namespace mdsim {

struct Snapshot {
    std::string name;
    double time = 0.0;
    ScalarField field;
};

namespace detail {

inline uint64_t fnv1a64(const std::string& bytes) {
    uint64_t hash = 1469598103934665603ull;
    for (unsigned char ch : bytes) {
        hash ^= ch;
        hash *= 1099511628211ull;
    }
    return hash;
}

/// Shortest lossless decimal form; %.17g round-trips IEEE doubles exactly.
inline std::string format_value(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

}  // namespace detail

/// Text snapshot: header lines, then one value per line in row-major order.
/// Byte-deterministic for identical inputs; the checksum covers the value
/// section exactly as written.
inline void write_snapshot(const ScalarField& f, const std::string& name, double time,
                           const std::string& path) {
    std::string values;
    values.reserve(f.v.size() * 20);
    for (double x : f.v) {
        values += detail::format_value(x);
        values += '\n';
    }
    char checksum[20];
    std::snprintf(checksum, sizeof checksum, "%016llx",
                  static_cast<unsigned long long>(detail::fnv1a64(values)));

    std::ofstream out(path, std::ios::binary);
    if (!out) throw config_error("cannot open snapshot file for writing: " + path);
    out << "mdsim-snapshot 1\n";
    out << "field " << name << "\n";
    out << "nx " << f.grid.nx << "\n";
    out << "ny " << f.grid.ny << "\n";
    out << "h " << detail::format_value(f.grid.h) << "\n";
    out << "time " << detail::format_value(time) << "\n";
    out << "checksum " << checksum << "\n";
    out << values;
    if (!out) throw config_error("snapshot write failed: " + path);
}

inline Snapshot read_snapshot(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw config_error("cannot open snapshot file: " + path);
    std::string line, word;

    auto expect_key = [&](const std::string& key) -> std::string {
        if (!std::getline(in, line)) throw config_error("truncated snapshot header: " + path);
        std::istringstream ls(line);
        std::string k, rest;
        ls >> k;
        if (k != key) throw config_error("malformed snapshot header (expected '" + key +
                                         "'): " + path);
        ls >> rest;
        return rest;
    };

    if (!std::getline(in, line) || line != "mdsim-snapshot 1")
        throw config_error("unrecognized snapshot format: " + path);
    Snapshot snap;
    snap.name = expect_key("field");
    GridSpec g;
    g.nx = std::stoi(expect_key("nx"));
    g.ny = std::stoi(expect_key("ny"));
    g.h = std::strtod(expect_key("h").c_str(), nullptr);
    snap.time = std::strtod(expect_key("time").c_str(), nullptr);
    const std::string declared = expect_key("checksum");
    if (g.nx <= 0 || g.ny <= 0 || !(g.h > 0.0))
        throw config_error("snapshot header has invalid grid data: " + path);

    snap.field = ScalarField(g);
    std::string values;
    for (int c = 0; c < g.cell_count(); ++c) {
        if (!std::getline(in, line))
            throw config_error("snapshot value count does not match header: " + path);
        values += line;
        values += '\n';
        snap.field[c] = std::strtod(line.c_str(), nullptr);
    }
    char actual[20];
    std::snprintf(actual, sizeof actual, "%016llx",
                  static_cast<unsigned long long>(detail::fnv1a64(values)));
    if (declared != actual) throw config_error("snapshot checksum mismatch: " + path);
    return snap;
}

}  // namespace mdsim
