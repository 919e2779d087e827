#pragma once

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "lvlab/errors.hpp"

namespace lvlab {

/// shortest round-trippable decimal form, locale-independent
inline std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

/// CSV assembled in memory so the bytes can be hashed and written atomically;
/// identical inputs give identical bytes regardless of thread count.
class Csv {
public:
    explicit Csv(const std::string& header) { body_ = header + "\n"; }

    void raw_row(const std::string& line) { body_ += line + "\n"; }

    template <class... Ts>
    void row(const Ts&... vals) {
        std::string line;
        append(line, vals...);
        body_ += line + "\n";
    }

    const std::string& str() const { return body_; }

    void write(const std::filesystem::path& path) const {
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        if (!out) fail(errc::internal, "cannot open " + path.string() + " for writing");
        out << body_;
    }

private:
    static void append_one(std::string& line, double v) { line += format_double(v); }
    static void append_one(std::string& line, long v) { line += std::to_string(v); }
    static void append_one(std::string& line, int v) { line += std::to_string(v); }
    static void append_one(std::string& line, std::size_t v) { line += std::to_string(v); }
    static void append_one(std::string& line, const std::string& v) { line += v; }
    static void append_one(std::string& line, const char* v) { line += v; }

    template <class T, class... Ts>
    static void append(std::string& line, const T& v, const Ts&... rest) {
        append_one(line, v);
        if constexpr (sizeof...(rest) > 0) {
            line += ",";
            append(line, rest...);
        }
    }

    std::string body_;
};

inline std::uint64_t fnv1a64(const std::string& bytes) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

inline std::string hex64(std::uint64_t v) {
    char buf[19];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

inline constexpr const char* LVLAB_VERSION = "lvlab-0.1.0";

/// Run provenance for exact re-runs. The wall time line records timing only;
/// byte determinism is promised for the CSV outputs, not the manifest.
struct Manifest {
    std::string config_text;
    std::uint64_t seed = 0;
    int threads = 1;
    bool complete = false;
    double wall_seconds = 0.0;
    std::vector<std::pair<std::string, std::string>> outputs;  ///< file -> fnv1a64 hash

    void write(const std::filesystem::path& path) const {
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        if (!out) fail(errc::internal, "cannot open " + path.string() + " for writing");
        out << "version=" << LVLAB_VERSION << "\n";
        out << "config_hash=" << hex64(fnv1a64(config_text)) << "\n";
        out << "seed=" << seed << "\n";
        out << "threads=" << threads << "\n";
        out << "complete=" << (complete ? "true" : "false") << "\n";
        for (const auto& [file, hash] : outputs) out << "output." << file << "=" << hash << "\n";
        out << "wall_seconds=" << format_double(wall_seconds) << "\n";
    }
};

}  // namespace lvlab
