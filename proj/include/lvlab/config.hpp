#pragma once

#include <map>
#include <sstream>
#include <string>

#include "lvlab/errors.hpp"
#include "lvlab/model.hpp"

namespace lvlab {

// Flat key=value model configuration, '#' starts a comment:
//
//   phi1.kind = linear        # or exponential
//   phi1.a    = 1.0           # slope     (linear)
//   phi1.b    = 1.0           # intercept (linear)
//   phi2.kind = linear
//   phi2.a    = -1.0
//   phi2.b    = 1.0
//   pop.N     = 1000
//   pop.r1    = 0.5
//   pop.split = deterministic # or bernoulli
//   pop.seed  = 0             # bernoulli split only
//
// exponential families use phi_k.c (scale > 0) and phi_k.s (rate).

class KeyValueConfig {
public:
    static KeyValueConfig parse(const std::string& text) {
        KeyValueConfig cfg;
        cfg.text_ = text;
        std::istringstream in(text);
        std::string line;
        int lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            const auto hash = line.find('#');
            if (hash != std::string::npos) line.erase(hash);
            const std::string trimmed = trim(line);
            if (trimmed.empty()) continue;
            const auto eq = trimmed.find('=');
            if (eq == std::string::npos)
                fail(errc::bad_config,
                     "config line " + std::to_string(lineno) + " is not key=value: " + trimmed);
            const std::string key = trim(trimmed.substr(0, eq));
            const std::string value = trim(trimmed.substr(eq + 1));
            if (key.empty() || value.empty())
                fail(errc::bad_config, "empty key or value on config line " + std::to_string(lineno));
            cfg.map_[key] = value;
        }
        return cfg;
    }

    bool has(const std::string& key) const { return map_.count(key) > 0; }

    std::string get(const std::string& key) const {
        auto it = map_.find(key);
        if (it == map_.end()) fail(errc::bad_config, "missing config key: " + key);
        return it->second;
    }

    std::string get_or(const std::string& key, const std::string& fallback) const {
        auto it = map_.find(key);
        return it == map_.end() ? fallback : it->second;
    }

    double get_double(const std::string& key) const {
        try {
            std::size_t pos = 0;
            const std::string v = get(key);
            const double d = std::stod(v, &pos);
            if (pos != v.size()) throw std::invalid_argument(v);
            return d;
        } catch (const std::exception&) {
            fail(errc::bad_config, "config key " + key + " is not a number");
        }
    }

    long get_long(const std::string& key) const {
        try {
            std::size_t pos = 0;
            const std::string v = get(key);
            const long l = std::stol(v, &pos);
            if (pos != v.size()) throw std::invalid_argument(v);
            return l;
        } catch (const std::exception&) {
            fail(errc::bad_config, "config key " + key + " is not an integer");
        }
    }

    const std::string& text() const { return text_; }

private:
    static std::string trim(const std::string& s) {
        const auto b = s.find_first_not_of(" \t\r");
        if (b == std::string::npos) return {};
        const auto e = s.find_last_not_of(" \t\r");
        return s.substr(b, e - b + 1);
    }

    std::map<std::string, std::string> map_;
    std::string text_;
};

inline UtilityFn parse_utility(const KeyValueConfig& cfg, const std::string& prefix) {
    const std::string kind = cfg.get(prefix + ".kind");
    if (kind == "linear") {
        return Linear{cfg.get_double(prefix + ".a"), cfg.get_double(prefix + ".b")};
    }
    if (kind == "exponential") {
        const double c = cfg.get_double(prefix + ".c");
        if (!(c > 0.0)) fail(errc::bad_config, prefix + ".c must be positive");
        return Exponential{c, cfg.get_double(prefix + ".s")};
    }
    fail(errc::bad_config, prefix + ".kind must be 'linear' or 'exponential'");
}

struct ModelConfig {
    UtilityFn phi1, phi2;
    PopulationSpec pop;
};

inline ModelConfig parse_model_config(const KeyValueConfig& cfg) {
    ModelConfig mc{parse_utility(cfg, "phi1"), parse_utility(cfg, "phi2"), {}};
    mc.pop.N = cfg.get_long("pop.N");
    mc.pop.r1 = cfg.get_double("pop.r1");
    const std::string split = cfg.get_or("pop.split", "deterministic");
    if (split == "deterministic") mc.pop.split = SplitMode::deterministic;
    else if (split == "bernoulli") mc.pop.split = SplitMode::bernoulli_sampled;
    else fail(errc::bad_config, "pop.split must be 'deterministic' or 'bernoulli'");
    if (cfg.has("pop.seed")) mc.pop.split_seed = static_cast<std::uint64_t>(cfg.get_long("pop.seed"));
    return mc;
}

/// Model with the population size overridden (experiment ladders reuse one
/// config across several N).
inline Model model_with_n(const ModelConfig& mc, long n) {
    PopulationSpec pop = mc.pop;
    pop.N = n;
    return Model::validate(mc.phi1, mc.phi2, pop);
}

}  // namespace lvlab
