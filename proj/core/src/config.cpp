#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>

#include "corrhyp/errors.hpp"
#include "corrhyp/holonomic.hpp"
#include "corrhyp/io.hpp"

namespace corrhyp {

namespace {

std::string trim(const std::string& s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value,
                            const std::string& what) {
    throw ConfigError("config key '" + key + "': " + what + ": '" + value + "'");
}

double to_double(const std::string& key, const std::string& value) {
    const char* s = value.c_str();
    char* end = nullptr;
    const double v = std::strtod(s, &end);
    if (end == s || *end != '\0') bad_value(key, value, "expected a number");
    if (!std::isfinite(v)) bad_value(key, value, "value is not finite");
    return v;
}

long to_long(const std::string& key, const std::string& value) {
    const char* s = value.c_str();
    char* end = nullptr;
    const long v = std::strtol(s, &end, 10);
    if (end == s || *end != '\0') bad_value(key, value, "expected an integer");
    return v;
}

std::uint64_t to_u64(const std::string& key, const std::string& value) {
    const char* s = value.c_str();
    if (*s == '-') bad_value(key, value, "expected a non-negative integer");
    char* end = nullptr;
    const unsigned long long v = std::strtoull(s, &end, 10);
    if (end == s || *end != '\0') bad_value(key, value, "expected a non-negative integer");
    return static_cast<std::uint64_t>(v);
}

std::vector<double> to_double_list(const std::string& key, const std::string& value) {
    std::vector<double> out;
    std::stringstream ss(value);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (item.empty()) bad_value(key, value, "empty list entry");
        out.push_back(to_double(key, item));
    }
    if (out.empty()) bad_value(key, value, "expected a comma-separated list");
    return out;
}

// schedule.K.I with K >= 1 and I in 1..3; returns false for other keys.
bool parse_schedule_key(const std::string& key, int& k, int& i) {
    const std::string prefix = "schedule.";
    if (key.rfind(prefix, 0) != 0) return false;
    const std::string rest = key.substr(prefix.size());
    const std::size_t dot = rest.find('.');
    if (dot == std::string::npos) return false;
    const std::string ks = rest.substr(0, dot), is = rest.substr(dot + 1);
    if (ks.empty() || is.empty()) return false;
    if (!std::all_of(ks.begin(), ks.end(), [](char c) { return std::isdigit(static_cast<unsigned char>(c)); }))
        return false;
    if (!std::all_of(is.begin(), is.end(), [](char c) { return std::isdigit(static_cast<unsigned char>(c)); }))
        return false;
    k = std::atoi(ks.c_str());
    i = std::atoi(is.c_str());
    return true;
}

}  // namespace

const std::string* KvFile::find(const std::string& key) const {
    for (const KvEntry& e : entries)
        if (e.key == key) return &e.value;
    return nullptr;
}

KvFile parse_kv(const std::string& text) {
    KvFile kv;
    std::set<std::string> seen;
    std::stringstream ss(text);
    std::string line;
    int lineno = 0;
    while (std::getline(ss, line)) {
        ++lineno;
        const std::size_t hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
        KvEntry e;
        e.key = trim(line.substr(0, eq));
        e.value = trim(line.substr(eq + 1));
        e.line = lineno;
        if (e.key.empty())
            throw ConfigError("config line " + std::to_string(lineno) + ": empty key");
        if (e.value.empty())
            throw ConfigError("config line " + std::to_string(lineno) + ": empty value for '" +
                              e.key + "'");
        if (!seen.insert(e.key).second)
            throw ConfigError("config line " + std::to_string(lineno) + ": duplicate key '" +
                              e.key + "'");
        kv.entries.push_back(std::move(e));
    }
    return kv;
}

KvFile load_kv(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot read config file: " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_kv(buf.str());
}

double RunConfig::tau(int k) const { return tau1 * std::exp(1.0 - k); }

void RunConfig::validate() const {
    if (!(rho0 > 0.0 && rho0 < 1.0))
        throw ConfigError("rho0 must lie strictly between 0 and 1, got " + format_g17(rho0));
    if (depth < 0) throw ConfigError("depth must be non-negative, got " + std::to_string(depth));
    const double cap = 0.5 * immersion_margin_f0(rho0);
    if (!(tau1 > 0.0))
        throw ConfigError("tau1 must be positive, got " + format_g17(tau1));
    if (tau1 > cap)
        throw ConfigError("tau1 = " + format_g17(tau1) +
                          " exceeds half the initial immersion margin " + format_g17(cap));
    if (!(lambda > 1.0))
        throw ConfigError("lambda must exceed 1, got " + format_g17(lambda));
    if (!adaptive) {
        if (static_cast<int>(schedule.size()) != depth)
            throw ConfigError("schedule has " + std::to_string(schedule.size()) +
                              " rows but depth is " + std::to_string(depth));
        for (std::size_t k = 0; k < schedule.size(); ++k)
            for (int i = 0; i < 3; ++i)
                if (schedule[k][static_cast<std::size_t>(i)] < 1)
                    throw ConfigError("schedule." + std::to_string(k + 1) + "." +
                                      std::to_string(i + 1) + " must be positive");
    }
    if (grid_rho != 0 && grid_rho < 8)
        throw ConfigError("grid.rho must be at least 8, got " + std::to_string(grid_rho));
    if (grid_phi != 0 && (grid_phi < 7 || grid_phi % 7 != 0))
        throw ConfigError("grid.phi must be a positive multiple of 7, got " +
                          std::to_string(grid_phi));
    for (double r : pattern_rho)
        if (!(r > 0.0 && r < 1.0))
            throw ConfigError("pattern.rho entries must lie in (0, 1), got " + format_g17(r));
    if (pattern_samples < 2)
        throw ConfigError("pattern.samples must be at least 2, got " +
                          std::to_string(pattern_samples));
    if (pattern_m < 1)
        throw ConfigError("pattern.m must be at least 1, got " + std::to_string(pattern_m));
}

std::vector<std::array<long, 3>> default_schedule(int depth) {
    std::vector<std::array<long, 3>> rows;
    long scale = 1;
    for (int k = 1; k <= depth; ++k) {
        rows.push_back({12 * scale, 80 * scale, 500 * scale});
        scale *= 2;
    }
    return rows;
}

RunConfig resolve_config(const KvFile& kv) {
    RunConfig cfg;
    std::map<std::pair<int, int>, long> table;
    bool mode_key_adaptive = false, mode_key_default = false;

    for (const KvEntry& e : kv.entries) {
        int sk = 0, si = 0;
        if (e.key == "rho0") {
            cfg.rho0 = to_double(e.key, e.value);
        } else if (e.key == "depth") {
            cfg.depth = static_cast<int>(to_long(e.key, e.value));
        } else if (e.key == "tau1") {
            cfg.tau1 = to_double(e.key, e.value);
        } else if (e.key == "lambda") {
            cfg.lambda = to_double(e.key, e.value);
        } else if (e.key == "schedule") {
            if (e.value == "adaptive")
                mode_key_adaptive = true;
            else if (e.value == "default")
                mode_key_default = true;
            else
                bad_value(e.key, e.value, "expected 'default' or 'adaptive'");
        } else if (e.key == "grid.rho") {
            cfg.grid_rho = static_cast<int>(to_long(e.key, e.value));
        } else if (e.key == "grid.phi") {
            cfg.grid_phi = static_cast<int>(to_long(e.key, e.value));
        } else if (e.key == "outdir") {
            cfg.outdir = e.value;
        } else if (e.key == "seed") {
            cfg.seed = to_u64(e.key, e.value);
        } else if (e.key == "pattern.rho") {
            cfg.pattern_rho = to_double_list(e.key, e.value);
        } else if (e.key == "pattern.samples") {
            cfg.pattern_samples = static_cast<int>(to_long(e.key, e.value));
        } else if (e.key == "pattern.m") {
            cfg.pattern_m = to_long(e.key, e.value);
        } else if (parse_schedule_key(e.key, sk, si)) {
            if (sk < 1 || si < 1 || si > 3)
                throw ConfigError("config key '" + e.key +
                                  "': stage must be >= 1 and direction in 1..3");
            table[{sk, si}] = to_long(e.key, e.value);
        } else {
            throw ConfigError(
                "unknown config key '" + e.key +
                "' (known: rho0, depth, tau1, lambda, schedule, schedule.K.I, grid.rho, "
                "grid.phi, outdir, seed, pattern.rho, pattern.samples, pattern.m)");
        }
    }

    if (mode_key_adaptive && !table.empty())
        throw ConfigError("schedule = adaptive conflicts with explicit schedule.K.I keys");
    if (mode_key_adaptive && mode_key_default)
        throw ConfigError("schedule mode set twice");

    cfg.adaptive = mode_key_adaptive;
    if (!cfg.adaptive) {
        if (table.empty()) {
            cfg.schedule = default_schedule(cfg.depth);
        } else {
            for (const auto& [ki, n] : table)
                if (ki.first > cfg.depth)
                    throw ConfigError("schedule." + std::to_string(ki.first) + "." +
                                      std::to_string(ki.second) + " = " + std::to_string(n) +
                                      " lies beyond depth " + std::to_string(cfg.depth));
            cfg.schedule.assign(static_cast<std::size_t>(std::max(cfg.depth, 0)), {0, 0, 0});
            for (int k = 1; k <= cfg.depth; ++k)
                for (int i = 1; i <= 3; ++i) {
                    const auto it = table.find({k, i});
                    if (it == table.end())
                        throw ConfigError("incomplete schedule: missing schedule." +
                                          std::to_string(k) + "." + std::to_string(i));
                    cfg.schedule[static_cast<std::size_t>(k - 1)][static_cast<std::size_t>(i - 1)] =
                        it->second;
                }
        }
    }

    cfg.validate();
    return cfg;
}

}  // namespace corrhyp
