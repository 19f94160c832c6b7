#pragma once

/// Flat `key = value` run configuration with strict key checking.

#include <rmt/io.hpp>

#include <cstdint>
#include <map>
#include <sstream>
#include <string>
#include <vector>

namespace rmt {

struct RunConfig {
    // general
    std::uint64_t seed = 12345;
    int jobs = 0; // 0 = all available cores

    // model and simulation
    std::string fixture;    // "pyramid" selects the built-in test mixture
    std::string mixture_in; // RM3 file when no fixture is named
    int N = 0;
    int T = 64;
    double L = 2.0;
    double noise_sd = 1e-4;

    // deconvolution
    double w = pi / 3.0;
    double kernel_sigma2 = 0.2116;
    double t_factor = 0.95;
    int expected_K = 4;
    bool allow_negative = false;
    int max_steps = 1000;
    int rank_against = -1; // profile id for the optional correlation ranking
    std::string path_dump;

    // reconstruction
    int full_K = 0; // 0 = expected_K
    int roman_samples = 1000;
    std::vector<double> sigma2_grid; // empty = log grid around kernel_sigma2
    int sigma2_grid_points = 21;
    int volume_size = 64;
    double volume_extent = 0.0; // 0 = L
    std::vector<std::vector<int>> classes;

    // io paths
    std::string stack, sidecar, estimates;
    std::string gram_out, mixture_out, volume_out, report_out;
    std::string truth, recon, truth_gram, recon_gram;
    std::string residuals_out;
    int residual_count = 3;
    std::string volume_in, residuals_in, slices_out, heatmaps_out;
};

namespace detail {
inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    const auto e = s.find_last_not_of(" \t\r");
    return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
}

template <typename T>
inline T parse_number(const std::string& key, const std::string& value) {
    std::istringstream is(value);
    T out;
    char rest;
    if (!(is >> out) || is >> rest) throw ConfigError("bad value for " + key + ": " + value);
    return out;
}

inline bool parse_bool(const std::string& key, const std::string& value) {
    if (value == "true" || value == "yes" || value == "1") return true;
    if (value == "false" || value == "no" || value == "0") return false;
    throw ConfigError("bad boolean for " + key + ": " + value);
}

template <typename T>
inline std::vector<T> parse_list(const std::string& key, const std::string& value) {
    std::vector<T> out;
    std::string item;
    std::istringstream is(value);
    while (std::getline(is, item, ',')) {
        item = trim(item);
        if (item.empty()) throw ConfigError("empty list entry for " + key);
        out.push_back(parse_number<T>(key, item));
    }
    if (out.empty()) throw ConfigError("empty list for " + key);
    return out;
}
} // namespace detail

/// Parses configuration text. `#` starts a comment, blank lines are
/// skipped, later assignments override earlier ones, and any key
/// outside the known set is an error.
inline RunConfig parse_config_text(const std::string& text) {
    RunConfig cfg;
    std::map<int, std::vector<int>> class_keys;
    std::istringstream in(text);
    std::string raw;
    int lineno = 0;
    while (std::getline(in, raw)) {
        ++lineno;
        const auto hash = raw.find('#');
        if (hash != std::string::npos) raw.erase(hash);
        const std::string line = detail::trim(raw);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("line " + std::to_string(lineno) + " is not key = value");
        const std::string key = detail::trim(line.substr(0, eq));
        const std::string value = detail::trim(line.substr(eq + 1));
        if (key.empty() || value.empty())
            throw ConfigError("line " + std::to_string(lineno) + " has an empty key or value");

        using detail::parse_bool;
        using detail::parse_list;
        using detail::parse_number;
        if (key == "seed") cfg.seed = parse_number<std::uint64_t>(key, value);
        else if (key == "jobs") cfg.jobs = parse_number<int>(key, value);
        else if (key == "fixture") cfg.fixture = value;
        else if (key == "mixture_in") cfg.mixture_in = value;
        else if (key == "N") cfg.N = parse_number<int>(key, value);
        else if (key == "T") cfg.T = parse_number<int>(key, value);
        else if (key == "L") cfg.L = parse_number<double>(key, value);
        else if (key == "noise_sd") cfg.noise_sd = parse_number<double>(key, value);
        else if (key == "w") cfg.w = parse_number<double>(key, value);
        else if (key == "kernel_sigma2") cfg.kernel_sigma2 = parse_number<double>(key, value);
        else if (key == "t_factor") cfg.t_factor = parse_number<double>(key, value);
        else if (key == "expected_K") cfg.expected_K = parse_number<int>(key, value);
        else if (key == "allow_negative") cfg.allow_negative = parse_bool(key, value);
        else if (key == "max_steps") cfg.max_steps = parse_number<int>(key, value);
        else if (key == "rank_against") cfg.rank_against = parse_number<int>(key, value);
        else if (key == "path_dump") cfg.path_dump = value;
        else if (key == "full_K") cfg.full_K = parse_number<int>(key, value);
        else if (key == "roman_samples") cfg.roman_samples = parse_number<int>(key, value);
        else if (key == "sigma2_grid") cfg.sigma2_grid = parse_list<double>(key, value);
        else if (key == "sigma2_grid_points") cfg.sigma2_grid_points = parse_number<int>(key, value);
        else if (key == "volume_size") cfg.volume_size = parse_number<int>(key, value);
        else if (key == "volume_extent") cfg.volume_extent = parse_number<double>(key, value);
        else if (key == "stack") cfg.stack = value;
        else if (key == "sidecar") cfg.sidecar = value;
        else if (key == "estimates") cfg.estimates = value;
        else if (key == "gram_out") cfg.gram_out = value;
        else if (key == "mixture_out") cfg.mixture_out = value;
        else if (key == "volume_out") cfg.volume_out = value;
        else if (key == "report_out") cfg.report_out = value;
        else if (key == "truth") cfg.truth = value;
        else if (key == "recon") cfg.recon = value;
        else if (key == "truth_gram") cfg.truth_gram = value;
        else if (key == "recon_gram") cfg.recon_gram = value;
        else if (key == "residuals_out") cfg.residuals_out = value;
        else if (key == "residual_count") cfg.residual_count = parse_number<int>(key, value);
        else if (key == "volume_in") cfg.volume_in = value;
        else if (key == "residuals_in") cfg.residuals_in = value;
        else if (key == "slices_out") cfg.slices_out = value;
        else if (key == "heatmaps_out") cfg.heatmaps_out = value;
        else if (key.rfind("class", 0) == 0 && key.size() > 5) {
            const int idx = detail::parse_number<int>(key, key.substr(5));
            if (idx < 1) throw ConfigError("class indices start at 1");
            class_keys[idx] = parse_list<int>(key, value);
        } else {
            throw ConfigError("unknown config key: " + key);
        }
    }

    int expect = 1;
    for (const auto& [idx, members] : class_keys) {
        if (idx != expect++) throw ConfigError("class keys must be consecutive from class1");
        cfg.classes.push_back(members);
    }

    // Range checks for everything that has a hard requirement.
    if (cfg.jobs < 0) throw ConfigError("jobs must be >= 0");
    if (cfg.N < 0) throw ConfigError("N must be >= 0");
    if (cfg.T <= 0) throw ConfigError("T must be positive");
    if (!(cfg.L > 0)) throw ConfigError("L must be positive");
    if (cfg.noise_sd < 0) throw ConfigError("noise_sd must be >= 0");
    if (!(cfg.w > 0)) throw ConfigError("w must be positive");
    if (!(cfg.kernel_sigma2 > 0)) throw ConfigError("kernel_sigma2 must be positive");
    if (!(cfg.t_factor > 0) || cfg.t_factor > 1) throw ConfigError("t_factor must be in (0, 1]");
    if (cfg.expected_K < 1) throw ConfigError("expected_K must be >= 1");
    if (cfg.max_steps < 1) throw ConfigError("max_steps must be >= 1");
    if (cfg.full_K < 0) throw ConfigError("full_K must be >= 0");
    if (cfg.roman_samples < 1) throw ConfigError("roman_samples must be >= 1");
    for (double s2 : cfg.sigma2_grid)
        if (!(s2 > 0)) throw ConfigError("sigma2_grid values must be positive");
    if (cfg.sigma2_grid_points < 1) throw ConfigError("sigma2_grid_points must be >= 1");
    if (cfg.volume_size < 2) throw ConfigError("volume_size must be >= 2");
    if (cfg.volume_extent < 0) throw ConfigError("volume_extent must be >= 0");
    if (cfg.residual_count < 0) throw ConfigError("residual_count must be >= 0");
    return cfg;
}

inline RunConfig load_config(const std::string& path) {
    std::ifstream f;
    try {
        f = io::open_input(path);
    } catch (const DataError& e) {
        // An unreadable run configuration is a configuration problem,
        // not a data problem.
        throw ConfigError(e.what());
    }
    std::ostringstream buf;
    buf << f.rdbuf();
    return parse_config_text(buf.str());
}

} // namespace rmt
