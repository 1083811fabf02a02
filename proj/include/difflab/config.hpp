#pragma once

#include <cctype>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "difflab/pipeline.hpp"

namespace difflab {

/// Round-trip sweep settings: a single-Gaussian toy in low dimension, a pool
/// of seeds, and the step counts to compare.
struct RoundtripParams {
    std::size_t dim = 2;
    Latent mean = {0.8, -0.4};
    double std = 0.6;
    int seeds = 20;
    std::vector<int> step_counts = {10, 50, 200};
};

struct LabConfig {
    PipelineConfig pipeline = default_pipeline_config();
    RoundtripParams roundtrip;
};

struct ConfigParseError : std::runtime_error {
    ConfigParseError(const std::string& msg, int line)
        : std::runtime_error("config parse error at line " + std::to_string(line) + ": " + msg), line_no(line) {}
    int line_no;
};

namespace detail {

inline std::string trim(const std::string& s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

inline double parse_real(const std::string& s, int line) {
    try {
        std::size_t pos = 0;
        const double v = std::stod(s, &pos);
        if (pos != s.size()) throw std::invalid_argument("trailing characters");
        return v;
    } catch (const std::exception&) {
        throw ConfigParseError("expected a number, got '" + s + "'", line);
    }
}

inline long long parse_int(const std::string& s, int line) {
    try {
        std::size_t pos = 0;
        const long long v = std::stoll(s, &pos);
        if (pos != s.size()) throw std::invalid_argument("trailing characters");
        return v;
    } catch (const std::exception&) {
        throw ConfigParseError("expected an integer, got '" + s + "'", line);
    }
}

inline std::vector<double> parse_real_list(const std::string& s, int line) {
    std::vector<double> out;
    std::istringstream is(s);
    std::string tok;
    while (is >> tok) out.push_back(parse_real(tok, line));
    if (out.empty()) throw ConfigParseError("expected a list of numbers", line);
    return out;
}

inline std::vector<int> parse_int_list(const std::string& s, int line) {
    std::vector<int> out;
    std::istringstream is(s);
    std::string tok;
    while (is >> tok) out.push_back(static_cast<int>(parse_int(tok, line)));
    if (out.empty()) throw ConfigParseError("expected a list of integers", line);
    return out;
}

inline std::string format_real(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

inline std::string format_real_list(const std::vector<double>& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) out += " ";
        out += format_real(v[i]);
    }
    return out;
}

}  // namespace detail

/// Parse `key = value` lines under [section] headers into a config, starting
/// from defaults. Unknown sections or keys are rejected with line numbers.
inline LabConfig parse_config(const std::string& text) {
    LabConfig cfg;
    // Mixture settings arrive key-by-key; assemble at the end.
    std::vector<double> mix_weights, mix_stds;
    std::vector<std::pair<std::size_t, std::vector<double>>> mix_means;
    std::size_t mix_dim = cfg.pipeline.mixture.dim;
    bool mixture_touched = false;

    std::istringstream is(text);
    std::string line;
    std::string section;
    int line_no = 0;
    while (std::getline(is, line)) {
        ++line_no;
        std::string s = detail::trim(line);
        if (s.empty() || s[0] == '#' || s[0] == ';') continue;
        if (s.front() == '[') {
            if (s.back() != ']') throw ConfigParseError("unterminated section header", line_no);
            section = detail::trim(s.substr(1, s.size() - 2));
            if (section != "run" && section != "schedule" && section != "mixture" && section != "video" &&
                section != "edit" && section != "prompt" && section != "ccs" && section != "tcs" &&
                section != "roundtrip") {
                throw ConfigParseError("unknown section [" + section + "]", line_no);
            }
            continue;
        }
        const std::size_t eq = s.find('=');
        if (eq == std::string::npos) throw ConfigParseError("expected 'key = value'", line_no);
        const std::string key = detail::trim(s.substr(0, eq));
        const std::string value = detail::trim(s.substr(eq + 1));
        if (key.empty() || value.empty()) throw ConfigParseError("empty key or value", line_no);
        if (section.empty()) throw ConfigParseError("key '" + key + "' outside any section", line_no);

        auto& p = cfg.pipeline;
        if (section == "run") {
            if (key == "seed") p.seed = static_cast<std::uint64_t>(detail::parse_int(value, line_no));
            else if (key == "threads") p.threads = static_cast<int>(detail::parse_int(value, line_no));
            else throw ConfigParseError("unknown key '" + key + "' in [run]", line_no);
        } else if (section == "schedule") {
            if (key == "T") p.schedule.T = static_cast<int>(detail::parse_int(value, line_no));
            else if (key == "beta_start") p.schedule.beta_start = detail::parse_real(value, line_no);
            else if (key == "beta_end") p.schedule.beta_end = detail::parse_real(value, line_no);
            else throw ConfigParseError("unknown key '" + key + "' in [schedule]", line_no);
        } else if (section == "mixture") {
            mixture_touched = true;
            if (key == "dim") mix_dim = static_cast<std::size_t>(detail::parse_int(value, line_no));
            else if (key == "weights") mix_weights = detail::parse_real_list(value, line_no);
            else if (key == "stds") mix_stds = detail::parse_real_list(value, line_no);
            else if (key.rfind("mean", 0) == 0) {
                std::size_t idx = 0;
                try {
                    idx = static_cast<std::size_t>(std::stoul(key.substr(4)));
                } catch (const std::exception&) {
                    throw ConfigParseError("unknown key '" + key + "' in [mixture]", line_no);
                }
                mix_means.emplace_back(idx, detail::parse_real_list(value, line_no));
            } else {
                throw ConfigParseError("unknown key '" + key + "' in [mixture]", line_no);
            }
        } else if (section == "video") {
            if (key == "n_frames") p.video.n_frames = static_cast<int>(detail::parse_int(value, line_no));
            else if (key == "drift") p.video.drift = detail::parse_real(value, line_no);
            else if (key == "jitter") p.video.jitter = detail::parse_real(value, line_no);
            else throw ConfigParseError("unknown key '" + key + "' in [video]", line_no);
        } else if (section == "edit") {
            if (key == "scale") p.edit.scale = detail::parse_real(value, line_no);
            else if (key == "direction") p.edit.direction = value;
            else throw ConfigParseError("unknown key '" + key + "' in [edit]", line_no);
        } else if (section == "prompt") {
            if (key == "lambda1") p.lambda1 = detail::parse_real(value, line_no);
            else if (key == "embedder") p.embedder = value;
            else throw ConfigParseError("unknown key '" + key + "' in [prompt]", line_no);
        } else if (section == "ccs") {
            if (key == "steps") p.ccs.n_steps = static_cast<int>(detail::parse_int(value, line_no));
            else if (key == "lambda2") p.ccs.lambda2 = detail::parse_real(value, line_no);
            else if (key == "companion") {
                if (value == "source-anchored") p.ccs.companion = CompanionMode::source_anchored;
                else if (value == "parallel-ddim") p.ccs.companion = CompanionMode::parallel_ddim;
                else throw ConfigParseError("companion must be source-anchored or parallel-ddim", line_no);
            } else {
                throw ConfigParseError("unknown key '" + key + "' in [ccs]", line_no);
            }
        } else if (section == "tcs") {
            if (key == "eta") p.tcs.eta = detail::parse_real(value, line_no);
            else if (key == "iterations") p.tcs.iterations = static_cast<int>(detail::parse_int(value, line_no));
            else if (key == "bandwidth") {
                if (value == "median") p.tcs.bandwidth = BandwidthPolicy::median();
                else p.tcs.bandwidth = BandwidthPolicy::fixed(detail::parse_real(value, line_no));
            } else {
                throw ConfigParseError("unknown key '" + key + "' in [tcs]", line_no);
            }
        } else if (section == "roundtrip") {
            auto& r = cfg.roundtrip;
            if (key == "dim") r.dim = static_cast<std::size_t>(detail::parse_int(value, line_no));
            else if (key == "mean") r.mean = detail::parse_real_list(value, line_no);
            else if (key == "std") r.std = detail::parse_real(value, line_no);
            else if (key == "seeds") r.seeds = static_cast<int>(detail::parse_int(value, line_no));
            else if (key == "step_counts") r.step_counts = detail::parse_int_list(value, line_no);
            else throw ConfigParseError("unknown key '" + key + "' in [roundtrip]", line_no);
        }
    }

    if (mixture_touched) {
        MixtureParams mix;
        mix.dim = mix_dim;
        if (mix_weights.empty()) throw ConfigParseError("[mixture] requires weights", 0);
        if (mix_stds.size() != mix_weights.size()) throw ConfigParseError("[mixture] stds/weights length mismatch", 0);
        mix.components.resize(mix_weights.size());
        for (std::size_t k = 0; k < mix_weights.size(); ++k) {
            mix.components[k].weight = mix_weights[k];
            mix.components[k].std = mix_stds[k];
            mix.components[k].mean = zeros(mix_dim);
        }
        for (const auto& [idx, values] : mix_means) {
            if (idx >= mix.components.size()) throw ConfigParseError("mean index out of range", 0);
            if (values.size() > mix_dim) throw ConfigParseError("mean longer than dim", 0);
            for (std::size_t i = 0; i < values.size(); ++i) mix.components[idx].mean[i] = values[i];
        }
        mix.validate();
        cfg.pipeline.mixture = mix;
    }

    // Pad the round-trip mean to its dim.
    if (cfg.roundtrip.mean.size() < cfg.roundtrip.dim) cfg.roundtrip.mean.resize(cfg.roundtrip.dim, 0.0);
    if (cfg.roundtrip.mean.size() > cfg.roundtrip.dim) {
        throw ConfigParseError("[roundtrip] mean longer than dim", 0);
    }
    return cfg;
}

inline LabConfig load_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_config(buf.str());
}

/// Canonical snapshot of the effective configuration; fixed key order so the
/// text (and its hash) is reproducible.
inline std::string serialize_config(const LabConfig& cfg) {
    const auto& p = cfg.pipeline;
    std::ostringstream os;
    os << "[run]\n";
    os << "seed = " << p.seed << "\n";
    os << "threads = " << p.threads << "\n\n";
    os << "[schedule]\n";
    os << "T = " << p.schedule.T << "\n";
    os << "beta_start = " << detail::format_real(p.schedule.beta_start) << "\n";
    os << "beta_end = " << detail::format_real(p.schedule.beta_end) << "\n\n";
    os << "[mixture]\n";
    os << "dim = " << p.mixture.dim << "\n";
    std::vector<double> ws, ss;
    for (const auto& c : p.mixture.components) {
        ws.push_back(c.weight);
        ss.push_back(c.std);
    }
    os << "weights = " << detail::format_real_list(ws) << "\n";
    os << "stds = " << detail::format_real_list(ss) << "\n";
    for (std::size_t k = 0; k < p.mixture.components.size(); ++k) {
        os << "mean" << k << " = " << detail::format_real_list(p.mixture.components[k].mean) << "\n";
    }
    os << "\n[video]\n";
    os << "n_frames = " << p.video.n_frames << "\n";
    os << "drift = " << detail::format_real(p.video.drift) << "\n";
    os << "jitter = " << detail::format_real(p.video.jitter) << "\n\n";
    os << "[edit]\n";
    os << "scale = " << detail::format_real(p.edit.scale) << "\n";
    os << "direction = " << p.edit.direction << "\n\n";
    os << "[prompt]\n";
    os << "lambda1 = " << detail::format_real(p.lambda1) << "\n";
    os << "embedder = " << p.embedder << "\n\n";
    os << "[ccs]\n";
    os << "steps = " << p.ccs.n_steps << "\n";
    os << "lambda2 = " << detail::format_real(p.ccs.lambda2) << "\n";
    os << "companion = " << (p.ccs.companion == CompanionMode::source_anchored ? "source-anchored" : "parallel-ddim")
       << "\n\n";
    os << "[tcs]\n";
    os << "eta = " << detail::format_real(p.tcs.eta) << "\n";
    os << "iterations = " << p.tcs.iterations << "\n";
    os << "bandwidth = "
       << (p.tcs.bandwidth.kind == BandwidthPolicy::Kind::median_heuristic ? std::string("median")
                                                                           : detail::format_real(p.tcs.bandwidth.h))
       << "\n\n";
    os << "[roundtrip]\n";
    os << "dim = " << cfg.roundtrip.dim << "\n";
    os << "mean = " << detail::format_real_list(cfg.roundtrip.mean) << "\n";
    os << "std = " << detail::format_real(cfg.roundtrip.std) << "\n";
    os << "seeds = " << cfg.roundtrip.seeds << "\n";
    os << "step_counts =";
    for (int s : cfg.roundtrip.step_counts) os << " " << s;
    os << "\n";
    return os.str();
}

}  // namespace difflab
